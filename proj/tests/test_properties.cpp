#include "doctest.h"

#include "experiments.hpp"

#include <cmath>
#include <vector>

using namespace creditquote;
using namespace creditquote::experiments;

TEST_SUITE("properties") {
  TEST_CASE("TSMT cumulative regret grows sublinearly") {
    MarketConfig c;
    c.M = 10;
    c.delta_max = 0.5;
    c.T = 4096;
    const std::vector<PolicyKind> pol = {PolicyKind::TSMT};
    const FinalRegret r = final_regret(c, pol, 30);
    const double slope = loglog_slope(r.mean_curve[0], 512, 4096);
    MESSAGE("log-log slope over [512, 4096]: " << slope);
    CHECK(slope < 0.9);
    CHECK(r.mean[0] > 0.0);
  }

  TEST_CASE("Stage II error shrinks with per-bond samples") {
    const RateCurve c = stage2_error_curve(5, 5, 0.3, 0.1, {32, 128, 512}, 8);
    for (std::size_t i = 1; i < c.error.size(); ++i) CHECK(c.error[i] < c.error[i - 1]);
    CHECK(c.slope < -0.25);
  }

  TEST_CASE("loglog slope of a power law") {
    std::vector<double> y(1024);
    for (std::size_t t = 1; t <= y.size(); ++t) y[t - 1] = 3.0 * std::sqrt(static_cast<double>(t));
    CHECK(loglog_slope(y, 8, 1024) == doctest::Approx(0.5).epsilon(1e-12));
  }
}
