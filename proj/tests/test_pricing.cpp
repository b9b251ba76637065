#include "doctest.h"
#include "fixtures.hpp"

#include "creditquote/pricing.hpp"

#include <cmath>

using namespace creditquote;

namespace {

const NoiseSpec kTrunc = NoiseSpec::truncated_normal(0.05, 0.05, 0.02, 0.11);

QuoteProblem problem(BondPrimitives b, NoiseSpec noise, double mean, double gamma = 0.0, double cap = 150.0) {
  QuoteProblem q{std::move(b), noise, mean};
  q.gamma = gamma;
  q.p_cap = cap;
  return q;
}

// Two passes of a dense grid on the price axis: the whole feasible range, then
// a window of +-10 cells around the first argmax.
double brute_force_quote(const QuoteProblem& q, int points = 1000000) {
  double lo = price(q.primitives, q.r_hi) * (1.0 + 1e-12);
  double hi = std::min(q.p_cap, price(q.primitives, q.r_lo));
  double best_p = lo;
  for (int pass = 0; pass < 2; ++pass) {
    double best = -1.0;
    const double step = (hi - lo) / (points - 1);
    for (int i = 0; i < points; ++i) {
      const double p = lo + step * i;
      const double r = expected_reward(q, p);
      if (r > best) {
        best = r;
        best_p = p;
      }
    }
    lo = std::max(lo, best_p - 10 * step);
    hi = std::min(hi, best_p + 10 * step);
  }
  return best_p;
}

}  // namespace

TEST_SUITE("pricing") {
  TEST_CASE("expected reward limits") {
    const BondPrimitives b = BondPrimitives::regular(0.05, 100.0, 20);
    const QuoteProblem q = problem(b, NoiseSpec::normal(0.0, 0.02), 0.05, 90.0);
    CHECK(expected_reward(q, 90.0) == 0.0);
    const QuoteProblem sure = problem(b, NoiseSpec::normal(0.0, 0.02), q.r_lo - 10 * 0.02, 10.0);
    CHECK(expected_reward(sure, 100.0) == doctest::Approx(90.0).epsilon(1e-12));
    CHECK_THROWS(expected_reward(q, 151.0));
  }

  TEST_CASE("expected reward recomposes from the bond and the noise") {
    Rng rng(201);
    for (int i = 0; i < 500; ++i) {
      const QuoteProblem q = problem(fixture::random_bond(rng), i % 2 ? kTrunc : NoiseSpec::normal(0.0, 0.03),
                                     rng.uniform(-0.02, 0.1), rng.uniform(0.0, 20.0));
      const double p = rng.uniform(price(q.primitives, 0.5), std::min(q.p_cap, price(q.primitives, 0.0)));
      const double expect = (p - q.gamma) * cdf(q.noise, yield_of_price(q.primitives, p) - q.b);
      CHECK(std::abs(expected_reward(q, p) - expect) < 1e-12 * std::max(1.0, std::abs(expect)));
    }
  }

  TEST_CASE("near-deterministic competitor") {
    const BondPrimitives b = BondPrimitives::regular(0.05, 100.0, 20);
    const QuoteProblem q = problem(b, NoiseSpec::normal(0.0, 1e-6), 0.05);
    const QuoteResult res = optimal_quote(q);
    const double target = price(b, 0.05);
    CHECK(res.p_star <= target);
    CHECK(std::abs(res.p_star - target) < 1e-3 * target);
  }

  TEST_CASE("zero coupon bond against a dense grid") {
    const QuoteProblem q = problem(BondPrimitives(0.0, 100.0, {1.0}), NoiseSpec::normal(0.0, 0.01), 0.05, 0.0, 120.0);
    const QuoteResult res = optimal_quote(q);
    CHECK(std::abs(res.p_star - brute_force_quote(q)) < 1e-5);
    CHECK(res.interior);
    CHECK(res.foc_residual < 1e-8 * std::abs(price_derivs(q.primitives, res.r_star).d1));
  }

  TEST_CASE("quote falls as the competitor yield rises") {
    const BondPrimitives b = BondPrimitives::regular(0.05, 100.0, 30);
    const double p4 = optimal_quote(problem(b, NoiseSpec::normal(0.0, 0.01), 0.04)).p_star;
    const double p6 = optimal_quote(problem(b, NoiseSpec::normal(0.0, 0.01), 0.06)).p_star;
    CHECK(p4 > p6);
    CHECK(brute_force_quote(problem(b, NoiseSpec::normal(0.0, 0.01), 0.04), 20000) >
          brute_force_quote(problem(b, NoiseSpec::normal(0.0, 0.01), 0.06), 20000));
  }

  TEST_CASE("first-order condition and audit grid on random problems") {
    Rng rng(211);
    int interior = 0;
    for (int i = 0; i < 1000; ++i) {
      const NoiseSpec noise = i % 2 ? kTrunc : NoiseSpec::normal(0.0, rng.uniform(0.01, 0.08));
      const QuoteProblem q = problem(fixture::random_bond(rng), noise, rng.uniform(-0.05, 0.15));
      const QuoteResult res = optimal_quote(q);
      if (res.interior) {
        ++interior;
        CHECK(res.foc_residual < 1e-8 * std::abs(price_derivs(q.primitives, res.r_star).d1));
      }
      if (i % 10 == 0) {
        const double lo = price(q.primitives, q.r_hi) * (1.0 + 1e-12);
        const double hi = std::min(q.p_cap, price(q.primitives, q.r_lo));
        for (int k = 0; k < 10000; ++k) {
          const double p = lo + (hi - lo) * k / 9999.0;
          CHECK(expected_reward(q, p) <= res.reward + 1e-9);
        }
      }
    }
    CHECK(interior > 250);
  }

  TEST_CASE("binding price cap") {
    const BondPrimitives b = BondPrimitives::regular(0.08, 100.0, 40);
    const QuoteProblem q = problem(b, NoiseSpec::normal(0.0, 0.01), -0.09, 0.0, 150.0);
    const QuoteResult res = optimal_quote(q);
    CHECK(res.cap_binding);
    CHECK(res.p_star == doctest::Approx(150.0).epsilon(1e-12));
    CHECK_FALSE(res.interior);
  }

  TEST_CASE("shared grid gives the same quote") {
    Rng rng(223);
    for (int i = 0; i < 50; ++i) {
      const QuoteProblem q = problem(fixture::random_bond(rng), kTrunc, rng.uniform(-0.05, 0.1));
      const PriceGrid grid = PriceGrid::build(q);
      CHECK(optimal_quote(q, grid).p_star == optimal_quote(q).p_star);
    }
  }

  TEST_CASE("invalid problems") {
    QuoteProblem q = problem(BondPrimitives::regular(0.05, 100.0, 20), kTrunc, 0.05);
    q.p_cap = 10.0;
    CHECK_THROWS(optimal_quote(q));
    q.p_cap = 150.0;
    q.r_lo = 2.0;
    CHECK_THROWS(optimal_quote(q));
  }
}
