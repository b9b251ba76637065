#include "doctest.h"

#include "creditquote/simulator.hpp"

#include <cmath>
#include <vector>

using namespace creditquote;

namespace {

MarketConfig small_market(std::size_t M, std::size_t d, std::size_t T) {
  MarketConfig c;
  c.M = M;
  c.d = d;
  c.T = T;
  return c;
}

const std::vector<PolicyKind> kAll = {PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual,
                                      PolicyKind::Oracle};

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("zero heterogeneity shares one coefficient") {
    MarketConfig c = small_market(5, 6, 16);
    c.delta_max = 0.0;
    Rng rng(7);
    const MarketModel m = generate_model(c, rng);
    CHECK(std::abs(m.theta_star.norm() - 1.0) < 1e-12);
    for (const Vec& th : m.theta) CHECK((th - m.theta_star).norm() == 0.0);
  }

  TEST_CASE("deviations are rescaled to delta_max") {
    MarketConfig c = small_market(20, 8, 16);
    c.delta_max = 0.37;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      const MarketModel m = generate_model(c, rng);
      for (std::size_t j = 0; j < c.M; ++j) {
        CHECK(std::abs(m.delta[j].norm() - 0.37) < 1e-12);
        CHECK((m.theta[j] - m.theta_star - m.delta[j]).norm() < 1e-15);
      }
    }
  }

  TEST_CASE("raw deviation covariance") {
    Rng rng(11);
    const std::size_t d = 4;
    const int n = 10000;
    Mat s = Mat::Zero(d, d);
    Vec mean = Vec::Zero(d);
    std::vector<Vec> draws;
    for (int i = 0; i < n; ++i) {
      draws.push_back(draw_raw_deviation(d, rng));
      mean += draws.back();
    }
    mean /= n;
    for (const Vec& v : draws) s += (v - mean) * (v - mean).transpose();
    s /= n - 1;
    for (Eigen::Index a = 0; a < 4; ++a) {
      for (Eigen::Index b = 0; b < 4; ++b) {
        const double want = 1.0 + (a == b ? 0.2 : 0.0);
        CHECK(std::abs(s(a, b) - want) < 0.1);
      }
    }
  }

  TEST_CASE("arrival weights") {
    ArrivalSpec u;
    for (double w : arrival_weights(u, 4)) CHECK(w == doctest::Approx(0.25).epsilon(1e-15));

    ArrivalSpec p;
    p.kind = ArrivalSpec::Kind::PolyDecay;
    p.alpha = 2.0;
    const auto w = arrival_weights(p, 3);
    CHECK(w[0] == doctest::Approx(36.0 / 49.0).epsilon(1e-14));
    CHECK(w[1] == doctest::Approx(9.0 / 49.0).epsilon(1e-14));
    CHECK(w[2] == doctest::Approx(4.0 / 49.0).epsilon(1e-14));

    p.alpha = 0.0;
    for (double x : arrival_weights(p, 7)) CHECK(x == doctest::Approx(1.0 / 7.0).epsilon(1e-15));

    ArrivalSpec e;
    e.kind = ArrivalSpec::Kind::ExpDecay;
    e.beta = 0.5;
    const auto we = arrival_weights(e, 500);
    double sum = 0.0;
    for (std::size_t j = 0; j < we.size(); ++j) {
      sum += we[j];
      if (j > 0) {
        CHECK(we[j] <= we[j - 1]);
        if (we[j] > 0.0) CHECK(we[j] / we[j - 1] == doctest::Approx(std::exp(-0.5)));
      }
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    ArrivalSpec raw;
    raw.kind = ArrivalSpec::Kind::Weights;
    raw.weights = {2.0, 1.0, 1.0};
    const auto wr = arrival_weights(raw, 3);
    CHECK(wr[0] == doctest::Approx(0.5));
    CHECK(wr[2] == doctest::Approx(0.25));

    e.beta = 0.0;
    CHECK_THROWS(arrival_weights(e, 3));
    p.alpha = -1.0;
    CHECK_THROWS(arrival_weights(p, 3));
    raw.weights = {1.0, -1.0, 1.0};
    CHECK_THROWS(arrival_weights(raw, 3));
    raw.weights = {1.0};
    CHECK_THROWS(arrival_weights(raw, 3));
  }

  TEST_CASE("invalid market configurations") {
    MarketConfig c = small_market(2, 3, 8);
    Rng rng(1);
    c.M = 0;
    CHECK_THROWS(generate_model(c, rng));
    c = small_market(2, 0, 8);
    CHECK_THROWS(generate_model(c, rng));
    c = small_market(2, 3, 8);
    c.delta_max = -0.1;
    CHECK_THROWS(generate_model(c, rng));
    c = small_market(2, 3, 8);
    c.context_scale = 0.0;
    CHECK_THROWS(generate_model(c, rng));
  }

  TEST_CASE("oracle against itself has zero regret") {
    const MarketConfig c = small_market(3, 4, 256);
    const std::vector<PolicyKind> two = {PolicyKind::Oracle, PolicyKind::Oracle};
    const SeedRun run = run_seed(c, two, 5);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t t = 0; t < c.T; ++t) {
        CHECK(run.path.ledger.realized[i][t] == 0.0);
        CHECK(run.path.ledger.expected[i][t] == 0.0);
        CHECK(run.path.ledger.theta_err[i][t] == 0.0);
      }
    }
  }

  TEST_CASE("fixed seed is deterministic and policy sets share draws") {
    const MarketConfig c = small_market(3, 4, 200);
    const SeedRun a = run_seed(c, kAll, 99);
    const SeedRun b = run_seed(c, kAll, 99);
    REQUIRE(a.path.records.size() == b.path.records.size());
    for (std::size_t i = 0; i < a.path.records.size(); ++i) {
      const RoundRecord& x = a.path.records[i];
      const RoundRecord& y = b.path.records[i];
      CHECK(x.quote == y.quote);
      CHECK(x.bcl_price == y.bcl_price);
      CHECK(x.reward == y.reward);
      CHECK(x.expected_regret == y.expected_regret);
    }

    // Pooling alone sees the same arrivals and prices as inside the full set.
    const std::vector<PolicyKind> one = {PolicyKind::Pooling};
    const SeedRun p = run_seed(c, one, 99);
    for (std::size_t t = 0; t < c.T; ++t) {
      const RoundRecord& full = a.path.records[t * kAll.size() + 1];
      const RoundRecord& solo = p.path.records[t];
      CHECK(full.bond_id == solo.bond_id);
      CHECK(full.bcl_price == solo.bcl_price);
      CHECK(full.quote == solo.quote);
    }
  }

  TEST_CASE("records are consistent") {
    MarketConfig c = small_market(4, 5, 512);
    c.gamma = 10.0;
    const SeedRun run = run_seed(c, kAll, 3);
    const std::size_t P = kAll.size();
    std::vector<double> cum(P, 0.0);
    for (std::size_t n = 0; n < run.path.records.size(); ++n) {
      const RoundRecord& r = run.path.records[n];
      const std::size_t i = n % P;
      CHECK(r.policy == kAll[i]);
      CHECK(r.t == n / P + 1);
      CHECK(r.episode == episode_index(r.t).k);
      CHECK(r.win == (r.quote <= r.bcl_price));
      CHECK(r.reward == (r.win ? r.quote - c.gamma : 0.0));
      CHECK(r.realized_regret == r.oracle_reward - r.reward);
      cum[i] += r.realized_regret;
      CHECK(std::abs(run.path.ledger.realized[i][r.t - 1] - cum[i]) <= 1e-9 * std::max(1.0, std::abs(cum[i])));
    }
  }

  TEST_CASE("expected regret is nonnegative") {
    // Oracle maximises the known expected reward, so every gap is a loss up to
    // the optimiser's tolerance.
    const MarketConfig c = small_market(5, 6, 1024);
    const SeedRun run = run_seed(c, kAll, 17);
    for (const RoundRecord& r : run.path.records) CHECK(r.expected_regret >= -1e-8 * r.quote);

    // Averaged over seeds the realized regret agrees in sign within 3 SE.
    std::vector<double> finals;
    const std::vector<PolicyKind> ind = {PolicyKind::Individual};
    for (std::uint64_t s = 0; s < 8; ++s) finals.push_back(run_seed(c, ind, 100 + s).path.ledger.realized[0].back());
    double mean = 0.0, var = 0.0;
    for (double f : finals) mean += f;
    mean /= static_cast<double>(finals.size());
    for (double f : finals) var += (f - mean) * (f - mean);
    const double se = std::sqrt(var / static_cast<double>(finals.size() - 1) / static_cast<double>(finals.size()));
    CHECK(mean >= -3.0 * se);
  }

  TEST_CASE("arrival frequencies match the weights") {
    MarketConfig c = small_market(4, 2, 1u << 14);
    c.arrival.kind = ArrivalSpec::Kind::PolyDecay;
    c.arrival.alpha = 1.0;
    const std::vector<PolicyKind> none = {PolicyKind::Oracle};
    const SeedRun run = run_seed(c, none, 21);
    std::vector<double> count(c.M, 0.0);
    for (const RoundRecord& r : run.path.records) count[r.bond_id] += 1.0;
    const double T = static_cast<double>(c.T);
    for (std::size_t j = 0; j < c.M; ++j) {
      const double pi = run.model.pi[j];
      CHECK(std::abs(count[j] / T - pi) <= 3.0 * std::sqrt(pi * (1.0 - pi) / T));
    }
  }

  TEST_CASE("fixed primitives repeat per bond") {
    MarketConfig c = small_market(3, 2, 64);
    c.fixed_primitives = true;
    PathOptions opts;
    opts.export_log = true;
    const std::vector<PolicyKind> one = {PolicyKind::Pooling};
    const SeedRun run = run_seed(c, one, 4, opts);
    REQUIRE(run.model.fixed_primitives.size() == 3);
    REQUIRE(run.path.log.size() == c.T);
    for (std::size_t t = 0; t < c.T; ++t) {
      const BondPrimitives& b = run.path.round_primitives[t];
      const BondPrimitives& f = run.model.fixed_primitives[run.path.log[t].bond_id];
      CHECK(b.coupon() == f.coupon());
      CHECK(b.payment_times().size() == f.payment_times().size());
    }
  }

  TEST_CASE("generated primitives stay in the box") {
    const MarketConfig c = small_market(1, 1, 1);
    Rng rng(8);
    for (int i = 0; i < 2000; ++i) {
      const BondPrimitives b = draw_primitives(c, rng);
      CHECK(b.payment_times().size() >= 10);
      CHECK(b.payment_times().size() <= 50);
      CHECK(b.coupon() >= 0.02);
      CHECK(b.coupon() <= 0.1);
      CHECK(b.payment_times().front() == 0.5);
      CHECK(b.par() == 100.0);
    }
  }

  TEST_CASE("parallel_for covers every index and propagates errors") {
    std::vector<int> hit(100, 0);
    parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) CHECK(h == 1);
    CHECK_THROWS(parallel_for(10, 3, [](std::size_t i) {
      if (i == 7) throw std::runtime_error("boom");
    }));
  }
}
