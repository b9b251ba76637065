#include "doctest.h"
#include "fixtures.hpp"

#include "creditquote/policies.hpp"

#include <vector>

using namespace creditquote;

namespace {

const NoiseSpec kTrunc = NoiseSpec::truncated_normal(0.05, 0.05, 0.02, 0.11);

PolicyConfig config(PolicyKind kind, std::size_t M, std::size_t d) {
  PolicyConfig c;
  c.kind = kind;
  c.M = M;
  c.d = d;
  c.noise = kTrunc;
  return c;
}

// A multi-bond stream with rounds 1..n.
std::vector<Observation> stream(Rng& rng, const std::vector<Vec>& theta, std::size_t n, double x_scale = 0.1) {
  std::vector<Observation> out;
  for (std::size_t t = 1; t <= n; ++t) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(theta.size()) - 1));
    auto one = fixture::rfq_stream(rng, theta[j], j, 1, kTrunc, x_scale, 0.03, t);
    out.push_back(one.front());
  }
  return out;
}

}  // namespace

TEST_SUITE("policies") {
  TEST_CASE("episode schedule") {
    const EpisodeInfo e1 = episode_index(1);
    CHECK(e1.k == 1);
    CHECK(e1.tau == 1);
    const EpisodeInfo e5 = episode_index(5);
    CHECK(e5.k == 3);
    CHECK(e5.tau == 4);
    CHECK(e5.start == 4);
    CHECK(e5.end == 7);
    CHECK(episode_index(1024).k == 11);
    CHECK(episode_index(1023).k == 10);
    CHECK_THROWS(episode_index(0));
  }

  TEST_CASE("policy names") {
    for (PolicyKind k : {PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual, PolicyKind::Oracle}) {
      CHECK(parse_policy_kind(to_string(k)) == k);
    }
    CHECK_THROWS(parse_policy_kind("greedy"));
  }

  TEST_CASE("cold start quotes with a zero coefficient") {
    Rng rng(301);
    const BondPrimitives b = fixture::random_bond(rng);
    const Vec x = fixture::gaussian(rng, 4, 0.1);
    for (PolicyKind k : {PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual}) {
      Policy p(config(k, 3, 4));
      CHECK(p.theta_for(1).norm() == 0.0);
      const QuoteResult q = p.quote(1, 1, x, b);
      CHECK(q.p_star == optimal_quote(make_quote_problem(p.config(), b, 0.0)).p_star);
    }
  }

  TEST_CASE("bad input") {
    Policy p(config(PolicyKind::TSMT, 2, 3));
    Rng rng(303);
    const auto obs = stream(rng, {Vec::Zero(3), Vec::Zero(3)}, 3);
    p.observe(obs[1]);
    CHECK_THROWS(p.observe(obs[0]));
    CHECK_THROWS(p.theta_for(2));
    CHECK_THROWS(p.quote(5, 7, Vec::Zero(3), fixture::random_bond(rng)));
    CHECK_THROWS(Policy(config(PolicyKind::Oracle, 2, 3)));
  }

  TEST_CASE("episode boundaries and offline equivalence") {
    Rng rng(307);
    const std::size_t M = 3, d = 4;
    std::vector<Vec> truth;
    for (std::size_t j = 0; j < M; ++j) truth.push_back(fixture::unit_sphere(rng, d));
    const auto obs = stream(rng, truth, 15);
    Policy p(config(PolicyKind::TSMT, M, d));
    for (std::size_t t = 1; t <= 7; ++t) p.observe(obs[t - 1]);
    CHECK(p.episode() == 3);
    CHECK(p.refits() == 2);
    p.observe(obs[7]);  // round 8 opens episode 4
    CHECK(p.episode() == 4);
    CHECK(p.refits() == 3);
    const Vec previous = p.estimates().theta_bar;
    for (std::size_t t = 9; t <= 15; ++t) p.observe(obs[t - 1]);
    CHECK(p.refits() == 3);
    p.quote(16, 0, obs[0].x, fixture::random_bond(rng));  // episode 5 fits rounds 8..15
    CHECK(p.refits() == 4);

    const std::vector<Observation> episode4(obs.begin() + 7, obs.end());
    const EstimatorState offline = two_stage_fit(episode4, M, d, kTrunc, LambdaConfig{}, 5.0, previous);
    CHECK(p.estimates().theta_bar == offline.theta_bar);
    for (std::size_t j = 0; j < M; ++j) CHECK(p.estimates().theta_hat[j] == offline.theta_hat[j]);
    CHECK(p.estimates().counts == offline.counts);

    Policy pool(config(PolicyKind::Pooling, M, d));
    for (std::size_t t = 1; t <= 8; ++t) pool.observe(obs[t - 1]);
    const Vec pool_prev = pool.estimates().theta_bar;
    for (std::size_t t = 9; t <= 15; ++t) pool.observe(obs[t - 1]);
    pool.quote(16, 0, obs[0].x, fixture::random_bond(rng));
    CHECK(pool.estimates().theta_bar == stage1_fit(ObservationBatch::from(episode4), kTrunc, pool_prev).theta);
  }

  TEST_CASE("replaying the same stream twice gives identical quotes") {
    Rng rng(311);
    const std::size_t M = 4, d = 5;
    std::vector<Vec> truth;
    for (std::size_t j = 0; j < M; ++j) truth.push_back(fixture::unit_sphere(rng, d));
    const auto obs = stream(rng, truth, 300);
    std::vector<BondPrimitives> bonds;
    for (std::size_t t = 0; t < obs.size(); ++t) bonds.push_back(fixture::random_bond(rng));
    for (PolicyKind k : {PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual}) {
      Policy a(config(k, M, d)), b(config(k, M, d));
      for (std::size_t t = 0; t < obs.size(); ++t) {
        const double qa = a.quote(t + 1, obs[t].bond_id, obs[t].x, bonds[t]).p_star;
        const double qb = b.quote(t + 1, obs[t].bond_id, obs[t].x, bonds[t]).p_star;
        CHECK(qa == qb);
        a.observe(obs[t]);
        b.observe(obs[t]);
      }
    }
  }

  TEST_CASE("projection bounds every coefficient used") {
    Rng rng(313);
    const std::size_t M = 2, d = 3;
    std::vector<Vec> truth{3.0 * fixture::unit_sphere(rng, d), 3.0 * fixture::unit_sphere(rng, d)};
    const auto obs = stream(rng, truth, 255, 0.02);
    for (PolicyKind k : {PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual}) {
      PolicyConfig c = config(k, M, d);
      c.W = 0.5;
      Policy p(c);
      for (const auto& o : obs) {
        p.observe(o);
        for (std::size_t j = 0; j < M; ++j) CHECK(p.theta_for(j).norm() <= 0.5 + 1e-12);
      }
    }
  }

  TEST_CASE("degenerate cases collapse onto pooling") {
    Rng rng(317);
    const std::size_t d = 4;
    {
      // A single bond: Stage II starts at its own minimiser and stays there.
      // When the pooled MLE is not attained (tiny episodes) Stage I stops on
      // a stall and Stage II may still move by roundoff.
      const auto obs = stream(rng, {fixture::unit_sphere(rng, d)}, 255);
      Policy tsmt(config(PolicyKind::TSMT, 1, d)), pool(config(PolicyKind::Pooling, 1, d));
      for (std::size_t t = 0; t < obs.size(); ++t) {
        const BondPrimitives b = fixture::random_bond(rng);
        const double qt = tsmt.quote(t + 1, 0, obs[t].x, b).p_star;
        const double qp = pool.quote(t + 1, 0, obs[t].x, b).p_star;
        if (tsmt.estimates().all_converged) CHECK(qt == qp);
        else CHECK(std::abs(qt - qp) <= 1e-9 * qp);
        tsmt.observe(obs[t]);
        pool.observe(obs[t]);
      }
    }
    {
      // an overwhelming penalty pins Stage II to the pooled estimate
      const std::vector<Vec> truth{fixture::unit_sphere(rng, d), fixture::unit_sphere(rng, d), fixture::unit_sphere(rng, d)};
      const auto obs = stream(rng, truth, 255);
      PolicyConfig c = config(PolicyKind::TSMT, 3, d);
      c.lambda.mode = LambdaMode::Fixed;
      c.lambda.fixed_value = 1e6;
      Policy tsmt(c), pool(config(PolicyKind::Pooling, 3, d));
      for (std::size_t t = 0; t < obs.size(); ++t) {
        const BondPrimitives b = fixture::random_bond(rng);
        CHECK(tsmt.quote(t + 1, obs[t].bond_id, obs[t].x, b).p_star ==
              pool.quote(t + 1, obs[t].bond_id, obs[t].x, b).p_star);
        tsmt.observe(obs[t]);
        pool.observe(obs[t]);
      }
    }
  }

  TEST_CASE("individual learning falls back to the pooled estimate") {
    Rng rng(319);
    const std::size_t d = 3;
    const std::vector<Vec> truth{fixture::unit_sphere(rng, d), fixture::unit_sphere(rng, d), fixture::unit_sphere(rng, d)};
    auto obs = stream(rng, truth, 63);
    for (auto& o : obs) o.bond_id = o.bond_id == 2 ? 0 : o.bond_id;  // bond 2 never trades
    Policy ind(config(PolicyKind::Individual, 3, d)), pool(config(PolicyKind::Pooling, 3, d));
    for (const auto& o : obs) {
      ind.observe(o);
      pool.observe(o);
    }
    ind.quote(64, 0, obs[0].x, fixture::random_bond(rng));
    pool.quote(64, 0, obs[0].x, fixture::random_bond(rng));
    CHECK(ind.theta_for(2) == pool.theta_for(2));
    CHECK(ind.theta_for(0) != pool.theta_for(0));
  }

  TEST_CASE("pooling converges to the clairvoyant quote in a homogeneous market") {
    Rng rng(323);
    const std::size_t d = 3, M = 2;
    const Vec common = fixture::unit_sphere(rng, d);
    std::vector<Vec> truth(M, common);
    Policy pool(config(PolicyKind::Pooling, M, d));
    PolicyConfig oc = config(PolicyKind::Oracle, M, d);
    Policy oracle(oc, truth);
    const std::size_t rounds = (std::size_t{1} << 18) - 1;  // the last episode holds 131072 > 1e5 rows
    for (std::size_t t = 1; t <= rounds; ++t) {
      const std::size_t j = t % M;
      pool.observe(fixture::rfq_stream(rng, common, j, 1, kTrunc, 0.1, 0.03, t).front());
    }
    for (std::size_t i = 0; i < 20; ++i) {
      const BondPrimitives b = fixture::random_bond(rng);
      const Vec x = fixture::gaussian(rng, d, 0.1);
      const double a = pool.quote(rounds + 1 + i, i % M, x, b).p_star;
      const double o = oracle.quote(rounds + 1 + i, i % M, x, b).p_star;
      // The yield standard error with 1.3e5 censored rows is ~1e-4, which a
      // long bond turns into a few cents; compare relative to the price.
      CHECK(std::abs(a - o) < 1e-3 * o);
    }
  }
}
