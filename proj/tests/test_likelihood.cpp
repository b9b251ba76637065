#include "doctest.h"
#include "oracles.hpp"

#include "creditquote/diagnostics.hpp"
#include "creditquote/likelihood.hpp"
#include "creditquote/rng.hpp"

#include <cmath>
#include <vector>

using namespace creditquote;

namespace {

const NoiseSpec kNormal = NoiseSpec::normal(0.05, 0.05);
const NoiseSpec kTrunc = NoiseSpec::truncated_normal(0.05, 0.05, 0.02, 0.11);

Vec random_vec(Rng& rng, int d, double scale) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = scale * rng.normal();
  return v;
}

BondPrimitives random_bond(Rng& rng) {
  return BondPrimitives::regular(rng.uniform(0.02, 0.1), 100.0, static_cast<std::size_t>(rng.uniform_int(10, 50)));
}

// A synthetic RFQ outcome with residual inside (lo, hi) for the truncated family.
Observation random_obs(Rng& rng, const Vec& theta, const NoiseSpec& noise, bool won, std::size_t round = 1) {
  const int d = static_cast<int>(theta.size());
  const BondPrimitives b = random_bond(rng);
  const Vec x = random_vec(rng, d, 0.05);
  const double r = rng.uniform(0.025, 0.105);
  const double anchor = theta.dot(x) + (noise.truncated() ? r : rng.normal(0.05, 0.08));
  if (won) {
    const double quote = price(b, anchor + 0.01);
    return Observation::from_outcome(round, 0, x, quote, true, anchor, b);
  }
  return Observation::from_outcome(round, 0, x, price(b, anchor), false, 0.0, b);
}

}  // namespace

TEST_SUITE("likelihood") {
  TEST_CASE("closed-form values") {
    const NoiseSpec std_normal = NoiseSpec::normal(0.0, 1.0);
    const BondPrimitives b = BondPrimitives::regular(0.05, 100.0, 20);
    Vec theta(2), x(2);
    theta << 0.3, -0.2;
    x << 0.1, 0.05;
    const double b_mean = theta.dot(x);
    const Observation lost = Observation::from_outcome(1, 0, x, price(b, b_mean), false, 0.0, b);
    CHECK(loglik(theta, lost, std_normal) == doctest::Approx(-0.6931472).epsilon(1e-7));
    const Observation won = Observation::from_outcome(1, 0, x, 50.0, true, b_mean, b);
    CHECK(loglik(theta, won, std_normal) == doctest::Approx(-0.9189385).epsilon(1e-7));
  }

  TEST_CASE("value equals a recomposition from the distributions and the bond") {
    Rng rng(19);
    for (const NoiseSpec& noise : {kNormal, kTrunc}) {
      for (int i = 0; i < 200; ++i) {
        const Vec theta = random_vec(rng, 4, 1.0);
        const bool won = i % 2 == 0;
        const Observation o = random_obs(rng, theta, noise, won);
        const double expect = won ? std::log(pdf(noise, o.observed_yield - theta.dot(o.x)))
                                  : std::log(survival(noise, o.quote_yield - theta.dot(o.x)));
        const double got = loglik(theta, o, noise);
        CHECK(std::abs(got - expect) < 1e-12 * std::max(1.0, std::abs(expect)));
      }
    }
  }

  TEST_CASE("gradient") {
    Rng rng(23);
    const Vec theta = random_vec(rng, 3, 1.0);
    Observation o = random_obs(rng, theta, kNormal, true);
    o.x.setZero();
    CHECK(loglik_grad(theta, o, kNormal).norm() == 0.0);

    const NoiseSpec s = NoiseSpec::normal(0.0, 0.2);
    const Observation w = random_obs(rng, theta, s, true);
    const double rho = w.observed_yield - theta.dot(w.x);
    CHECK((loglik_grad(theta, w, s) - (rho / 0.04) * w.x).norm() < 1e-12 * w.x.norm() * std::abs(rho) / 0.04 + 1e-15);
  }

  TEST_CASE("gradient and Hessian against finite differences") {
    Rng rng(29);
    for (const NoiseSpec& noise : {kNormal, kTrunc}) {
      for (int i = 0; i < 100; ++i) {
        const Vec theta = random_vec(rng, 5, 1.0);
        const Observation o = random_obs(rng, theta, noise, i % 2 == 0);
        const Vec g = loglik_grad(theta, o, noise);
        const Mat H = loglik_hessian(theta, o, noise);
        const double h = 1e-6;
        Vec fd(5);
        Mat fdh(5, 5);
        for (int k = 0; k < 5; ++k) {
          Vec e = Vec::Zero(5);
          e(k) = h;
          fd(k) = (loglik(theta + e, o, noise) - loglik(theta - e, o, noise)) / (2 * h);
          fdh.col(k) = (loglik_grad(theta + e, o, noise) - loglik_grad(theta - e, o, noise)) / (2 * h);
        }
        // Relative error, floored well below the typical score size |x| / sigma ~ 1.
        CHECK((g - fd).norm() <= 1e-6 * std::max(g.norm(), 1e-2));
        CHECK((H - fdh).norm() <= 1e-5 * std::max(H.norm(), 1e-2));
      }
    }
  }

  TEST_CASE("batch objective normalisation") {
    Rng rng(37);
    const Vec theta = random_vec(rng, 3, 1.0);
    const Observation o = random_obs(rng, theta, kNormal, false);
    const std::vector<Observation> one{o};
    const Objective f1 = batch_objective(theta, one, kNormal);
    CHECK(f1.value == doctest::Approx(-loglik(theta, o, kNormal)).epsilon(1e-14));
    CHECK((f1.gradient + loglik_grad(theta, o, kNormal)).norm() < 1e-14);
    const std::vector<Observation> two{o, o};
    const Objective f2 = batch_objective(theta, two, kNormal);
    CHECK(f2.value == doctest::Approx(f1.value).epsilon(1e-15));
    CHECK((f2.gradient - f1.gradient).norm() < 1e-15);
    CHECK_THROWS_WITH(batch_objective(theta, std::vector<Observation>{}, kNormal), "no observations");
    CHECK_THROWS_WITH(batch_objective(theta, one, kNormal, std::size_t{3}), "no observations");
  }

  TEST_CASE("score has mean zero at the truth") {
    Rng rng(43);
    const int d = 4;
    const Vec truth = random_vec(rng, d, 0.5);
    std::vector<Observation> obs;
    for (int i = 0; i < 200; ++i) {
      const BondPrimitives b = random_bond(rng);
      const Vec x = random_vec(rng, d, 0.05);
      const double y = truth.dot(x) + sample(kNormal, rng);
      const double q = price(b, truth.dot(x) + 0.05 + rng.uniform(-0.05, 0.05));
      obs.push_back(Observation::from_trade(static_cast<std::size_t>(i + 1), 0, x, q, yield_of_price(b, q), price(b, y), b));
    }
    const Vec g = batch_objective(truth, obs, kNormal).gradient;
    // bootstrap spread of the mean score
    Vec sum = Vec::Zero(d), sum2 = Vec::Zero(d);
    const int reps = 300;
    for (int r = 0; r < reps; ++r) {
      std::vector<Observation> boot;
      for (int i = 0; i < 200; ++i) boot.push_back(obs[static_cast<std::size_t>(rng.uniform_int(0, 199))]);
      const Vec gb = batch_objective(truth, boot, kNormal).gradient;
      sum += gb;
      sum2 += gb.cwiseProduct(gb);
    }
    const Vec var = sum2 / reps - (sum / reps).cwiseProduct(sum / reps);
    CHECK(g.norm() < 3.0 * std::sqrt(var.sum()));
  }

  TEST_CASE("Hessian curvature is bounded below inside the evaluation box") {
    Rng rng(47);
    const int d = 3;
    const NoiseSpec noise = NoiseSpec::normal(0.0, 0.05);
    const double box = 0.2;
    const LikelihoodConstants c = likelihood_constants(noise, box, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      const Vec theta = random_vec(rng, d, 0.3);
      std::vector<Observation> obs;
      Mat sigma = Mat::Zero(d, d);
      while (obs.size() < 50) {
        const BondPrimitives b = random_bond(rng);
        const Vec x = random_vec(rng, d, 0.1);
        const double res = rng.uniform(-box, box);
        const bool won = rng.uniform() < 0.5;
        const double anchor = theta.dot(x) + res;
        obs.push_back(won ? Observation::from_outcome(obs.size() + 1, 0, x, price(b, anchor + 0.01), true, anchor, b)
                          : Observation::from_outcome(obs.size() + 1, 0, x, price(b, anchor), false, 0.0, b));
        sigma += x * x.transpose();
      }
      sigma /= static_cast<double>(obs.size());
      const Objective f = batch_objective(theta, obs, noise);
      CHECK(min_eigenvalue(f.hessian, 1e-9) >= c.ell_F * min_eigenvalue(sigma) - 1e-9);
    }
  }

  TEST_CASE("non-finite input is rejected") {
    Rng rng(53);
    const Vec theta = random_vec(rng, 2, 1.0);
    Observation o = random_obs(rng, theta, kNormal, true);
    o.x(0) = std::nan("");
    CHECK_THROWS(loglik(theta, o, kNormal));
  }

  TEST_CASE("truncated likelihood stays finite outside the support") {
    for (double r : {-1.0, 0.0, 0.019, 0.1095, 0.11, 0.5}) {
      CHECK(std::isfinite(censored_terms(kTrunc, r).value));
      CHECK(std::isfinite(uncensored_terms(kTrunc, r).value));
    }
    bool ext = false;
    censored_terms(kTrunc, 0.2, &ext);
    CHECK(ext);
    uncensored_terms(kTrunc, 0.05, &ext);
    CHECK_FALSE(ext);
  }
}
