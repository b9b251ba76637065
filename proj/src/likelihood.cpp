#include "creditquote/likelihood.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace creditquote {

namespace {

constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;

void check_finite(const Vec& theta, const Observation& obs) {
  if (!theta.allFinite() || !obs.x.allFinite() || !std::isfinite(obs.quote)) {
    throw std::invalid_argument("likelihood: non-finite context or quote");
  }
  if (theta.size() != obs.x.size()) throw std::invalid_argument("likelihood: dimension mismatch");
  if (!std::isfinite(obs.anchor())) throw std::invalid_argument("likelihood: missing anchor yield");
}

// log f with the normaliser log(sigma * mass) supplied by the caller.
LogTerms gaussian_log_density(const NoiseSpec& noise, double r, double log_norm, bool* extended) {
  const double s = noise.sigma;
  const double z = (r - noise.mu) / s;
  if (extended) *extended = noise.truncated() && (r < noise.lo || r > noise.hi);
  return {-0.5 * z * z - kLogSqrt2Pi - log_norm, -z / s, -1.0 / (s * s)};
}

LogTerms residual_terms(const NoiseSpec& noise, const Observation& obs, const Vec& theta) {
  const double r = obs.anchor() - theta.dot(obs.x);
  return obs.won ? uncensored_terms(noise, r) : censored_terms(noise, r);
}

}  // namespace

Observation Observation::from_trade(std::size_t round, std::size_t bond_id, Vec x, double quote,
                                    double quote_yield, double bcl_price, const BondPrimitives& bond) {
  Observation o;
  o.round = round;
  o.bond_id = bond_id;
  o.x = std::move(x);
  o.quote = quote;
  o.quote_yield = quote_yield;
  o.won = quote <= bcl_price;
  if (o.won) o.observed_yield = yield_of_price(bond, bcl_price);
  return o;
}

Observation Observation::from_outcome(std::size_t round, std::size_t bond_id, Vec x, double quote,
                                      bool won, double observed_yield, const BondPrimitives& bond) {
  Observation o;
  o.round = round;
  o.bond_id = bond_id;
  o.x = std::move(x);
  o.quote = quote;
  o.won = won;
  o.quote_yield = yield_of_price(bond, quote);
  if (won) o.observed_yield = observed_yield;
  return o;
}

double survival_extension_margin(const NoiseSpec& noise) {
  return noise.truncated() ? 1e-3 * (noise.hi - noise.lo) : 0.0;
}

LogTerms censored_terms(const NoiseSpec& noise, double r, bool* extended) {
  if (extended) *extended = false;
  if (!noise.truncated()) return log_survival_terms(noise, r);
  if (r <= noise.lo) return {0.0, 0.0, 0.0};
  const double r0 = noise.hi - survival_extension_margin(noise);
  if (r < r0) return log_survival_terms(noise, r);
  if (extended) *extended = true;
  const LogTerms at = log_survival_terms(noise, r0);
  const double t = r - r0;
  return {at.value + at.d1 * t + 0.5 * at.d2 * t * t, at.d1 + at.d2 * t, at.d2};
}

LogTerms uncensored_terms(const NoiseSpec& noise, double r, bool* extended) {
  return gaussian_log_density(noise, r, std::log(noise.sigma * noise.mass()), extended);
}

double loglik(const Vec& theta, const Observation& obs, const NoiseSpec& noise) {
  check_finite(theta, obs);
  return residual_terms(noise, obs, theta).value;
}

Vec loglik_grad(const Vec& theta, const Observation& obs, const NoiseSpec& noise) {
  check_finite(theta, obs);
  return -residual_terms(noise, obs, theta).d1 * obs.x;
}

Mat loglik_hessian(const Vec& theta, const Observation& obs, const NoiseSpec& noise) {
  check_finite(theta, obs);
  return residual_terms(noise, obs, theta).d2 * (obs.x * obs.x.transpose());
}

ObservationBatch ObservationBatch::from(std::span<const Observation> obs,
                                        std::optional<std::size_t> bond) {
  std::size_t n = 0;
  std::size_t d = 0;
  for (const auto& o : obs) {
    if (bond && o.bond_id != *bond) continue;
    if (n == 0) d = static_cast<std::size_t>(o.x.size());
    else if (static_cast<std::size_t>(o.x.size()) != d) throw std::invalid_argument("batch: inconsistent context dimension");
    ++n;
  }
  ObservationBatch b;
  b.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  b.anchor.resize(static_cast<Eigen::Index>(n));
  b.won.resize(n);
  Eigen::Index i = 0;
  for (const auto& o : obs) {
    if (bond && o.bond_id != *bond) continue;
    b.X.row(i) = o.x.transpose();
    b.anchor(i) = o.anchor();
    b.won[static_cast<std::size_t>(i)] = o.won ? 1 : 0;
    ++i;
  }
  return b;
}

Objective batch_objective(const Vec& theta, const ObservationBatch& batch, const NoiseSpec& noise,
                          bool with_hessian) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw std::invalid_argument("no observations");
  if (theta.size() != batch.X.cols()) throw std::invalid_argument("batch_objective: dimension mismatch");
  if (!theta.allFinite()) throw std::invalid_argument("batch_objective: non-finite theta");

  const Vec residual = batch.anchor - batch.X * theta;
  Vec d1(n);
  Vec curvature(n);
  Objective out;
  double total = 0.0;
  const double log_norm = std::log(noise.sigma * noise.mass());
  for (Eigen::Index i = 0; i < n; ++i) {
    bool ext = false;
    const LogTerms t = batch.won[static_cast<std::size_t>(i)]
                           ? gaussian_log_density(noise, residual(i), log_norm, &ext)
                           : censored_terms(noise, residual(i), &ext);
    total += t.value;
    d1(i) = t.d1;
    curvature(i) = -t.d2;
    out.extended += ext ? 1 : 0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.value = -total * inv_n;
  // d/dtheta of -l(anchor - <theta, x>) is d1 * x.
  out.gradient = batch.X.transpose() * d1 * inv_n;
  if (with_hessian) {
    out.hessian = batch.X.transpose() * curvature.asDiagonal() * batch.X * inv_n;
  }
  return out;
}

Objective batch_objective(const Vec& theta, std::span<const Observation> obs,
                          const NoiseSpec& noise, std::optional<std::size_t> bond) {
  return batch_objective(theta, ObservationBatch::from(obs, bond), noise);
}

}  // namespace creditquote
