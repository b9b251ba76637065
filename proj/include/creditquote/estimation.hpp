#pragma once

#include "creditquote/likelihood.hpp"
#include "creditquote/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace creditquote {

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

struct FitResult {
  Vec theta;
  int iterations = 0;
  bool converged = false;  ///< false: iteration cap or stall, theta is the best iterate
  double optimality = 0.0;
  std::size_t extended = 0;
};

/// Block soft-threshold: argmin_z 0.5 ||z - v||^2 + a ||z||.
inline Vec group_shrink(const Vec& v, double a) {
  const double n = v.norm();
  if (n <= a) return Vec::Zero(v.size());
  return (1.0 - a / n) * v;
}

/// First-order optimality residual of f + lambda ||theta - center||.
inline double group_l2_optimality(const Vec& gradient, const Vec& theta, const Vec& center,
                                  double lambda) {
  const Vec z = theta - center;
  const double zn = z.norm();
  if (zn == 0.0) return std::max(0.0, gradient.norm() - lambda);
  return (gradient + (lambda / zn) * z).norm();
}

namespace detail {

inline bool nearly_no_worse(double candidate, double current) {
  return candidate - current <= 1e-13 * (1.0 + std::abs(current));
}

// Flags a run of iterations that no longer lowers the objective. Truncated
// noise puts a kink in the censored term at the lower support edge; when the
// optimum sits on it the gradient never vanishes and Newton creeps.
class StallMonitor {
 public:
  bool stalled(double value) {
    history_.push_back(value);
    if (history_.size() <= kWindow) return false;
    const double old = history_[history_.size() - 1 - kWindow];
    return old - value <= 1e-10 * (1.0 + std::abs(value));
  }

 private:
  static constexpr std::size_t kWindow = 50;
  std::vector<double> history_;
};

}  // namespace detail

/// Damped Newton with Armijo backtracking for a smooth convex objective.
///
/// `f(theta, with_hessian)` returns an Objective. Near-singular Hessians are
/// shifted until a Cholesky factor exists; a gradient step is taken when the
/// shifted Newton direction does not descend or the line search fails.
template <typename SmoothObjective>
FitResult minimize_newton(const SmoothObjective& f, Vec theta, const SolverOptions& opts = {}) {
  Objective cur = f(theta, true);
  if (!std::isfinite(cur.value) || !cur.gradient.allFinite()) {
    throw std::runtime_error("non-finite objective at init");
  }
  FitResult out;
  const Eigen::Index d = theta.size();
  detail::StallMonitor stall;
  for (out.iterations = 0; out.iterations < opts.max_iter; ++out.iterations) {
    const double gnorm = cur.gradient.norm();
    if (gnorm < opts.tol) {
      out.converged = true;
      break;
    }
    if (stall.stalled(cur.value)) break;

    Vec newton_dir;
    const double base = std::max(cur.hessian.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    double shift = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Mat shifted = cur.hessian;
      shifted.diagonal().array() += shift;
      Eigen::LLT<Mat> llt(shifted);
      if (llt.info() == Eigen::Success && llt.rcond() > 1e-14) {
        Vec dir = -llt.solve(cur.gradient);
        if (dir.allFinite() && cur.gradient.dot(dir) < 0.0) {
          newton_dir = std::move(dir);
          break;
        }
      }
      shift = (shift == 0.0) ? 1e-10 * base : shift * 100.0;
    }

    bool accepted = false;
    for (int pass = 0; pass < 2 && !accepted; ++pass) {
      Vec dir;
      if (pass == 0 && newton_dir.size() == d) {
        dir = newton_dir;
      } else {
        // Gradient step scaled by the Hessian diagonal magnitude.
        dir = -cur.gradient / base;
        pass = 1;
      }
      const double slope = cur.gradient.dot(dir);
      double step = 1.0;
      for (int k = 0; k < 60; ++k, step *= 0.5) {
        Vec cand = theta + step * dir;
        Objective trial = f(cand, false);
        if (!std::isfinite(trial.value)) continue;
        const bool armijo = trial.value <= cur.value + 1e-4 * step * slope;
        const bool flat = detail::nearly_no_worse(trial.value, cur.value) && trial.gradient.norm() < gnorm;
        if (armijo || flat) {
          theta = std::move(cand);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
    cur = f(theta, true);
  }
  out.optimality = cur.gradient.norm();
  out.converged = out.optimality < opts.tol;
  out.extended = cur.extended;
  out.theta = std::move(theta);
  return out;
}

namespace detail {

// Solves min_z 0.5 z^T H z + c^T z + lambda ||z|| for symmetric PSD H.
inline Vec group_l2_quadratic_step(const Mat& hessian, const Vec& c, double lambda) {
  if (c.norm() <= lambda) return Vec::Zero(c.size());
  Eigen::SelfAdjointEigenSolver<Mat> es(hessian);
  Vec evals = es.eigenvalues().cwiseMax(0.0);
  const double floor = 1e-10 * std::max(evals.maxCoeff(), 1e-300);
  evals.array() += floor;
  const Vec ct = es.eigenvectors().transpose() * c;
  auto radius = [&](double nu) {
    return nu * (ct.array() / (evals.array() + nu)).matrix().norm();
  };
  double hi = lambda * evals.maxCoeff() / (c.norm() - lambda) + floor;
  while (radius(hi) < lambda) hi *= 2.0;
  double lo = hi * 1e-30;
  for (int k = 0; k < 200 && hi > lo * (1.0 + 1e-15); ++k) {
    const double mid = std::sqrt(lo * hi);
    if (radius(mid) < lambda) lo = mid; else hi = mid;
  }
  const double nu = hi;
  return -(es.eigenvectors() * (ct.array() / (evals.array() + nu)).matrix());
}

}  // namespace detail

/// Proximal gradient (accelerated, with restart) for f + lambda ||theta - center||.
///
/// The Lipschitz estimate starts at trace(H) / d and doubles until the
/// quadratic upper bound holds.
template <typename SmoothObjective>
FitResult minimize_group_l2_gradient(const SmoothObjective& f, const Vec& center, double lambda,
                                     Vec theta, const SolverOptions& opts = {}) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  Objective cur = f(theta, true);
  if (!std::isfinite(cur.value)) throw std::runtime_error("non-finite objective at init");
  const auto d = static_cast<double>(theta.size());
  double lipschitz = std::max(cur.hessian.trace() / d, 1e-12);

  auto composite = [&](const Vec& t, double smooth) { return smooth + lambda * (t - center).norm(); };

  FitResult out;
  Vec prev = theta;
  Vec y = theta;
  double momentum = 1.0;
  Objective at_y = cur;
  double best = composite(theta, cur.value);
  detail::StallMonitor stall;
  for (out.iterations = 0; out.iterations < opts.max_iter; ++out.iterations) {
    if (group_l2_optimality(cur.gradient, theta, center, lambda) < opts.tol) break;
    if (stall.stalled(best)) break;
    Vec next;
    Objective at_next;
    for (int k = 0; k < 80; ++k) {
      next = center + group_shrink(y - at_y.gradient / lipschitz - center, lambda / lipschitz);
      at_next = f(next, false);
      const Vec step = next - y;
      const double bound = at_y.value + at_y.gradient.dot(step) + 0.5 * lipschitz * step.squaredNorm();
      if (std::isfinite(at_next.value) && at_next.value <= bound + 1e-15 * (1.0 + std::abs(bound))) break;
      lipschitz *= 2.0;
    }
    const double value = composite(next, at_next.value);
    if (value > best) {
      // Adaptive restart: drop the momentum and retry from the current iterate.
      momentum = 1.0;
      y = theta;
      at_y = cur;
      if (value > best + 1e-13 * (1.0 + std::abs(best))) continue;
    }
    best = std::min(best, value);
    const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    prev = theta;
    theta = next;
    cur = at_next;
    y = theta + ((momentum - 1.0) / momentum_next) * (theta - prev);
    momentum = momentum_next;
    at_y = f(y, false);
  }
  cur = f(theta, true);
  out.optimality = group_l2_optimality(cur.gradient, theta, center, lambda);
  out.converged = out.optimality < opts.tol;
  out.extended = cur.extended;
  out.theta = std::move(theta);
  return out;
}

/// Proximal Newton for f + lambda ||theta - center||.
///
/// Each step minimises the second-order model plus the exact penalty (a
/// one-dimensional secular equation on the Hessian spectrum) and is
/// line-searched on the composite objective. A proximal-gradient step is used
/// when the model step fails to descend.
template <typename SmoothObjective>
FitResult minimize_group_l2(const SmoothObjective& f, const Vec& center, double lambda, Vec theta,
                            const SolverOptions& opts = {}) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  Objective cur = f(theta, true);
  if (!std::isfinite(cur.value)) throw std::runtime_error("non-finite objective at init");
  auto composite = [&](const Vec& t, double smooth) { return smooth + lambda * (t - center).norm(); };
  const auto d = static_cast<double>(theta.size());

  FitResult out;
  detail::StallMonitor stall;
  for (out.iterations = 0; out.iterations < opts.max_iter; ++out.iterations) {
    const double opt = group_l2_optimality(cur.gradient, theta, center, lambda);
    if (opt < opts.tol) break;
    const double current = composite(theta, cur.value);
    if (stall.stalled(current)) break;
    const Vec z = theta - center;

    bool accepted = false;
    const Vec z_model = detail::group_l2_quadratic_step(cur.hessian, cur.gradient - cur.hessian * z, lambda);
    const Vec dir = z_model - z;
    const double decrease = cur.gradient.dot(dir) + lambda * (z_model.norm() - z.norm());
    if (dir.allFinite() && decrease < 0.0) {
      double step = 1.0;
      for (int k = 0; k < 50; ++k, step *= 0.5) {
        Vec cand = (step == 1.0) ? Vec(center + z_model) : Vec(theta + step * dir);
        Objective trial = f(cand, false);
        if (!std::isfinite(trial.value)) continue;
        const double value = composite(cand, trial.value);
        const bool armijo = value <= current + 1e-4 * step * decrease;
        const bool flat = detail::nearly_no_worse(value, current) &&
                          group_l2_optimality(trial.gradient, cand, center, lambda) < opt;
        if (armijo || flat) {
          theta = std::move(cand);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      double lipschitz = std::max(cur.hessian.trace() / d, 1e-12);
      for (int k = 0; k < 80 && !accepted; ++k, lipschitz *= 2.0) {
        Vec cand = center + group_shrink(z - cur.gradient / lipschitz, lambda / lipschitz);
        Objective trial = f(cand, false);
        const Vec step = cand - theta;
        const double bound = cur.value + cur.gradient.dot(step) + 0.5 * lipschitz * step.squaredNorm();
        if (std::isfinite(trial.value) && trial.value <= bound &&
            composite(cand, trial.value) < current) {
          theta = std::move(cand);
          accepted = true;
        }
      }
    }
    if (!accepted) break;
    cur = f(theta, true);
  }
  out.optimality = group_l2_optimality(cur.gradient, theta, center, lambda);
  out.converged = out.optimality < opts.tol;
  out.extended = cur.extended;
  out.theta = std::move(theta);
  return out;
}

/// Pooled (or single-bond, for individual learning) unregularised MLE.
FitResult stage1_fit(const ObservationBatch& batch, const NoiseSpec& noise, const Vec& init,
                     const SolverOptions& opts = {});

/// argmin L_j(theta) + lambda ||theta - theta_bar||, started from `init`
/// (theta_bar when omitted).
FitResult stage2_fit(const ObservationBatch& batch_j, const Vec& theta_bar, double lambda,
                     const NoiseSpec& noise, const SolverOptions& opts = {},
                     const Vec* init = nullptr);

enum class LambdaMode { Theory, Experiment, Fixed };

/// sqrt(8 u_F^2 xbar^2 d log(2 d^2 M) / N) in Theory mode, 0.1 sqrt(d / N) in Experiment mode.
double lambda_schedule(LambdaMode mode, std::size_t d, std::size_t n_j, std::size_t M, double u_F,
                       double x_bar);

struct LambdaConfig {
  LambdaMode mode = LambdaMode::Experiment;
  double u_F = 1.0;
  double x_bar = 1.0;
  double fixed_value = 0.0;  ///< used by LambdaMode::Fixed
};

double lambda_for(const LambdaConfig& cfg, std::size_t d, std::size_t n_j, std::size_t M);

/// Euclidean projection onto the ball of radius W.
Vec project_ball(const Vec& theta, double W);

/// Output of one two-stage refit.
struct EstimatorState {
  int episode = 1;
  Vec theta_bar;
  std::vector<Vec> theta_hat;
  std::vector<std::size_t> counts;
  std::vector<double> lambdas;
  double W = 1.0;
  bool all_converged = true;
  std::size_t extended = 0;
};

/// Stage I on every observation, then Stage II per bond. Bonds without data
/// inherit theta_bar.
EstimatorState two_stage_fit(std::span<const Observation> episode_data, std::size_t M,
                             std::size_t d, const NoiseSpec& noise, const LambdaConfig& lambda,
                             double W, const Vec& stage1_init, const SolverOptions& opts = {});

}  // namespace creditquote
