#include "creditquote/estimation.hpp"

#include <cmath>
#include <stdexcept>

namespace creditquote {

FitResult stage1_fit(const ObservationBatch& batch, const NoiseSpec& noise, const Vec& init,
                     const SolverOptions& opts) {
  if (batch.size() == 0) throw std::invalid_argument("no observations");
  auto f = [&](const Vec& theta, bool with_hessian) {
    return batch_objective(theta, batch, noise, with_hessian);
  };
  return minimize_newton(f, init, opts);
}

FitResult stage2_fit(const ObservationBatch& batch_j, const Vec& theta_bar, double lambda,
                     const NoiseSpec& noise, const SolverOptions& opts, const Vec* init) {
  if (batch_j.size() == 0) throw std::invalid_argument("no observations");
  if (!(lambda >= 0.0)) throw std::invalid_argument("stage2_fit: lambda must be >= 0");
  auto f = [&](const Vec& theta, bool with_hessian) {
    // The proximal-Newton model always needs curvature.
    (void)with_hessian;
    return batch_objective(theta, batch_j, noise, true);
  };
  return minimize_group_l2(f, theta_bar, lambda, init ? *init : theta_bar, opts);
}

double lambda_schedule(LambdaMode mode, std::size_t d, std::size_t n_j, std::size_t M, double u_F,
                       double x_bar) {
  if (n_j == 0) throw std::invalid_argument("lambda_schedule: N_j = 0 (use the pooled estimate)");
  const auto dd = static_cast<double>(d);
  const auto n = static_cast<double>(n_j);
  switch (mode) {
    case LambdaMode::Theory:
      return std::sqrt(8.0 * u_F * u_F * x_bar * x_bar * dd *
                       std::log(2.0 * dd * dd * static_cast<double>(M)) / n);
    case LambdaMode::Experiment:
      return 0.1 * std::sqrt(dd / n);
    case LambdaMode::Fixed:
      break;
  }
  throw std::invalid_argument("lambda_schedule: fixed mode has no schedule");
}

double lambda_for(const LambdaConfig& cfg, std::size_t d, std::size_t n_j, std::size_t M) {
  if (cfg.mode == LambdaMode::Fixed) return cfg.fixed_value;
  return lambda_schedule(cfg.mode, d, n_j, M, cfg.u_F, cfg.x_bar);
}

Vec project_ball(const Vec& theta, double W) {
  if (!(W > 0.0)) throw std::invalid_argument("project_ball: W must be > 0");
  const double n = theta.norm();
  if (n <= W) return theta;
  return theta * (W / n);
}

EstimatorState two_stage_fit(std::span<const Observation> episode_data, std::size_t M,
                             std::size_t d, const NoiseSpec& noise, const LambdaConfig& lambda,
                             double W, const Vec& stage1_init, const SolverOptions& opts) {
  EstimatorState st;
  st.W = W;
  st.counts.assign(M, 0);
  st.lambdas.assign(M, 0.0);
  for (const auto& o : episode_data) {
    if (o.bond_id >= M) throw std::invalid_argument("two_stage_fit: bond id out of range");
    ++st.counts[o.bond_id];
  }
  const ObservationBatch pooled = ObservationBatch::from(episode_data);
  if (pooled.size() == 0) {
    st.theta_bar = stage1_init;
    st.theta_hat.assign(M, st.theta_bar);
    return st;
  }
  if (pooled.dim() != d) throw std::invalid_argument("two_stage_fit: context dimension mismatch");
  FitResult bar = stage1_fit(pooled, noise, stage1_init, opts);
  st.theta_bar = bar.theta;
  st.all_converged = bar.converged;
  st.extended = bar.extended;
  st.theta_hat.assign(M, st.theta_bar);
  for (std::size_t j = 0; j < M; ++j) {
    if (st.counts[j] == 0) continue;
    st.lambdas[j] = lambda_for(lambda, d, st.counts[j], M);
    const ObservationBatch bj = ObservationBatch::from(episode_data, j);
    FitResult fit = stage2_fit(bj, st.theta_bar, st.lambdas[j], noise, opts);
    st.theta_hat[j] = std::move(fit.theta);
    st.all_converged = st.all_converged && fit.converged;
    st.extended += fit.extended;
  }
  return st;
}

}  // namespace creditquote
