#include "creditquote/policies.hpp"

#include <bit>
#include <cctype>
#include <stdexcept>
#include <string>

namespace creditquote {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::TSMT: return "tsmt";
    case PolicyKind::Pooling: return "pooling";
    case PolicyKind::Individual: return "individual";
    case PolicyKind::Oracle: return "oracle";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view raw) {
  // Case-insensitive; configs often use the display names.
  std::string name(raw);
  for (char& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (name == "tsmt") return PolicyKind::TSMT;
  if (name == "pooling") return PolicyKind::Pooling;
  if (name == "individual") return PolicyKind::Individual;
  if (name == "oracle") return PolicyKind::Oracle;
  throw std::invalid_argument("unknown policy '" + std::string(raw) + "'");
}

EpisodeInfo episode_index(std::size_t t) {
  if (t == 0) throw std::invalid_argument("episode_index: rounds start at 1");
  const int k = static_cast<int>(std::bit_width(t));
  const std::size_t tau = std::size_t{1} << (k - 1);
  return {k, tau, tau, 2 * tau - 1};
}

QuoteProblem make_quote_problem(const PolicyConfig& cfg, const BondPrimitives& b, double mean_yield) {
  return QuoteProblem{b, cfg.noise, mean_yield, cfg.gamma, cfg.p_cap_factor * b.par(), cfg.r_lo, cfg.r_hi};
}

Policy::Policy(PolicyConfig cfg, std::vector<Vec> true_theta)
    : cfg_(std::move(cfg)), true_theta_(std::move(true_theta)) {
  if (cfg_.M == 0 || cfg_.d == 0) throw std::invalid_argument("policy: M and d must be positive");
  if (!(cfg_.W > 0.0)) throw std::invalid_argument("policy: W must be > 0");
  cfg_.noise.validate();
  if (cfg_.kind == PolicyKind::Oracle) {
    if (true_theta_.size() != cfg_.M) throw std::invalid_argument("oracle policy needs the true coefficients of every bond");
    for (const auto& t : true_theta_) {
      if (static_cast<std::size_t>(t.size()) != cfg_.d) throw std::invalid_argument("oracle policy: dimension mismatch");
    }
  }
  state_.episode = 1;
  state_.W = cfg_.W;
  state_.theta_bar = Vec::Zero(static_cast<Eigen::Index>(cfg_.d));
  state_.theta_hat.assign(cfg_.M, state_.theta_bar);
  state_.counts.assign(cfg_.M, 0);
  state_.lambdas.assign(cfg_.M, 0.0);
}

void Policy::check_bond(std::size_t bond) const {
  if (bond >= cfg_.M) throw std::out_of_range("unknown bond id " + std::to_string(bond));
}

Vec Policy::theta_for(std::size_t bond) const {
  check_bond(bond);
  if (cfg_.kind == PolicyKind::Oracle) return true_theta_[bond];
  if (cfg_.kind == PolicyKind::Pooling) return project_ball(state_.theta_bar, cfg_.W);
  return project_ball(state_.theta_hat[bond], cfg_.W);
}

QuoteResult Policy::quote(std::size_t round, std::size_t bond, const Vec& x, const BondPrimitives& b,
                          const PriceGrid* grid) {
  check_bond(bond);
  if (static_cast<std::size_t>(x.size()) != cfg_.d) throw std::invalid_argument("quote: context dimension mismatch");
  if (round <= last_round_) throw std::invalid_argument("quote: round index not increasing");
  advance_to(round);
  const QuoteProblem q = make_quote_problem(cfg_, b, theta_for(bond).dot(x));
  if (grid) return optimal_quote(q, *grid, cfg_.quote_tol);
  q.validate();
  return optimal_quote(q, cfg_.quote_tol);
}

void Policy::observe(const Observation& obs) {
  check_bond(obs.bond_id);
  if (obs.round <= last_round_) throw std::invalid_argument("observe: out-of-order round index");
  advance_to(obs.round);
  last_round_ = obs.round;
  if (cfg_.kind != PolicyKind::Oracle) buffer_.push_back(obs);
}

void Policy::advance_to(std::size_t round) {
  while (episode_index(round).k > k_) {
    refit();
    ++k_;
    state_.episode = k_;
  }
}

void Policy::refit() {
  if (cfg_.kind == PolicyKind::Oracle) return;
  ++refits_;
  if (buffer_.empty()) return;  // nothing new: keep the previous estimates
  const std::span<const Observation> data(buffer_);
  switch (cfg_.kind) {
    case PolicyKind::TSMT: {
      EstimatorState next = two_stage_fit(data, cfg_.M, cfg_.d, cfg_.noise, cfg_.lambda, cfg_.W,
                                          state_.theta_bar, cfg_.solver);
      state_ = std::move(next);
      break;
    }
    case PolicyKind::Pooling: {
      const FitResult fit = stage1_fit(ObservationBatch::from(data), cfg_.noise, state_.theta_bar, cfg_.solver);
      state_.theta_bar = fit.theta;
      state_.theta_hat.assign(cfg_.M, fit.theta);
      state_.counts.assign(cfg_.M, 0);
      for (const auto& o : buffer_) ++state_.counts[o.bond_id];
      state_.all_converged = fit.converged;
      state_.extended = fit.extended;
      break;
    }
    case PolicyKind::Individual: {
      const FitResult pooled = stage1_fit(ObservationBatch::from(data), cfg_.noise, state_.theta_bar, cfg_.solver);
      state_.theta_bar = pooled.theta;
      state_.theta_hat.assign(cfg_.M, pooled.theta);
      state_.counts.assign(cfg_.M, 0);
      for (const auto& o : buffer_) ++state_.counts[o.bond_id];
      state_.all_converged = pooled.converged;
      state_.extended = pooled.extended;
      if (previous_individual_.size() != cfg_.M) previous_individual_.assign(cfg_.M, Vec::Zero(static_cast<Eigen::Index>(cfg_.d)));
      for (std::size_t j = 0; j < cfg_.M; ++j) {
        if (state_.counts[j] == 0) continue;
        const FitResult fit = stage1_fit(ObservationBatch::from(data, j), cfg_.noise, previous_individual_[j], cfg_.solver);
        state_.theta_hat[j] = fit.theta;
        previous_individual_[j] = fit.theta;
        state_.all_converged = state_.all_converged && fit.converged;
        state_.extended += fit.extended;
      }
      break;
    }
    case PolicyKind::Oracle:
      break;
  }
  state_.W = cfg_.W;
  state_.episode = k_ + 1;
  extended_total_ += state_.extended;
  buffer_.clear();
}

}  // namespace creditquote
