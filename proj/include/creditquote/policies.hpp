#pragma once

#include "creditquote/estimation.hpp"
#include "creditquote/likelihood.hpp"
#include "creditquote/pricing.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace creditquote {

enum class PolicyKind { TSMT, Pooling, Individual, Oracle };

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);

struct EpisodeInfo {
  int k;
  std::size_t tau;    ///< episode length 2^(k-1)
  std::size_t start;  ///< first round, equal to tau
  std::size_t end;    ///< last round, 2^k - 1
};

/// Episode containing round t >= 1 under lengths 1, 2, 4, ...
EpisodeInfo episode_index(std::size_t t);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::TSMT;
  std::size_t M = 1;
  std::size_t d = 1;
  NoiseSpec noise;
  LambdaConfig lambda;
  SolverOptions solver;
  double W = 5.0;
  double gamma = 0.0;
  double p_cap_factor = 1.5;  ///< p_cap = factor * par
  double r_lo = -0.1;
  double r_hi = 1.0;
  double quote_tol = 1e-10;
};

/// Builds the pricing problem for one RFQ.
QuoteProblem make_quote_problem(const PolicyConfig& cfg, const BondPrimitives& b, double mean_yield);

/// One pricing policy on one path.
///
/// Rounds are numbered from 1. The estimates used during episode k are fitted
/// on the observations of episode k-1 only; the refit happens as soon as an
/// observation or a quote request belongs to a later episode.
class Policy {
 public:
  explicit Policy(PolicyConfig cfg, std::vector<Vec> true_theta = {});

  const PolicyConfig& config() const { return cfg_; }
  PolicyKind kind() const { return cfg_.kind; }
  int episode() const { return k_; }
  std::size_t refits() const { return refits_; }
  const EstimatorState& estimates() const { return state_; }
  /// Likelihood terms evaluated on an extension branch, summed over refits.
  std::size_t extended_total() const { return extended_total_; }

  /// Coefficients used to quote bond j in the current episode (projected).
  Vec theta_for(std::size_t bond) const;

  QuoteResult quote(std::size_t round, std::size_t bond, const Vec& x, const BondPrimitives& b,
                    const PriceGrid* grid = nullptr);

  void observe(const Observation& obs);

 private:
  void advance_to(std::size_t round);
  void refit();
  void check_bond(std::size_t bond) const;

  PolicyConfig cfg_;
  std::vector<Vec> true_theta_;
  int k_ = 1;
  std::size_t last_round_ = 0;
  std::size_t refits_ = 0;
  std::size_t extended_total_ = 0;
  std::vector<Observation> buffer_;
  std::vector<Vec> previous_individual_;  ///< own last fit per bond, warm start for Individual
  EstimatorState state_;
};

}  // namespace creditquote
