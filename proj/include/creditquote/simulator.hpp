#pragma once

#include "creditquote/policies.hpp"
#include "creditquote/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace creditquote {

struct ArrivalSpec {
  enum class Kind { Uniform, ExpDecay, PolyDecay, Weights };
  Kind kind = Kind::Uniform;
  double beta = 1.0;            ///< ExpDecay rate
  double alpha = 0.0;           ///< PolyDecay exponent
  std::vector<double> weights;  ///< raw weights, normalised on use
};

/// Normalised arrival probabilities pi_1..pi_M.
std::vector<double> arrival_weights(const ArrivalSpec& spec, std::size_t M);

struct MarketConfig {
  std::size_t M = 2;
  std::size_t d = 30;
  double delta_max = 0.1;
  std::size_t T = 4096;
  NoiseSpec noise = NoiseSpec::truncated_normal(0.05, 0.05, 0.02, 0.11);
  double gamma = 0.0;
  double W = 5.0;
  double p_cap_factor = 1.5;
  double par = 100.0;
  /// Contexts are context_scale * N(0, I_d); see README for why this is not 1.
  double context_scale = 0.01;
  ArrivalSpec arrival;
  bool fixed_primitives = false;  ///< one primitive set per bond instead of a fresh draw per RFQ
  int payments_lo = 10;
  int payments_hi = 50;
  double coupon_lo = 0.02;
  double coupon_hi = 0.1;
  double frequency = 2.0;
  double r_lo = -0.1;
  double r_hi = 1.0;
  LambdaConfig lambda;
  SolverOptions solver;

  void validate() const;
};

struct MarketModel {
  MarketConfig cfg;
  Vec theta_star;
  std::vector<Vec> delta;  ///< normalised deviations, |delta_j| = delta_max
  std::vector<Vec> theta;  ///< theta_star + delta_j
  std::vector<double> pi;
  std::vector<BondPrimitives> fixed_primitives;  ///< filled when cfg.fixed_primitives
};

/// Draws from N(0, 0.2 I + 1 1^T).
Vec draw_raw_deviation(std::size_t d, Rng& rng);

MarketModel generate_model(const MarketConfig& cfg, Rng& rng);

PolicyConfig policy_config(const MarketConfig& cfg, PolicyKind kind);

/// One bond-primitive draw from the configured generator box.
BondPrimitives draw_primitives(const MarketConfig& cfg, Rng& rng);

struct RoundRecord {
  std::size_t t;
  int episode;
  std::size_t bond_id;
  PolicyKind policy;
  double quote;
  double bcl_price;
  bool win;
  double reward;
  double oracle_reward;
  double realized_regret;
  double expected_regret;
  double theta_err_l2;
};

/// Cumulative regret traces, indexed [policy][t - 1].
struct RegretLedger {
  std::vector<PolicyKind> policies;
  std::vector<std::vector<double>> realized;
  std::vector<std::vector<double>> expected;
  std::vector<std::vector<double>> theta_err;  ///< per-round, not cumulative

  std::size_t index_of(PolicyKind kind) const;
  double final_realized(PolicyKind kind) const { return realized[index_of(kind)].back(); }
  double final_expected(PolicyKind kind) const { return expected[index_of(kind)].back(); }
};

/// What an RFQ log stores for one round.
struct RfqRow {
  std::size_t round;
  std::size_t bond_id;
  double price;
  int trade_flag;
  Vec x;
};

struct PathOptions {
  bool keep_records = true;
  bool export_log = false;
};

struct PathResult {
  std::vector<RoundRecord> records;
  RegretLedger ledger;
  std::vector<std::size_t> extended_terms;  ///< per policy, summed over refits
  std::vector<RfqRow> log;
  std::vector<BondPrimitives> round_primitives;  ///< kept with export_log
};

/// Runs every policy on the same stream of RFQs. Arrivals, contexts,
/// primitives and noise come from separate sub-streams of `rng`, so the draws
/// do not depend on which policies are run.
PathResult run_path(const MarketModel& model, std::span<const PolicyKind> policies, const Rng& rng,
                    const PathOptions& opts = {});

struct SeedRun {
  MarketModel model;
  PathResult path;
};

/// The model is drawn from sub-stream 1 of Rng(seed); the path uses the rest.
SeedRun run_seed(const MarketConfig& cfg, std::span<const PolicyKind> policies, std::uint64_t seed,
                 const PathOptions& opts = {});

/// Calls body(i) for i in [0, n) on up to `threads` workers; threads <= 1 runs inline.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace creditquote
