#pragma once

#include "creditquote/simulator.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace creditquote::experiments {

struct Verdict {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

Verdict likelihood_derivatives();       // 1
Verdict pricing_against_brute_force();  // 2
Verdict estimation_rate();              // 3
Verdict figure_grid_ordering();         // 4
Verdict decay_rate_effect();            // 5
Verdict quadratic_regret();             // 6
Verdict determinism_and_lookahead();    // 7
Verdict replay_round_trip();            // 8
Verdict diagnostics_checks();           // 9

/// Mean Stage II error per bond-sample count, averaged over seeds.
struct RateCurve {
  std::vector<std::size_t> n;
  std::vector<double> error;
  double slope = 0.0;  ///< least-squares slope of log error on log n
};

RateCurve stage2_error_curve(std::size_t M, std::size_t d, double delta_max, double context_scale,
                             const std::vector<std::size_t>& per_bond, std::size_t seeds);

/// Cross-seed mean of final cumulative regret for each policy.
struct FinalRegret {
  std::vector<PolicyKind> policies;
  std::vector<double> mean;
  std::vector<double> se;  ///< standard error of the mean
  std::vector<std::vector<double>> mean_curve;  ///< mean cumulative regret per round
  double seconds = 0.0;
};

FinalRegret final_regret(const MarketConfig& cfg, const std::vector<PolicyKind>& policies, std::size_t seeds,
                         bool expected = true, std::uint64_t first_seed = 1);

/// Least-squares slope of log y on log t over checkpoints t = lo, 2 lo, ..., hi.
double loglog_slope(const std::vector<double>& cumulative, std::size_t lo, std::size_t hi);

}  // namespace creditquote::experiments
