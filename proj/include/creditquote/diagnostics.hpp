#pragma once

#include "creditquote/bond.hpp"
#include "creditquote/distributions.hpp"
#include "creditquote/linalg.hpp"
#include "creditquote/simulator.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace creditquote {

struct DiagnosticsConfig {
  double r_bar = 0.2;       ///< upper yield of the curvature scan
  double delta = 0.005;     ///< small constant of the noise condition
  int curvature_grid = 2048;
  int constants_grid = 4001;
  double W = 5.0;
  /// Used in place of lambda_min(Sigma) when the true covariance is unknown.
  double lambda_floor = 0.0;
};

struct CurvatureScan {
  std::size_t sets = 0;
  std::size_t violations = 0;  ///< primitive sets with some A(r) > 0 on the grid
  double max_A = 0.0;
  bool passes() const { return violations == 0; }
};

/// A(r) on `points` equally spaced yields in [0, r_bar] for every primitive set.
CurvatureScan scan_curvature(std::span<const BondPrimitives> sets, double r_bar, int points = 2048);

struct NoiseCondition {
  double lhs = 0.0;  ///< exp(-(delta/sigma)^2 / 2) / (sigma sqrt(2 pi))
  double rhs = 0.0;  ///< max over the primitives of -V'(0) / V(0)
  bool passes() const { return lhs > rhs; }
};

NoiseCondition noise_condition(const NoiseSpec& noise, double delta, std::span<const BondPrimitives> sets);

/// Likelihood constants over residuals |x| <= box (clipped to where each log is finite).
struct LikelihoodConstants {
  double box = 0.0;
  double u_F = 0.0;           ///< max_x min{-(log Fbar)', -(log f)'}
  double xi_bound = 0.0;      ///< max_x max{|(log Fbar)'|, |(log f)'|}
  double ell_F = 0.0;         ///< min_x min{-(log Fbar)'', -(log f)''}
  double ell_F_density = 0.0; ///< min_x -(log f)''
  double L_F = 0.0;           ///< x_bar * max_x |(log Fbar)'' + (log f)''|
};

LikelihoodConstants likelihood_constants(const NoiseSpec& noise, double box, double x_bar, int points = 4001);

struct BondEpisodeStats {
  std::size_t count = 0;
  double lambda_min = 0.0;
  bool eigen_event = false;    ///< lambda_min(Sigma_hat^j) >= lambda_min(Sigma^j) / 2
  bool arrival_event = false;  ///< N_j >= tau_k pi_j / 4
};

/// Events of episode k, computed from the data of episode k - 1.
struct EpisodeStats {
  int k = 0;
  std::size_t samples = 0;
  double lambda_min = 0.0;
  bool pooled_event = false;  ///< lambda_min(Sigma_hat) >= lambda_min(Sigma) / 2
  std::vector<BondEpisodeStats> bonds;
};

struct DiagnosticsInput {
  std::span<const RfqRow> rows;
  std::span<const BondPrimitives> primitives;  ///< sets to scan (one per round or per bond)
  NoiseSpec noise;
  std::size_t M = 1;
  std::size_t d = 1;
  double p_cap = 150.0;
  /// lambda_min of the true pooled and per-bond context covariances, when known.
  std::optional<double> lambda_min_sigma;
  std::optional<std::vector<double>> lambda_min_sigma_bond;
  /// Arrival probabilities; the empirical frequencies are used when absent.
  std::optional<std::vector<double>> pi;
  std::vector<double> observed_yields;  ///< realized BCL yields, for y_bar
  std::size_t extended_terms = 0;
};

struct DiagnosticsReport {
  std::vector<EpisodeStats> episodes;
  CurvatureScan curvature;
  NoiseCondition noise;
  LikelihoodConstants constants;
  double x_bar = 0.0;
  double y_bar = 0.0;
  double p_bar = 0.0;
  double r_bar = 0.0;
  double delta = 0.0;
  double lambda_min_sigma = 0.0;
  bool sigma_known = false;
  std::size_t extended_terms = 0;
};

/// Pooled and per-bond episode statistics, k = 2 .. last complete episode.
std::vector<EpisodeStats> episode_events(std::span<const RfqRow> rows, std::size_t M, std::size_t d,
                                         double lambda_min_sigma,
                                         std::span<const double> lambda_min_sigma_bond,
                                         std::span<const double> pi);

DiagnosticsReport check_assumptions(const DiagnosticsInput& in, const DiagnosticsConfig& cfg = {});

}  // namespace creditquote
