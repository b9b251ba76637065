#pragma once

#include "creditquote/bond.hpp"
#include "creditquote/distributions.hpp"
#include "creditquote/linalg.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace creditquote {

/// One RFQ outcome as seen by the learner.
///
/// `anchor()` is the yield the residual is measured from: the revealed BCL
/// yield when the quote won, the (cached) quote yield V^-1(p) when it lost.
struct Observation {
  std::size_t round = 0;
  std::size_t bond_id = 0;
  Vec x;
  double quote = 0.0;
  bool won = false;
  double observed_yield = std::numeric_limits<double>::quiet_NaN();
  double quote_yield = std::numeric_limits<double>::quiet_NaN();

  /// Builds an observation from the quote and the BCL price; the BCL yield is
  /// recovered by inverting the price, exactly as a desk would.
  static Observation from_trade(std::size_t round, std::size_t bond_id, Vec x, double quote,
                                double quote_yield, double bcl_price, const BondPrimitives& bond);
  /// Builds an observation from a known outcome; the quote yield is inverted here.
  static Observation from_outcome(std::size_t round, std::size_t bond_id, Vec x, double quote,
                                  bool won, double observed_yield, const BondPrimitives& bond);

  double anchor() const { return won ? observed_yield : quote_yield; }
};

/// Width of the band below the upper support edge where log Fbar is replaced
/// by its second-order Taylor expansion (truncated noise only).
double survival_extension_margin(const NoiseSpec& noise);

/// log Fbar(r) for a lost quote; finite and C^2 for every r.
LogTerms censored_terms(const NoiseSpec& noise, double r, bool* extended = nullptr);
/// log f(r) for a won quote; outside a truncated support the Gaussian shape continues.
LogTerms uncensored_terms(const NoiseSpec& noise, double r, bool* extended = nullptr);

double loglik(const Vec& theta, const Observation& obs, const NoiseSpec& noise);
/// Gradient of the log-likelihood (ascent direction).
Vec loglik_grad(const Vec& theta, const Observation& obs, const NoiseSpec& noise);
/// Hessian of the log-likelihood.
Mat loglik_hessian(const Vec& theta, const Observation& obs, const NoiseSpec& noise);

/// Observations packed for vectorised evaluation.
struct ObservationBatch {
  Mat X;
  Vec anchor;
  std::vector<char> won;

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }

  /// Keeps observations of `bond` only when given; order is preserved.
  static ObservationBatch from(std::span<const Observation> obs,
                               std::optional<std::size_t> bond = std::nullopt);
};

/// Negative mean log-likelihood with gradient and Hessian.
struct Objective {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
  std::size_t extended = 0;  ///< terms evaluated on an extension branch
};

Objective batch_objective(const Vec& theta, const ObservationBatch& batch, const NoiseSpec& noise,
                          bool with_hessian = true);

Objective batch_objective(const Vec& theta, std::span<const Observation> obs,
                          const NoiseSpec& noise, std::optional<std::size_t> bond = std::nullopt);

}  // namespace creditquote
