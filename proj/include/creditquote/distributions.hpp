#pragma once

#include <limits>
#include <string>

namespace creditquote {

class Rng;

// Standard normal primitives.
double normal_pdf(double z);
double normal_cdf(double z);
double normal_survival(double z);
/// P(a < Z < b) for a standard normal Z, accurate in both tails.
double normal_mass(double a, double b);
/// Mills ratio (1 - Phi(z)) / phi(z).
double mills_ratio(double z);
/// Phi^{-1}(p) for p in (0, 1); rational start refined by one Halley step.
double inverse_normal_cdf(double p);

enum class NoiseKind { Normal, TruncatedNormal };

/// Yield-noise law. For Normal the support bounds are +-infinity.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Normal;
  double mu = 0.0;
  double sigma = 1.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  static NoiseSpec normal(double mu, double sigma);
  static NoiseSpec truncated_normal(double mu, double sigma, double lo, double hi);

  /// Throws std::invalid_argument when the parameters are inconsistent.
  void validate() const;
  bool truncated() const { return kind == NoiseKind::TruncatedNormal; }
  double alpha() const { return (lo - mu) / sigma; }
  double beta() const { return (hi - mu) / sigma; }
  /// Probability mass of the untruncated normal on [lo, hi].
  double mass() const;
  double mean() const;
  std::string describe() const;
};

double pdf(const NoiseSpec& spec, double x);
double cdf(const NoiseSpec& spec, double x);
double survival(const NoiseSpec& spec, double x);

/// Value and first two derivatives of a log quantity at one point.
struct LogTerms {
  double value;
  double d1;
  double d2;
};

// Each throws std::domain_error("degenerate likelihood point") where the log
// is -infinity (outside the support, or where the mass vanishes).
LogTerms log_cdf_terms(const NoiseSpec& spec, double x);
LogTerms log_survival_terms(const NoiseSpec& spec, double x);
LogTerms log_pdf_terms(const NoiseSpec& spec, double x);

struct LogDerivs {
  double dlog_cdf;
  double dlog_survival;
  double dlog_pdf;
  double d2log_cdf;
  double d2log_survival;
  double d2log_pdf;
};

LogDerivs log_derivs(const NoiseSpec& spec, double x);

/// h(x) = f(x) / F(x).
double reversed_hazard(const NoiseSpec& spec, double x);

/// Derivative of the density, f'(x); zero outside the support.
double pdf_derivative(const NoiseSpec& spec, double x);

double sample(const NoiseSpec& spec, Rng& rng);

}  // namespace creditquote
