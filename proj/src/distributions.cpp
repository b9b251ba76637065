#include "creditquote/distributions.hpp"

#include "creditquote/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace creditquote {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;
constexpr double kTailSwitch = 8.0;

[[noreturn]] void degenerate() { throw std::domain_error("degenerate likelihood point"); }

// log of P(Z > z), with the asymptotic route in the far upper tail.
double log_upper_tail(double z) {
  if (z > kTailSwitch) return -0.5 * z * z - kLogSqrt2Pi + std::log(mills_ratio(z));
  return std::log(normal_survival(z));
}

// phi(z) / P(Z > z) for the untruncated normal.
double upper_hazard(double z) {
  if (z > kTailSwitch) return 1.0 / mills_ratio(z);
  return normal_pdf(z) / normal_survival(z);
}

}  // namespace

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_survival(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_mass(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a >= 0.0) return normal_survival(a) - normal_survival(b);
  if (b <= 0.0) return normal_cdf(b) - normal_cdf(a);
  return 1.0 - normal_cdf(a) - normal_survival(b);
}

double mills_ratio(double z) {
  if (z < kTailSwitch) return normal_survival(z) / normal_pdf(z);
  // Laplace continued fraction, evaluated backward; converges fast for z >= 8.
  double t = z;
  for (int k = 60; k >= 1; --k) t = z + k / t;
  return 1.0 / t;
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step; the residual is formed on the tail closest to p.
  const double e = (x < 0.0) ? normal_cdf(x) - p : (1.0 - p) - normal_survival(x);
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

NoiseSpec NoiseSpec::normal(double mu, double sigma) {
  NoiseSpec s;
  s.kind = NoiseKind::Normal;
  s.mu = mu;
  s.sigma = sigma;
  s.validate();
  return s;
}

NoiseSpec NoiseSpec::truncated_normal(double mu, double sigma, double lo, double hi) {
  NoiseSpec s;
  s.kind = NoiseKind::TruncatedNormal;
  s.mu = mu;
  s.sigma = sigma;
  s.lo = lo;
  s.hi = hi;
  s.validate();
  return s;
}

void NoiseSpec::validate() const {
  if (!std::isfinite(mu)) throw std::invalid_argument("noise: mu must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("noise: sigma must be > 0");
  if (kind == NoiseKind::TruncatedNormal) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("noise: truncation bounds must be finite");
    if (!(lo < hi)) throw std::invalid_argument("noise: support_lo must be < support_hi");
    if (!(mass() > 0.0)) throw std::invalid_argument("noise: truncation interval carries no mass");
  }
}

double NoiseSpec::mass() const {
  if (kind == NoiseKind::Normal) return 1.0;
  return normal_mass(alpha(), beta());
}

double NoiseSpec::mean() const {
  if (kind == NoiseKind::Normal) return mu;
  return mu + sigma * (normal_pdf(alpha()) - normal_pdf(beta())) / mass();
}

std::string NoiseSpec::describe() const {
  std::ostringstream os;
  if (kind == NoiseKind::Normal) {
    os << "Normal(" << mu << ", " << sigma << ")";
  } else {
    os << "TruncatedNormal(" << mu << ", " << sigma << ", [" << lo << ", " << hi << "])";
  }
  return os.str();
}

double pdf(const NoiseSpec& spec, double x) {
  if (spec.truncated() && (x < spec.lo || x > spec.hi)) return 0.0;
  const double z = (x - spec.mu) / spec.sigma;
  return normal_pdf(z) / (spec.sigma * spec.mass());
}

double cdf(const NoiseSpec& spec, double x) {
  const double z = (x - spec.mu) / spec.sigma;
  if (!spec.truncated()) return normal_cdf(z);
  if (x <= spec.lo) return 0.0;
  if (x >= spec.hi) return 1.0;
  return std::min(1.0, normal_mass(spec.alpha(), z) / spec.mass());
}

double survival(const NoiseSpec& spec, double x) {
  const double z = (x - spec.mu) / spec.sigma;
  if (!spec.truncated()) return normal_survival(z);
  if (x <= spec.lo) return 1.0;
  if (x >= spec.hi) return 0.0;
  return std::min(1.0, normal_mass(z, spec.beta()) / spec.mass());
}

LogTerms log_cdf_terms(const NoiseSpec& spec, double x) {
  const double s = spec.sigma;
  const double z = (x - spec.mu) / s;
  double value, g;
  if (!spec.truncated()) {
    // F(x) = P(Z > -z)
    value = log_upper_tail(-z);
    g = upper_hazard(-z);
  } else {
    if (!(x > spec.lo)) degenerate();
    if (x >= spec.hi) return {0.0, 0.0, 0.0};
    const double lower = normal_mass(spec.alpha(), z);
    if (!(lower > 0.0)) degenerate();
    value = std::log(lower / spec.mass());
    g = normal_pdf(z) / lower;
  }
  return {value, g / s, (-z * g - g * g) / (s * s)};
}

LogTerms log_survival_terms(const NoiseSpec& spec, double x) {
  const double s = spec.sigma;
  const double z = (x - spec.mu) / s;
  double value, m;
  if (!spec.truncated()) {
    value = log_upper_tail(z);
    m = upper_hazard(z);
  } else {
    if (!(x < spec.hi)) degenerate();
    if (x <= spec.lo) return {0.0, 0.0, 0.0};
    const double upper = normal_mass(z, spec.beta());
    if (!(upper > 0.0)) degenerate();
    value = std::log(upper / spec.mass());
    m = normal_pdf(z) / upper;
  }
  return {value, -m / s, (z * m - m * m) / (s * s)};
}

LogTerms log_pdf_terms(const NoiseSpec& spec, double x) {
  if (spec.truncated() && (x < spec.lo || x > spec.hi)) degenerate();
  const double s = spec.sigma;
  const double z = (x - spec.mu) / s;
  return {-0.5 * z * z - kLogSqrt2Pi - std::log(s * spec.mass()), -z / s, -1.0 / (s * s)};
}

LogDerivs log_derivs(const NoiseSpec& spec, double x) {
  const LogTerms lf = log_cdf_terms(spec, x);
  const LogTerms ls = log_survival_terms(spec, x);
  const LogTerms lp = log_pdf_terms(spec, x);
  return {lf.d1, ls.d1, lp.d1, lf.d2, ls.d2, lp.d2};
}

double reversed_hazard(const NoiseSpec& spec, double x) {
  if (spec.truncated() && !(x > spec.lo)) throw std::domain_error("reversed_hazard: F(x) = 0");
  return log_cdf_terms(spec, x).d1;
}

double pdf_derivative(const NoiseSpec& spec, double x) {
  const double z = (x - spec.mu) / spec.sigma;
  return -z / spec.sigma * pdf(spec, x);
}

double sample(const NoiseSpec& spec, Rng& rng) {
  if (!spec.truncated()) return spec.mu + spec.sigma * rng.normal();
  // Inverse CDF on whichever tail keeps the mass difference well conditioned.
  const double a = spec.alpha();
  const double b = spec.beta();
  const double u = rng.uniform();
  double z;
  if (a >= 0.0) {
    const double sa = normal_survival(a);
    const double sb = normal_survival(b);
    z = -inverse_normal_cdf(sa - u * (sa - sb));
  } else {
    const double fa = normal_cdf(a);
    const double fb = normal_cdf(b);
    z = inverse_normal_cdf(fa + u * (fb - fa));
  }
  z = std::clamp(z, a, b);
  return spec.mu + spec.sigma * z;
}

}  // namespace creditquote
