#include "creditquote/bond.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace creditquote {

namespace {

void check_yield(double y) {
  if (!(y > -1.0) || !std::isfinite(y)) throw std::domain_error("yield out of domain");
}

}  // namespace

BondPrimitives::BondPrimitives(double coupon, double par, std::vector<double> payment_times,
                               const PrimitiveBox& box)
    : coupon_(coupon), par_(par), times_(std::move(payment_times)) {
  if (times_.empty()) throw std::invalid_argument("bond: payment_times must be nonempty");
  if (!(coupon_ >= box.coupon_lo && coupon_ <= box.coupon_hi)) {
    throw std::invalid_argument("bond: coupon outside the primitive box");
  }
  if (!(par_ > 0.0) || par_ < box.par_lo || par_ > box.par_hi) {
    throw std::invalid_argument("bond: par outside the primitive box");
  }
  if (times_.size() > box.max_payments) throw std::invalid_argument("bond: too many payments");
  double prev = 0.0;
  for (double t : times_) {
    if (!(t > prev) || !std::isfinite(t)) {
      throw std::invalid_argument("bond: payment_times must be positive and strictly increasing");
    }
    prev = t;
  }
  if (prev > box.max_maturity) throw std::invalid_argument("bond: maturity outside the primitive box");
}

BondPrimitives BondPrimitives::regular(double coupon, double par, std::size_t n_payments,
                                       double frequency) {
  std::vector<double> times(n_payments);
  for (std::size_t i = 0; i < n_payments; ++i) times[i] = static_cast<double>(i + 1) / frequency;
  return BondPrimitives(coupon, par, std::move(times));
}

double price(const BondPrimitives& b, double y) {
  check_yield(y);
  const double log_growth = std::log1p(y);
  const double cash = b.coupon() * b.par();
  double v = 0.0;
  for (double t : b.payment_times()) v += cash * std::exp(-t * log_growth);
  v += b.par() * std::exp(-b.maturity() * log_growth);
  return v;
}

PriceDerivs price_derivs(const BondPrimitives& b, double y) {
  check_yield(y);
  const double log_growth = std::log1p(y);
  const double g = 1.0 / (1.0 + y);
  const double cash = b.coupon() * b.par();
  PriceDerivs out{0.0, 0.0, 0.0, 0.0};
  auto add = [&](double amount, double t) {
    const double disc = amount * std::exp(-t * log_growth);
    out.value += disc;
    out.d1 -= t * disc * g;
    out.d2 += t * (t + 1.0) * disc * g * g;
    out.d3 -= t * (t + 1.0) * (t + 2.0) * disc * g * g * g;
  };
  for (double t : b.payment_times()) add(cash, t);
  add(b.par(), b.maturity());
  return out;
}

double yield_of_price(const BondPrimitives& b, double p, double tol, double bracket_lo,
                      double bracket_hi) {
  if (!std::isfinite(p)) throw std::domain_error("price out of range");
  double lo = bracket_lo;
  double hi = bracket_hi;
  const double p_lo = price(b, hi);  // smallest attainable price
  const double p_hi = price(b, lo);
  const double scale = std::max(1.0, std::abs(p));
  if (!(p > p_lo - tol * scale && p <= p_hi + tol * scale)) throw std::domain_error("price out of range");

  // Newton from 5% with a bisection fallback; [lo, hi] always brackets the root.
  double y = std::clamp(0.05, lo, hi);
  for (int iter = 0; iter < 200; ++iter) {
    const PriceDerivs v = price_derivs(b, y);
    const double diff = v.value - p;
    if (std::abs(diff) < tol * scale) return y;
    // price is decreasing: diff > 0 means y is too low.
    if (diff > 0.0) lo = y; else hi = y;
    double next = y - diff / v.d1;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == y || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(y))) {
      return next;
    }
    y = next;
  }
  return y;
}

double curvature_A(const BondPrimitives& b, double r) {
  const PriceDerivs v = price_derivs(b, r);
  if (v.d1 == 0.0) throw std::domain_error("curvature_A: V'(r) = 0");
  return 2.0 * v.d1 - v.value * v.d2 / v.d1;
}

double modified_duration(const BondPrimitives& b, double y) {
  const PriceDerivs v = price_derivs(b, y);
  return -v.d1 / v.value;
}

}  // namespace creditquote
