#pragma once

#include <cstddef>
#include <vector>

namespace creditquote {

/// Compact box of admissible bond primitives, checked at construction.
struct PrimitiveBox {
  double coupon_lo = 0.0;
  double coupon_hi = 1.0;
  double par_lo = 1e-6;
  double par_hi = 1e9;
  double max_maturity = 100.0;
  std::size_t max_payments = 1000;
};

/// Coupon rate, par value and remaining payment times (years).
class BondPrimitives {
 public:
  BondPrimitives(double coupon, double par, std::vector<double> payment_times,
                 const PrimitiveBox& box = PrimitiveBox{});

  /// n payments every 1/frequency years, the first one period from now.
  static BondPrimitives regular(double coupon, double par, std::size_t n_payments,
                                double frequency = 2.0);

  double coupon() const { return coupon_; }
  double par() const { return par_; }
  const std::vector<double>& payment_times() const { return times_; }
  double maturity() const { return times_.back(); }

 private:
  double coupon_;
  double par_;
  std::vector<double> times_;
};

/// Default bracket for price inversion.
inline constexpr double kYieldBracketLo = -0.5;
inline constexpr double kYieldBracketHi = 2.0;

/// V(y) = sum_i c P (1+y)^-t_i + P (1+y)^-t_n.
double price(const BondPrimitives& b, double y);

struct PriceDerivs {
  double value;
  double d1;
  double d2;
  double d3;
};

/// V and its first three yield derivatives in one pass.
PriceDerivs price_derivs(const BondPrimitives& b, double y);

/// Inverse of price() on [bracket_lo, bracket_hi] by safeguarded Newton.
double yield_of_price(const BondPrimitives& b, double p, double tol = 1e-14,
                      double bracket_lo = kYieldBracketLo, double bracket_hi = kYieldBracketHi);

/// A(r) = 2 V'(r) - V(r) V''(r) / V'(r).
double curvature_A(const BondPrimitives& b, double r);

/// -V'(y) / V(y).
double modified_duration(const BondPrimitives& b, double y);

}  // namespace creditquote
