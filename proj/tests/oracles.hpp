#pragma once

// Independent reference computations used only by the tests.

#include "creditquote/bond.hpp"
#include "creditquote/linalg.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                      double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

/// Adaptive Simpson quadrature.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50);
}

/// Term-by-term discounting in long double.
inline long double price_ld(const creditquote::BondPrimitives& b, long double y) {
  long double v = 0.0L;
  const long double cash = static_cast<long double>(b.coupon()) * b.par();
  for (double t : b.payment_times()) v += cash / std::pow(1.0L + y, static_cast<long double>(t));
  v += static_cast<long double>(b.par()) / std::pow(1.0L + y, static_cast<long double>(b.maturity()));
  return v;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Smallest eigenvalue as the first sign change of det(A - l I), refined by bisection.
inline double smallest_root_of_charpoly(const creditquote::Mat& a) {
  const auto n = a.rows();
  auto det = [&](long double l) {
    Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> m = a.cast<long double>();
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) -= l;
    return m.partialPivLu().determinant();
  };
  long double lo = 0.0L;
  for (Eigen::Index i = 0; i < n; ++i) {
    long double r = 0.0L;
    for (Eigen::Index j = 0; j < n; ++j) if (j != i) r += std::abs(static_cast<long double>(a(i, j)));
    lo = std::min(lo, static_cast<long double>(a(i, i)) - r);
  }
  lo -= 1.0L;
  const long double step = 1e-3L;
  long double f_lo = det(lo);
  long double hi = lo + step;
  while (true) {
    const long double f_hi = det(hi);
    if ((f_lo > 0) != (f_hi > 0) || f_hi == 0) break;
    lo = hi;
    f_lo = f_hi;
    hi += step;
  }
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (lo + hi);
    const long double fm = det(mid);
    if ((fm > 0) == (f_lo > 0)) {
      lo = mid;
      f_lo = fm;
    } else {
      hi = mid;
    }
  }
  return static_cast<double>(0.5L * (lo + hi));
}

}  // namespace oracle
