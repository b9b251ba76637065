#pragma once

#include "creditquote/bond.hpp"
#include "creditquote/distributions.hpp"

#include <vector>

namespace creditquote {

/// One pricing decision: maximise (p - gamma) F(V^-1(p) - b) subject to p <= p_cap.
struct QuoteProblem {
  BondPrimitives primitives;
  NoiseSpec noise;
  double b = 0.0;      ///< predicted mean BCL yield <theta, x>
  double gamma = 0.0;  ///< cost of a lost quote
  double p_cap = 150.0;
  double r_lo = -0.1;
  double r_hi = 1.0;

  void validate() const;
};

/// Bond prices on the coarse yield grid. Depends only on the primitives, the
/// yield box and the cap, so one grid serves every policy quoting the same RFQ.
struct PriceGrid {
  static constexpr int kPoints = 512;

  double r_min = 0.0;  ///< max(r_lo, V^-1(p_cap))
  double r_max = 0.0;
  bool cap_active = false;  ///< r_min comes from the cap, not the box
  std::vector<double> r;
  std::vector<double> v;

  static PriceGrid build(const BondPrimitives& b, double p_cap, double r_lo, double r_hi);
  static PriceGrid build(const QuoteProblem& q) { return build(q.primitives, q.p_cap, q.r_lo, q.r_hi); }
};

/// Expected reward as a function of the quote yield r (price V(r)).
double reward_at_yield(const QuoteProblem& q, double r);

/// (p - gamma) F(V^-1(p) - b); p must lie in the image of the yield box.
double expected_reward(const QuoteProblem& q, double p);

/// Psi(r) = V'(r) F(r - b) + (V(r) - gamma) f(r - b), the r-derivative of the reward.
double foc_residual(const QuoteProblem& q, double r);

struct QuoteResult {
  double p_star;
  double r_star;
  double reward;
  double foc_residual;  ///< |Psi(r_star)|
  bool cap_binding;
  bool interior;  ///< cap slack, r_star off the box edges, r_star - b strictly inside the noise support
};

/// Grid of 512 yields, golden-section refinement of the best cell to relative
/// price tolerance `tol`, then a safeguarded Newton polish on Psi.
QuoteResult optimal_quote(const QuoteProblem& q, double tol = 1e-10);
QuoteResult optimal_quote(const QuoteProblem& q, const PriceGrid& grid, double tol = 1e-10);

}  // namespace creditquote
