#include "creditquote/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace creditquote {

namespace {

constexpr double kInvPhi = 0.6180339887498948482;

struct Eval {
  double r;
  double value;
};

// Reward from a precomputed price.
double reward_from_price(const QuoteProblem& q, double r, double v) {
  return (v - q.gamma) * cdf(q.noise, r - q.b);
}

double reward_derivative(const QuoteProblem& q, const PriceDerivs& v, double r) {
  const double e = r - q.b;
  return v.d1 * cdf(q.noise, e) + (v.value - q.gamma) * pdf(q.noise, e);
}

}  // namespace

void QuoteProblem::validate() const {
  noise.validate();
  if (!(r_lo < r_hi) || !(r_lo > -1.0)) throw std::invalid_argument("quote problem: bad yield box");
  if (!(p_cap > gamma)) throw std::invalid_argument("quote problem: p_cap must exceed gamma");
  if (!std::isfinite(b)) throw std::invalid_argument("quote problem: non-finite b");
  if (!(price(primitives, r_hi) < p_cap)) {
    throw std::invalid_argument("quote problem: p_cap below every price in the yield box");
  }
}

PriceGrid PriceGrid::build(const BondPrimitives& b, double p_cap, double r_lo, double r_hi) {
  PriceGrid g;
  g.r_max = r_hi;
  g.r_min = r_lo;
  if (price(b, r_lo) > p_cap) {
    g.r_min = yield_of_price(b, p_cap, 1e-15, r_lo, r_hi);
    g.cap_active = true;
  }
  g.r.resize(kPoints);
  g.v.resize(kPoints);
  const double h = (g.r_max - g.r_min) / (kPoints - 1);
  for (int i = 0; i < kPoints; ++i) {
    g.r[i] = (i == kPoints - 1) ? g.r_max : g.r_min + h * i;
    g.v[i] = price(b, g.r[i]);
  }
  return g;
}

double reward_at_yield(const QuoteProblem& q, double r) {
  return reward_from_price(q, r, price(q.primitives, r));
}

double expected_reward(const QuoteProblem& q, double p) {
  if (p > q.p_cap) throw std::domain_error("quote above the price cap");
  const double r = yield_of_price(q.primitives, p, 1e-15, q.r_lo, q.r_hi);
  return (p - q.gamma) * cdf(q.noise, r - q.b);
}

double foc_residual(const QuoteProblem& q, double r) {
  return reward_derivative(q, price_derivs(q.primitives, r), r);
}

QuoteResult optimal_quote(const QuoteProblem& q, double tol) {
  q.validate();
  return optimal_quote(q, PriceGrid::build(q), tol);
}

QuoteResult optimal_quote(const QuoteProblem& q, const PriceGrid& grid, double tol) {
  const int n = static_cast<int>(grid.r.size());
  if (n < 3) throw std::invalid_argument("optimal_quote: grid too small");

  // (i) coarse grid
  int best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double value = reward_from_price(q, grid.r[i], grid.v[i]);
    if (std::isfinite(value) && value > best_value) {
      best_value = value;
      best = i;
    }
  }
  if (best < 0) throw std::runtime_error("optimal_quote: reward non-finite on the whole grid");

  // (ii) golden section on the neighbouring cells
  const double cell_lo = grid.r[std::max(best - 1, 0)];
  const double cell_hi = grid.r[std::min(best + 1, n - 1)];
  double a = cell_lo;
  double c = cell_hi;
  Eval top{grid.r[best], best_value};
  auto eval = [&](double r) { return Eval{r, reward_at_yield(q, r)}; };
  Eval x1 = eval(c - kInvPhi * (c - a));
  Eval x2 = eval(a + kInvPhi * (c - a));
  const double price_scale = std::max(1.0, std::abs(grid.v[best]));
  for (int it = 0; it < 200; ++it) {
    const double slope = std::abs(price_derivs(q.primitives, 0.5 * (a + c)).d1);
    if ((c - a) * slope <= tol * price_scale || c - a <= 1e-15) break;
    if (x1.value >= x2.value) {
      c = x2.r;
      x2 = x1;
      x1 = eval(c - kInvPhi * (c - a));
    } else {
      a = x1.r;
      x1 = x2;
      x2 = eval(a + kInvPhi * (c - a));
    }
  }
  for (const Eval& e : {x1, x2}) {
    if (e.value > top.value) top = e;
  }

  // With truncated noise F jumps to 1 at r - b = hi, so the maximiser can sit
  // on that kink where Psi does not vanish.
  bool at_corner = false;
  if (q.noise.truncated()) {
    const double corner = q.b + q.noise.hi;
    if (corner >= grid.r_min && corner <= grid.r_max && std::abs(corner - top.r) <= 2.0 * (c - a) + 1e-12) {
      const Eval e = eval(corner);
      if (e.value >= top.value) {
        top = e;
        at_corner = true;
      }
    }
  }

  // (iii) Newton polish on Psi. Golden section only pins a flat maximum down
  // to ~sqrt(eps), so Newton may roam the grid cells around the argmax; a step
  // is kept when |Psi| shrinks and the reward does not drop beyond roundoff.
  const double lo = cell_lo;
  const double hi = cell_hi;
  auto psi_terms = [&](double r) {
    const PriceDerivs v = price_derivs(q.primitives, r);
    const double e = r - q.b;
    const double F = cdf(q.noise, e);
    const double f = pdf(q.noise, e);
    const double psi = v.d1 * F + (v.value - q.gamma) * f;
    const double dpsi = v.d2 * F + 2.0 * v.d1 * f + (v.value - q.gamma) * pdf_derivative(q.noise, e);
    return std::pair{psi, dpsi};
  };
  auto [psi, dpsi] = psi_terms(top.r);
  for (int it = 0; it < 20 && !at_corner; ++it) {
    if (psi == 0.0 || !(dpsi < 0.0)) break;
    const double next = top.r - psi / dpsi;
    if (!(next >= lo && next <= hi) || next == top.r) break;
    const Eval cand = eval(next);
    const auto [psi_next, dpsi_next] = psi_terms(next);
    if (!(std::abs(psi_next) < std::abs(psi))) break;
    if (cand.value < top.value - 1e-13 * std::abs(top.value)) break;
    top = cand;
    psi = psi_next;
    dpsi = dpsi_next;
  }

  QuoteResult out;
  out.r_star = top.r;
  out.p_star = price(q.primitives, top.r);
  out.reward = top.value;
  out.foc_residual = std::abs(foc_residual(q, top.r));
  const double edge = 1e-9 * (grid.r_max - grid.r_min);
  const bool at_min = top.r <= grid.r_min + edge;
  const bool at_max = top.r >= grid.r_max - edge;
  out.cap_binding = grid.cap_active && at_min && foc_residual(q, grid.r_min) < 0.0;
  const double e = top.r - q.b;
  const double support_edge = q.noise.truncated() ? 1e-9 * (q.noise.hi - q.noise.lo) : 0.0;
  const bool in_support = e > q.noise.lo + support_edge && e < q.noise.hi - support_edge;
  out.interior = !at_min && !at_max && !at_corner && in_support;
  return out;
}

}  // namespace creditquote
