#pragma once

#include "creditquote/bond.hpp"
#include "creditquote/distributions.hpp"
#include "creditquote/likelihood.hpp"
#include "creditquote/rng.hpp"

#include <vector>

namespace fixture {

using namespace creditquote;

inline Vec gaussian(Rng& rng, std::size_t d, double scale) {
  Vec v(static_cast<Eigen::Index>(d));
  for (auto& e : v) e = scale * rng.normal();
  return v;
}

inline Vec unit_sphere(Rng& rng, std::size_t d) {
  const Vec v = gaussian(rng, d, 1.0);
  return v / v.norm();
}

inline BondPrimitives random_bond(Rng& rng) {
  return BondPrimitives::regular(rng.uniform(0.02, 0.1), 100.0, static_cast<std::size_t>(rng.uniform_int(10, 50)));
}

/// Censored RFQ outcomes for one bond: quotes sit around the predicted BCL yield
/// so roughly half of them win.
inline std::vector<Observation> rfq_stream(Rng& rng, const Vec& theta, std::size_t bond, std::size_t n,
                                           const NoiseSpec& noise, double x_scale, double spread = 0.03,
                                           std::size_t first_round = 1) {
  std::vector<Observation> out;
  for (std::size_t i = 0; i < n; ++i) {
    const BondPrimitives b = random_bond(rng);
    const Vec x = gaussian(rng, static_cast<std::size_t>(theta.size()), x_scale);
    const double mean = theta.dot(x);
    const double y = mean + sample(noise, rng);
    const double q = price(b, mean + noise.mean() + rng.uniform(-spread, spread));
    out.push_back(Observation::from_trade(first_round + i, bond, x, q, yield_of_price(b, q), price(b, y), b));
  }
  return out;
}

}  // namespace fixture
