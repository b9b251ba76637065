#include "creditquote/diagnostics.hpp"

#include "creditquote/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace creditquote {

namespace {

double min_eig_of_rows(const std::vector<const Vec*>& xs, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  if (xs.empty()) return 0.0;
  Mat S = Mat::Zero(n, n);
  for (const Vec* x : xs) S.noalias() += (*x) * x->transpose();
  S /= static_cast<double>(xs.size());
  return min_eigenvalue(S, 1e-12);
}

}  // namespace

CurvatureScan scan_curvature(std::span<const BondPrimitives> sets, double r_bar, int points) {
  if (points < 2 || !(r_bar > 0.0)) throw std::invalid_argument("scan_curvature: bad grid");
  CurvatureScan out;
  out.max_A = -std::numeric_limits<double>::infinity();
  for (const auto& b : sets) {
    ++out.sets;
    bool bad = false;
    for (int i = 0; i < points; ++i) {
      const double r = r_bar * i / (points - 1);
      const double a = curvature_A(b, r);
      out.max_A = std::max(out.max_A, a);
      bad = bad || a > 0.0;
    }
    out.violations += bad ? 1 : 0;
  }
  if (out.sets == 0) out.max_A = 0.0;
  return out;
}

NoiseCondition noise_condition(const NoiseSpec& noise, double delta, std::span<const BondPrimitives> sets) {
  NoiseCondition out;
  const double z = delta / noise.sigma;
  out.lhs = std::exp(-0.5 * z * z) / (noise.sigma * std::sqrt(2.0 * std::numbers::pi));
  for (const auto& b : sets) out.rhs = std::max(out.rhs, modified_duration(b, 0.0));
  return out;
}

LikelihoodConstants likelihood_constants(const NoiseSpec& noise, double box, double x_bar, int points) {
  if (!(box > 0.0) || points < 2) throw std::invalid_argument("likelihood_constants: bad box");
  LikelihoodConstants out;
  out.box = box;
  double u = -std::numeric_limits<double>::infinity();
  double ell = std::numeric_limits<double>::infinity();
  double ell_f = std::numeric_limits<double>::infinity();
  double curv = 0.0;
  // Survival needs x < hi, the density x in [lo, hi]; stay strictly inside.
  double lo = -box;
  double hi = box;
  if (noise.truncated()) {
    const double pad = 1e-9 * (noise.hi - noise.lo);
    lo = std::max(lo, noise.lo + pad);
    hi = std::min(hi, noise.hi - pad);
    if (!(lo < hi)) throw std::invalid_argument("likelihood_constants: box misses the noise support");
  }
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * i / (points - 1);
    const LogDerivs g = log_derivs(noise, x);
    u = std::max(u, std::min(-g.dlog_survival, -g.dlog_pdf));
    out.xi_bound = std::max({out.xi_bound, std::abs(g.dlog_survival), std::abs(g.dlog_pdf)});
    ell = std::min({ell, -g.d2log_survival, -g.d2log_pdf});
    ell_f = std::min(ell_f, -g.d2log_pdf);
    curv = std::max(curv, std::abs(g.d2log_survival + g.d2log_pdf));
  }
  out.u_F = u;
  out.ell_F = ell;
  out.ell_F_density = ell_f;
  out.L_F = x_bar * curv;
  return out;
}

std::vector<EpisodeStats> episode_events(std::span<const RfqRow> rows, std::size_t M, std::size_t d,
                                         double lambda_min_sigma,
                                         std::span<const double> lambda_min_sigma_bond,
                                         std::span<const double> pi) {
  if (pi.size() != M) throw std::invalid_argument("episode_events: need one arrival weight per bond");
  if (!lambda_min_sigma_bond.empty() && lambda_min_sigma_bond.size() != M) {
    throw std::invalid_argument("episode_events: need one covariance floor per bond");
  }
  std::vector<EpisodeStats> out;
  if (rows.empty()) return out;
  const std::size_t last = rows.back().round;
  // Rows are grouped by the episode their round falls in.
  for (int k = 2;; ++k) {
    const EpisodeInfo prev = episode_index(std::size_t{1} << (k - 2));
    if (prev.end > last) break;
    EpisodeStats ep;
    ep.k = k;
    std::vector<const Vec*> pooled;
    std::vector<std::vector<const Vec*>> per_bond(M);
    for (const auto& row : rows) {
      if (row.round < prev.start || row.round > prev.end) continue;
      if (row.bond_id >= M) throw std::invalid_argument("episode_events: bond id out of range");
      pooled.push_back(&row.x);
      per_bond[row.bond_id].push_back(&row.x);
    }
    ep.samples = pooled.size();
    ep.lambda_min = min_eig_of_rows(pooled, d);
    ep.pooled_event = ep.lambda_min >= 0.5 * lambda_min_sigma;
    const double tau_k = static_cast<double>(std::size_t{1} << (k - 1));
    for (std::size_t j = 0; j < M; ++j) {
      BondEpisodeStats b;
      b.count = per_bond[j].size();
      b.lambda_min = min_eig_of_rows(per_bond[j], d);
      const double floor = lambda_min_sigma_bond.empty() ? lambda_min_sigma : lambda_min_sigma_bond[j];
      b.eigen_event = b.count > 0 && b.lambda_min >= 0.5 * floor;
      b.arrival_event = static_cast<double>(b.count) >= 0.25 * tau_k * pi[j];
      ep.bonds.push_back(b);
    }
    out.push_back(std::move(ep));
  }
  return out;
}

DiagnosticsReport check_assumptions(const DiagnosticsInput& in, const DiagnosticsConfig& cfg) {
  in.noise.validate();
  DiagnosticsReport rep;
  rep.r_bar = cfg.r_bar;
  rep.delta = cfg.delta;
  rep.p_bar = in.p_cap;
  rep.extended_terms = in.extended_terms;
  for (const auto& row : in.rows) {
    if (static_cast<std::size_t>(row.x.size()) != in.d) throw std::invalid_argument("diagnostics: context dimension mismatch");
    rep.x_bar = std::max(rep.x_bar, row.x.norm());
  }
  for (double y : in.observed_yields) rep.y_bar = std::max(rep.y_bar, std::abs(y));

  std::vector<double> pi;
  if (in.pi) {
    pi = *in.pi;
  } else {
    pi.assign(in.M, 0.0);
    for (const auto& row : in.rows) pi.at(row.bond_id) += 1.0;
    for (double& p : pi) p /= std::max<double>(1.0, static_cast<double>(in.rows.size()));
  }
  rep.sigma_known = in.lambda_min_sigma.has_value();
  rep.lambda_min_sigma = in.lambda_min_sigma.value_or(cfg.lambda_floor);
  std::vector<double> per_bond = in.lambda_min_sigma_bond.value_or(std::vector<double>{});
  rep.episodes = episode_events(in.rows, in.M, in.d, rep.lambda_min_sigma, per_bond, pi);

  rep.curvature = scan_curvature(in.primitives, cfg.r_bar, cfg.curvature_grid);
  rep.noise = noise_condition(in.noise, cfg.delta, in.primitives);
  const double box = std::max(rep.y_bar, cfg.r_bar) + cfg.W * std::max(rep.x_bar, 1e-12);
  rep.constants = likelihood_constants(in.noise, box, rep.x_bar, cfg.constants_grid);
  return rep;
}

}  // namespace creditquote
