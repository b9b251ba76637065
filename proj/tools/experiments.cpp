#include "experiments.hpp"

#include "app.hpp"

#include "creditquote/diagnostics.hpp"
#include "creditquote/estimation.hpp"
#include "creditquote/likelihood.hpp"
#include "creditquote/pricing.hpp"
#include "creditquote/replay.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace creditquote::experiments {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

Vec gaussian(Rng& rng, std::size_t d, double scale) {
  Vec v(static_cast<Eigen::Index>(d));
  for (auto& e : v) e = scale * rng.normal();
  return v;
}

Vec unit_vector(Rng& rng, std::size_t d) {
  const Vec v = gaussian(rng, d, 1.0);
  return v / v.norm();
}

BondPrimitives box_bond(Rng& rng) {
  return draw_primitives(MarketConfig{}, rng);
}

// Quote yields spread around the predicted BCL yield so about half the rows win.
Observation synthetic_observation(Rng& rng, std::size_t round, std::size_t bond, const Vec& theta, const Vec& x,
                                  const NoiseSpec& noise, double spread = 0.03) {
  const BondPrimitives b = box_bond(rng);
  const double mean = theta.dot(x);
  const double y = mean + sample(noise, rng);
  const double q = price(b, mean + noise.mean() + rng.uniform(-spread, spread));
  return Observation::from_trade(round, bond, x, q, yield_of_price(b, q), price(b, y), b);
}

// ---- independent pricing oracle ---------------------------------------------

// Closed-form price of a regular bond: cP sum g^i + P g^n with g = (1 + r)^(-1/f).
long double closed_form_price(const BondPrimitives& b, long double r, long double freq) {
  const long double g = std::exp(-std::log1p(r) / freq);
  const auto n = static_cast<long double>(b.payment_times().size());
  const long double gn = std::pow(g, n);
  const long double annuity = (std::abs(1.0L - g) < 1e-15L) ? n : g * (1.0L - gn) / (1.0L - g);
  return static_cast<long double>(b.coupon()) * b.par() * annuity + b.par() * gn;
}

long double phi_cdf(long double z) { return 0.5L * std::erfc(-z / std::sqrt(2.0L)); }

long double noise_cdf(const NoiseSpec& n, long double x) {
  const long double z = (x - n.mu) / n.sigma;
  if (!n.truncated()) return phi_cdf(z);
  if (x <= n.lo) return 0.0L;
  if (x >= n.hi) return 1.0L;
  const long double a = phi_cdf((n.lo - n.mu) / static_cast<long double>(n.sigma));
  const long double b = phi_cdf((n.hi - n.mu) / static_cast<long double>(n.sigma));
  return (phi_cdf(z) - a) / (b - a);
}

struct BruteResult {
  double p;
  double reward;
};

// Coarse pass in double (one exp per point, erfc for the noise), refined in long double.
double closed_form_price_fast(double cP, double P, double n, double r, double freq) {
  const double lg = -std::log1p(r) / freq;
  const double g = std::exp(lg);
  const double gn = std::exp(n * lg);
  const double annuity = (std::abs(1.0 - g) < 1e-12) ? n : g * (1.0 - gn) / (1.0 - g);
  return cP * annuity + P * gn;
}

BruteResult brute_force_quote(const QuoteProblem& q, long double freq) {
  auto value = [&](long double r) {
    return (closed_form_price(q.primitives, r, freq) - q.gamma) * noise_cdf(q.noise, r - q.b);
  };
  // Lowest admissible yield: the box edge or where the price meets the cap.
  long double lo = q.r_lo;
  if (closed_form_price(q.primitives, lo, freq) > q.p_cap) {
    long double a = q.r_lo, b = q.r_hi;
    for (int i = 0; i < 200; ++i) {
      const long double m = 0.5L * (a + b);
      (closed_form_price(q.primitives, m, freq) > q.p_cap ? a : b) = m;
    }
    lo = b;
  }
  const long double hi = q.r_hi;
  const double cP = q.primitives.coupon() * q.primitives.par();
  const double P = q.primitives.par();
  const auto n = static_cast<double>(q.primitives.payment_times().size());
  const NoiseSpec& ns = q.noise;
  const double cdf_lo = ns.truncated() ? 0.5 * std::erfc(-(ns.lo - ns.mu) / (ns.sigma * std::sqrt(2.0))) : 0.0;
  const double cdf_hi = ns.truncated() ? 0.5 * std::erfc(-(ns.hi - ns.mu) / (ns.sigma * std::sqrt(2.0))) : 1.0;
  auto fast = [&](double r) {
    const double e = r - q.b;
    double F;
    if (ns.truncated() && e <= ns.lo) F = 0.0;
    else if (ns.truncated() && e >= ns.hi) F = 1.0;
    else F = (0.5 * std::erfc(-(e - ns.mu) / (ns.sigma * std::sqrt(2.0))) - cdf_lo) / (cdf_hi - cdf_lo);
    return (closed_form_price_fast(cP, P, n, r, static_cast<double>(freq)) - q.gamma) * F;
  };
  constexpr int kCoarse = 1000000;
  constexpr int kFine = 10000;
  const double step = static_cast<double>((hi - lo) / (kCoarse - 1));
  int best = 0;
  double best_fast = -1.0;
  for (int i = 0; i < kCoarse; ++i) {
    const double v = fast(static_cast<double>(lo) + i * step);
    if (v > best_fast) {
      best_fast = v;
      best = i;
    }
  }
  const long double a = std::max(lo, lo + (best - 1) * static_cast<long double>(step));
  const long double b = std::min(hi, lo + (best + 1) * static_cast<long double>(step));
  long double best_r = lo + best * static_cast<long double>(step);
  long double best_v = value(best_r);
  for (int i = 0; i < kFine; ++i) {
    const long double r = a + (b - a) * i / (kFine - 1);
    const long double v = value(r);
    if (v > best_v) {
      best_v = v;
      best_r = r;
    }
  }
  return {static_cast<double>(closed_form_price(q.primitives, best_r, freq)), static_cast<double>(best_v)};
}

}  // namespace

double loglog_slope(const std::vector<double>& cumulative, std::size_t lo, std::size_t hi) {
  std::vector<double> xs, ys;
  for (std::size_t t = lo; t <= hi && t <= cumulative.size(); t *= 2) {
    xs.push_back(std::log(static_cast<double>(t)));
    ys.push_back(std::log(std::max(cumulative[t - 1], 1e-300)));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

FinalRegret final_regret(const MarketConfig& cfg, const std::vector<PolicyKind>& policies, std::size_t seeds,
                         bool expected, std::uint64_t first_seed) {
  const auto start = Clock::now();
  std::vector<RegretLedger> ledgers(seeds);
  parallel_for(seeds, cli::thread_count(), [&](std::size_t s) {
    PathOptions opts;
    opts.keep_records = false;
    ledgers[s] = run_seed(cfg, policies, first_seed + s, opts).path.ledger;
  });
  FinalRegret out;
  out.policies = policies;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    std::vector<double> finals;
    std::vector<double> curve(cfg.T, 0.0);
    for (const auto& l : ledgers) {
      const auto& trace = expected ? l.expected[i] : l.realized[i];
      finals.push_back(trace.back());
      for (std::size_t t = 0; t < cfg.T; ++t) curve[t] += trace[t] / static_cast<double>(seeds);
    }
    double mean = 0.0;
    for (double f : finals) mean += f;
    mean /= static_cast<double>(finals.size());
    double ss = 0.0;
    for (double f : finals) ss += (f - mean) * (f - mean);
    const double sd = finals.size() > 1 ? std::sqrt(ss / static_cast<double>(finals.size() - 1)) : 0.0;
    out.mean.push_back(mean);
    out.se.push_back(sd / std::sqrt(static_cast<double>(finals.size())));
    out.mean_curve.push_back(std::move(curve));
  }
  out.seconds = since(start);
  return out;
}

RateCurve stage2_error_curve(std::size_t M, std::size_t d, double delta_max, double context_scale,
                             const std::vector<std::size_t>& per_bond, std::size_t seeds) {
  MarketConfig cfg;
  cfg.M = M;
  cfg.d = d;
  cfg.delta_max = delta_max;
  cfg.context_scale = context_scale;
  RateCurve out;
  out.n = per_bond;
  out.error.assign(per_bond.size(), 0.0);
  std::vector<std::vector<double>> by_seed(seeds, std::vector<double>(per_bond.size(), 0.0));
  parallel_for(seeds, cli::thread_count(), [&](std::size_t s) {
    Rng root(5000 + s);
    Rng model_rng = root.fork(1);
    const MarketModel model = generate_model(cfg, model_rng);
    for (std::size_t i = 0; i < per_bond.size(); ++i) {
      Rng data = root.fork(100 + i);
      std::vector<Observation> obs;
      std::size_t round = 1;
      for (std::size_t r = 0; r < per_bond[i]; ++r) {
        for (std::size_t j = 0; j < M; ++j) {
          const Vec x = gaussian(data, d, context_scale);
          obs.push_back(synthetic_observation(data, round++, j, model.theta[j], x, cfg.noise));
        }
      }
      const EstimatorState est = two_stage_fit(obs, M, d, cfg.noise, cfg.lambda, cfg.W, Vec::Zero(static_cast<Eigen::Index>(d)));
      double err = 0.0;
      for (std::size_t j = 0; j < M; ++j) err += (est.theta_hat[j] - model.theta[j]).norm();
      by_seed[s][i] = err / static_cast<double>(M);
    }
  });
  for (const auto& row : by_seed) {
    for (std::size_t i = 0; i < row.size(); ++i) out.error[i] += row[i] / static_cast<double>(seeds);
  }
  // Slope of log error on log n.
  double mx = 0.0, my = 0.0;
  const double k = static_cast<double>(per_bond.size());
  for (std::size_t i = 0; i < per_bond.size(); ++i) {
    mx += std::log(static_cast<double>(per_bond[i])) / k;
    my += std::log(out.error[i]) / k;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < per_bond.size(); ++i) {
    const double dx = std::log(static_cast<double>(per_bond[i])) - mx;
    sxy += dx * (std::log(out.error[i]) - my);
    sxx += dx * dx;
  }
  out.slope = sxy / sxx;
  return out;
}

// 1 --------------------------------------------------------------------------
Verdict likelihood_derivatives() {
  const auto start = Clock::now();
  Verdict v{1, "likelihood gradient/Hessian vs central differences", false, "", 0.0};
  const NoiseSpec noise = MarketConfig{}.noise;
  Rng rng(101);
  const std::size_t d = 10;
  const double h = 1e-6;
  double worst_g = 0.0, worst_h = 0.0;
  int won = 0;
  for (int i = 0; i < 100; ++i) {
    const Vec theta = unit_vector(rng, d);
    Observation o;
    // Alternate censored and uncensored rows.
    do {
      o = synthetic_observation(rng, 1, 0, theta, gaussian(rng, d, 0.05), noise);
    } while (o.won != (i % 2 == 0));
    won += o.won ? 1 : 0;
    const Vec g = loglik_grad(theta, o, noise);
    const Mat H = loglik_hessian(theta, o, noise);
    Vec fd(static_cast<Eigen::Index>(d));
    Mat fdh(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(d); ++k) {
      Vec e = Vec::Zero(static_cast<Eigen::Index>(d));
      e(k) = h;
      fd(k) = (loglik(theta + e, o, noise) - loglik(theta - e, o, noise)) / (2.0 * h);
      fdh.col(k) = (loglik_grad(theta + e, o, noise) - loglik_grad(theta - e, o, noise)) / (2.0 * h);
    }
    worst_g = std::max(worst_g, (g - fd).norm() / std::max(g.norm(), fd.norm()));
    worst_h = std::max(worst_h, (H - fdh).norm() / std::max(H.norm(), fdh.norm()));
  }
  v.seconds = since(start);
  v.pass = worst_g <= 1e-6 && worst_h <= 1e-6 && v.seconds < 5.0;
  v.detail = "100 rows (" + std::to_string(won) + " won), max rel err grad " + fmt(worst_g, 3) + ", Hessian " +
             fmt(worst_h, 3) + "; tol 1e-6, " + fmt(v.seconds, 3) + " s (limit 5 s)";
  return v;
}

// 2 --------------------------------------------------------------------------
Verdict pricing_against_brute_force() {
  const auto start = Clock::now();
  Verdict v{2, "optimal_quote vs 1e6-point brute force", false, "", 0.0};
  Rng rng(202);
  const MarketConfig box;
  double worst_p = 0.0, worst_foc = 0.0;
  int interior = 0, over = 0;
  double solver_seconds = 0.0;
  for (int i = 0; i < 200; ++i) {
    const BondPrimitives b = box_bond(rng);
    const double mean = rng.uniform(-0.05, 0.15);
    const NoiseSpec noise = (i % 2 == 0) ? box.noise : NoiseSpec::normal(0.05, 0.05);
    const QuoteProblem q{b, noise, mean, 0.0, box.p_cap_factor * box.par, box.r_lo, box.r_hi};
    const auto s0 = Clock::now();
    const QuoteResult res = optimal_quote(q);
    solver_seconds += since(s0);
    const BruteResult brute = brute_force_quote(q, box.frequency);
    const double dp = std::abs(res.p_star - brute.p);
    worst_p = std::max(worst_p, dp);
    over += dp > 1e-5 ? 1 : 0;
    if (res.interior) {
      ++interior;
      const double vp = std::abs(price_derivs(b, res.r_star).d1);
      worst_foc = std::max(worst_foc, res.foc_residual / vp);
    }
  }
  v.seconds = since(start);
  v.pass = worst_p <= 1e-5 && worst_foc < 1e-8 && v.seconds < 60.0;
  v.detail = "200 problems, max |p - p_brute| " + fmt(worst_p, 3) + " (" + std::to_string(over) +
             " over 1e-5), max FOC/|V'| " + fmt(worst_foc, 3) + " on " + std::to_string(interior) +
             " interior optima; solver " + fmt(solver_seconds, 3) + " s, total " + fmt(v.seconds, 3) +
             " s (limit 60 s)";
  return v;
}

// 3 --------------------------------------------------------------------------
Verdict estimation_rate() {
  const auto start = Clock::now();
  Verdict v{3, "Stage II error rate vs per-bond samples", false, "", 0.0};
  const std::vector<std::size_t> n = {16, 32, 64, 128, 256, 512};
  const RateCurve c = stage2_error_curve(20, 10, 0.3, 0.1, n, 30);
  bool monotone = true;
  for (std::size_t i = 1; i < c.error.size(); ++i) monotone = monotone && c.error[i] < c.error[i - 1];
  v.seconds = since(start);
  v.pass = c.slope >= -0.75 && c.slope <= -0.25 && v.seconds < 180.0;
  std::string errs;
  for (std::size_t i = 0; i < n.size(); ++i) errs += (i ? " " : "") + std::to_string(n[i]) + ":" + fmt(c.error[i], 3);
  v.detail = "M=20 d=10 delta=0.3, 30 seeds; error " + errs + "; slope " + fmt(c.slope, 3) +
             " (need [-0.75, -0.25]), monotone " + (monotone ? "yes" : "no") + ", " + fmt(v.seconds, 3) +
             " s (limit 180 s)";
  return v;
}

// 4 --------------------------------------------------------------------------
Verdict figure_grid_ordering() {
  const auto start = Clock::now();
  Verdict v{4, "figure grid ordering (expected regret, 50 seeds, T=2048, d=30)", false, "", 0.0};
  const std::vector<PolicyKind> pol = {PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual};
  auto cell = [&](std::size_t M, double delta) {
    MarketConfig c;
    c.M = M;
    c.delta_max = delta;
    c.T = 2048;
    c.d = 30;
    return final_regret(c, pol, 50);
  };
  std::ostringstream d;
  bool pass = true;
  for (std::size_t M : {std::size_t{2}, std::size_t{10}}) {
    const FinalRegret r = cell(M, 0.1);
    const double ratio_t = r.mean[0] / r.mean[2];
    const double ratio_p = r.mean[1] / r.mean[2];
    const bool ok = ratio_t <= 0.6 && ratio_p <= 0.6;
    pass = pass && ok;
    d << "(a) M=" << M << " delta=0.1: TSMT/Ind " << fmt(ratio_t, 3) << ", Pool/Ind " << fmt(ratio_p, 3)
      << " (need <= 0.6) " << (ok ? "ok" : "FAIL") << "; ";
  }
  {
    const FinalRegret r = cell(50, 0.5);
    const double ratio = r.mean[0] / std::min(r.mean[1], r.mean[2]);
    const bool ok = ratio <= 1.1;
    pass = pass && ok;
    d << "(b) M=50 delta=0.5: TSMT/min(Pool,Ind) " << fmt(ratio, 3) << " (need <= 1.1) " << (ok ? "ok" : "FAIL")
      << "; ";
  }
  {
    const FinalRegret r = cell(2, 2.0);
    const double ratio = r.mean[1] / r.mean[0];
    const bool ok = ratio >= 1.5;
    pass = pass && ok;
    d << "(c) M=2 delta=2: Pool/TSMT " << fmt(ratio, 3) << " (need >= 1.5) " << (ok ? "ok" : "FAIL") << "; ";
  }
  v.seconds = since(start);
  v.pass = pass && v.seconds < 1200.0;
  d << fmt(v.seconds, 4) << " s (limit 1200 s)";
  v.detail = d.str();
  return v;
}

// 5 --------------------------------------------------------------------------
Verdict decay_rate_effect() {
  const auto start = Clock::now();
  Verdict v{5, "TSMT regret nonincreasing in polynomial decay alpha", false, "", 0.0};
  const std::vector<PolicyKind> pol = {PolicyKind::TSMT};
  std::vector<double> mean, se;
  for (double alpha : {0.0, 1.0, 2.0, 3.0}) {
    MarketConfig c;
    c.M = 50;
    c.delta_max = 0.5;
    c.T = 2048;
    c.arrival.kind = ArrivalSpec::Kind::PolyDecay;
    c.arrival.alpha = alpha;
    const FinalRegret r = final_regret(c, pol, 30);
    mean.push_back(r.mean[0]);
    se.push_back(r.se[0]);
  }
  bool pass = true;
  std::ostringstream d;
  for (std::size_t i = 0; i < mean.size(); ++i) d << "alpha=" << i << ": " << fmt(mean[i], 5) << " +- " << fmt(se[i], 3) << "; ";
  for (std::size_t i = 1; i < mean.size(); ++i) {
    const double pooled = std::sqrt(se[i] * se[i] + se[i - 1] * se[i - 1]);
    if (mean[i] > mean[i - 1] + pooled) pass = false;
  }
  v.seconds = since(start);
  v.pass = pass;
  d << "30 seeds, " << fmt(v.seconds, 4) << " s";
  v.detail = d.str();
  return v;
}

// 6 --------------------------------------------------------------------------
Verdict quadratic_regret() {
  const auto start = Clock::now();
  Verdict v{6, "expected regret quadratic in coefficient error", false, "", 0.0};
  const MarketConfig cfg;
  Rng rng(606);
  const std::vector<double> eps = {0.1, 0.05, 0.025, 0.0125};
  std::vector<double> regret(eps.size(), 0.0);
  int accepted = 0, drawn = 0;
  while (accepted < 100) {
    ++drawn;
    const BondPrimitives b = box_bond(rng);
    const Vec theta = unit_vector(rng, cfg.d);
    const Vec x = gaussian(rng, cfg.d, cfg.context_scale);
    const Vec u = unit_vector(rng, cfg.d);
    const std::vector<BondPrimitives> one = {b};
    if (!scan_curvature(one, 0.2).passes()) continue;
    // The noise condition is not imposed: with sigma = 0.05 only short bonds
    // satisfy it and their optimum sits on the truncation edge, where the
    // expansion below does not apply.
    const QuoteProblem truth{b, cfg.noise, theta.dot(x), 0.0, cfg.p_cap_factor * cfg.par, cfg.r_lo, cfg.r_hi};
    const QuoteResult best = optimal_quote(truth);
    if (!best.interior) continue;  // the expansion needs a smooth interior optimum
    ++accepted;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      QuoteProblem off = truth;
      off.b = (theta + eps[i] * u).dot(x);
      const QuoteResult q = optimal_quote(off);
      regret[i] += (best.reward - reward_at_yield(truth, q.r_star)) / 100.0;
    }
  }
  bool pass = true;
  std::ostringstream d;
  d << "100 instances (" << drawn << " drawn); mean regret";
  for (std::size_t i = 0; i < eps.size(); ++i) d << " eps=" << eps[i] << ":" << fmt(regret[i], 4);
  d << "; ratios";
  for (std::size_t i = 1; i < eps.size(); ++i) {
    const double ratio = regret[i - 1] / regret[i];
    d << ' ' << fmt(ratio, 4);
    if (!(ratio >= 1.0 && ratio <= 16.0)) pass = false;
  }
  v.seconds = since(start);
  v.pass = pass && v.seconds < 60.0;
  d << " (need 4 within x4: [1, 16]); " << fmt(v.seconds, 3) << " s (limit 60 s)";
  v.detail = d.str();
  return v;
}

// 7 --------------------------------------------------------------------------
Verdict determinism_and_lookahead() {
  const auto start = Clock::now();
  Verdict v{7, "determinism and no look-ahead", false, "", 0.0};
  MarketConfig cfg;
  cfg.M = 5;
  cfg.d = 8;
  cfg.T = 1023;
  const std::vector<PolicyKind> pol = {PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual,
                                       PolicyKind::Oracle};
  auto rounds_csv = [&](std::uint64_t seed) {
    std::ostringstream s;
    cli::write_rounds_csv(s, run_seed(cfg, pol, seed).path.records);
    return s.str();
  };
  const bool identical = rounds_csv(7) == rounds_csv(7);
  const bool differs = rounds_csv(7) != rounds_csv(8);

  // Two learners see the same stream except that, inside one episode, the
  // outcomes after its first round are redrawn. Quotes inside that episode
  // must not move; the next refit may.
  Rng root(77);
  Rng mr = root.fork(1);
  const MarketModel model = generate_model(cfg, mr);
  bool no_lookahead = true;
  bool later_differs = false;
  for (PolicyKind kind : {PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual}) {
    for (int k = 4; k <= 9; ++k) {
      const EpisodeInfo ep = episode_index(std::size_t{1} << (k - 1));
      Policy a(policy_config(cfg, kind)), b(policy_config(cfg, kind));
      Rng draws = root.fork(static_cast<std::uint64_t>(10 + k));
      Rng alt = root.fork(static_cast<std::uint64_t>(1000 + k));
      for (std::size_t t = 1; t <= ep.end + 1; ++t) {
        const std::size_t j = draws.categorical(model.pi);
        const Vec x = gaussian(draws, cfg.d, cfg.context_scale);
        const BondPrimitives bond = draw_primitives(cfg, draws);
        const double mean = model.theta[j].dot(x);
        const double y = mean + sample(cfg.noise, draws);
        const double y_alt = (t > ep.start) ? mean + sample(cfg.noise, alt) : y;
        const QuoteResult qa = a.quote(t, j, x, bond);
        const QuoteResult qb = b.quote(t, j, x, bond);
        if (t <= ep.end && qa.p_star != qb.p_star) no_lookahead = false;
        if (t == ep.end + 1 && qa.p_star != qb.p_star) later_differs = true;
        a.observe(Observation::from_trade(t, j, x, qa.p_star, qa.r_star, price(bond, y), bond));
        b.observe(Observation::from_trade(t, j, x, qb.p_star, qb.r_star, price(bond, y_alt), bond));
      }
    }
  }
  v.seconds = since(start);
  v.pass = identical && differs && no_lookahead;
  v.detail = std::string("same seed byte-identical rounds CSV: ") + (identical ? "yes" : "no") +
             "; other seed differs: " + (differs ? "yes" : "no") + "; quotes unchanged when in-episode outcomes change: " +
             (no_lookahead ? "yes" : "no") + " (next episode reacts: " + (later_differs ? "yes" : "no") + "); " +
             fmt(v.seconds, 3) + " s";
  return v;
}

// 8 --------------------------------------------------------------------------
Verdict replay_round_trip() {
  const auto start = Clock::now();
  Verdict v{8, "replay round trip and ridge oracle", false, "", 0.0};
  MarketConfig cfg;
  cfg.M = 4;
  cfg.d = 6;
  cfg.T = 1024;
  cfg.fixed_primitives = true;
  const std::vector<PolicyKind> pol = {PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual};
  PathOptions opts;
  opts.export_log = true;
  const SeedRun run = run_seed(cfg, pol, 88, opts);
  std::stringstream rows, prims, coef;
  write_rfq_rows(rows, run.path.log, cfg.d);
  write_primitives(prims, run.model.fixed_primitives);
  write_coefficients(coef, run.model.theta);
  RfqLog log;
  log.rows = read_rfq_rows(rows, "export");
  log.primitives = read_primitives(prims, "export");
  log.d = cfg.d;
  const std::vector<Vec> theta = read_coefficients(coef, "export");
  const ReplayResult rep = replay_policies(log, pol, policy_config(cfg, PolicyKind::TSMT), theta);
  bool exact = true;
  for (std::size_t i = 0; i < pol.size(); ++i) exact = exact && rep.ledger.realized[i] == run.path.ledger.realized[i];

  // Noiseless log: traded yields are exactly <theta_j, x>.
  MarketConfig clean = cfg;
  clean.M = 10;
  clean.d = 10;
  clean.T = 4000;
  clean.noise = NoiseSpec::normal(0.0, 1e-12);
  const std::vector<PolicyKind> none = {PolicyKind::Oracle};
  const SeedRun c = run_seed(clean, none, 89, opts);
  RfqLog nl;
  nl.rows = c.path.log;
  for (const auto& b : c.model.fixed_primitives) nl.primitives.emplace_back(b);
  nl.d = clean.d;
  const RidgeOracle fit = fit_ridge_oracle(nl, 1.0);
  double min_r2 = 1.0;
  for (std::size_t j = 0; j < clean.M; ++j) min_r2 = std::min(min_r2, fit.fitted[j] ? fit.r_squared[j] : -1.0);
  v.seconds = since(start);
  v.pass = exact && min_r2 > 0.99;
  v.detail = std::string("exported log replays realized ledger bit-exactly: ") + (exact ? "yes" : "no") +
             "; noiseless ridge min R^2 over 10 bonds " + fmt(min_r2, 6) + " (need > 0.99); " + fmt(v.seconds, 3) + " s";
  return v;
}

// 9 --------------------------------------------------------------------------
Verdict diagnostics_checks() {
  const auto start = Clock::now();
  Verdict v{9, "diagnostics: A(r) scan and E_k pooled-event frequency", false, "", 0.0};
  const MarketConfig cfg;
  Rng rng(909);
  std::vector<BondPrimitives> sets;
  for (int i = 0; i < 1000; ++i) sets.push_back(draw_primitives(cfg, rng));
  const CurvatureScan scan = scan_curvature(sets, 0.2);
  // Smallest yield where A turns positive among the violating sets.
  double first_positive = std::numeric_limits<double>::infinity();
  for (const auto& b : sets) {
    for (int i = 0; i < 2048; ++i) {
      const double r = 0.2 * i / 2047.0;
      if (curvature_A(b, r) > 0.0) {
        first_positive = std::min(first_positive, r);
        break;
      }
    }
  }

  MarketConfig ev = cfg;
  ev.T = 511;
  const std::vector<PolicyKind> none;
  std::vector<double> fail(10, 0.0);
  const std::size_t seeds = 30;
  for (std::size_t s = 0; s < seeds; ++s) {
    PathOptions opts;
    opts.keep_records = false;
    opts.export_log = true;
    const SeedRun run = run_seed(ev, none, 900 + s, opts);
    const double s2 = ev.context_scale * ev.context_scale;
    const auto eps = episode_events(run.path.log, ev.M, ev.d, s2, {}, run.model.pi);
    for (const auto& e : eps) {
      if (e.k >= 3 && e.k <= 9 && !e.pooled_event) fail[static_cast<std::size_t>(e.k)] += 1.0 / seeds;
    }
  }
  bool nonincreasing = true;
  for (int k = 4; k <= 9; ++k) nonincreasing = nonincreasing && fail[static_cast<std::size_t>(k)] <= fail[static_cast<std::size_t>(k - 1)];
  std::ostringstream d;
  d << "A(r) <= 0 on [0, 0.2]: " << scan.violations << "/" << scan.sets << " sets violate (max A " << fmt(scan.max_A, 4)
    << ", first positive at r=" << fmt(first_positive, 4) << "); E_k pooled failure frequency k=3..9:";
  for (int k = 3; k <= 9; ++k) d << ' ' << fmt(fail[static_cast<std::size_t>(k)], 3);
  d << " (nonincreasing: " << (nonincreasing ? "yes" : "no") << ", d=30); ";
  v.seconds = since(start);
  v.pass = scan.passes() && nonincreasing;
  d << fmt(v.seconds, 3) << " s";
  v.detail = d.str();
  return v;
}

}  // namespace creditquote::experiments
