#include "creditquote/simulator.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace creditquote {

namespace {

// Sub-stream ids.
constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kArrivalStream = 2;
constexpr std::uint64_t kContextStream = 3;
constexpr std::uint64_t kPrimitiveStream = 4;
constexpr std::uint64_t kNoiseStream = 5;

}  // namespace

std::vector<double> arrival_weights(const ArrivalSpec& spec, std::size_t M) {
  if (M == 0) throw std::invalid_argument("arrival_weights: M must be positive");
  std::vector<double> w(M);
  switch (spec.kind) {
    case ArrivalSpec::Kind::Uniform:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case ArrivalSpec::Kind::ExpDecay:
      if (!(spec.beta > 0.0)) throw std::invalid_argument("arrival_weights: beta must be > 0");
      // Relative to j = 1 so large M does not underflow the head.
      for (std::size_t j = 0; j < M; ++j) w[j] = std::exp(-spec.beta * static_cast<double>(j));
      break;
    case ArrivalSpec::Kind::PolyDecay:
      if (!(spec.alpha >= 0.0)) throw std::invalid_argument("arrival_weights: alpha must be >= 0");
      for (std::size_t j = 0; j < M; ++j) w[j] = std::pow(static_cast<double>(j + 1), -spec.alpha);
      break;
    case ArrivalSpec::Kind::Weights:
      if (spec.weights.size() != M) throw std::invalid_argument("arrival_weights: need one weight per bond");
      w = spec.weights;
      for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("arrival_weights: weights must be finite and >= 0");
      }
      break;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("arrival_weights: weights sum to zero");
  for (double& x : w) x /= total;
  return w;
}

void MarketConfig::validate() const {
  if (M == 0) throw std::invalid_argument("M must be >= 1");
  if (d == 0) throw std::invalid_argument("d must be >= 1");
  if (!(delta_max >= 0.0) || !std::isfinite(delta_max)) throw std::invalid_argument("delta_max must be >= 0");
  if (T == 0) throw std::invalid_argument("T must be >= 1");
  noise.validate();
  if (!(W > 0.0)) throw std::invalid_argument("W must be > 0");
  if (!(par > 0.0)) throw std::invalid_argument("par must be > 0");
  if (!(context_scale > 0.0) || !std::isfinite(context_scale)) throw std::invalid_argument("context_scale must be > 0");
  if (payments_lo < 1 || payments_hi < payments_lo) throw std::invalid_argument("bad payment-count range");
  if (!(coupon_lo >= 0.0 && coupon_hi >= coupon_lo && coupon_hi <= 1.0)) throw std::invalid_argument("bad coupon range");
  if (!(frequency > 0.0)) throw std::invalid_argument("frequency must be > 0");
  if (!(r_lo > -1.0 && r_lo < r_hi)) throw std::invalid_argument("bad yield box");
  if (!(p_cap_factor * par > gamma)) throw std::invalid_argument("p_cap must exceed gamma");
  (void)arrival_weights(arrival, M);
}

Vec draw_raw_deviation(std::size_t d, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(d);
  // Cholesky factor of 0.2 I + 1 1^T.
  Mat cov = Mat::Constant(n, n, 1.0);
  cov.diagonal().array() += 0.2;
  const Mat L = Eigen::LLT<Mat>(cov).matrixL();
  Vec z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
  return L * z;
}

MarketModel generate_model(const MarketConfig& cfg, Rng& rng) {
  cfg.validate();
  MarketModel m;
  m.cfg = cfg;
  const auto n = static_cast<Eigen::Index>(cfg.d);
  Vec u(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) u(i) = rng.normal();
  } while (u.norm() == 0.0);
  m.theta_star = u / u.norm();

  for (std::size_t j = 0; j < cfg.M; ++j) {
    const Vec raw = draw_raw_deviation(cfg.d, rng);
    const double norm = raw.norm();
    if (norm == 0.0) throw std::runtime_error("generate_model: zero deviation draw");
    m.delta.push_back(raw * (cfg.delta_max / norm));
    m.theta.push_back(m.theta_star + m.delta.back());
  }
  m.pi = arrival_weights(cfg.arrival, cfg.M);
  if (cfg.fixed_primitives) {
    for (std::size_t j = 0; j < cfg.M; ++j) m.fixed_primitives.push_back(draw_primitives(cfg, rng));
  }
  return m;
}

BondPrimitives draw_primitives(const MarketConfig& cfg, Rng& rng) {
  const auto n = static_cast<std::size_t>(rng.uniform_int(cfg.payments_lo, cfg.payments_hi));
  const double coupon = rng.uniform(cfg.coupon_lo, cfg.coupon_hi);
  return BondPrimitives::regular(coupon, cfg.par, n, cfg.frequency);
}

PolicyConfig policy_config(const MarketConfig& cfg, PolicyKind kind) {
  PolicyConfig p;
  p.kind = kind;
  p.M = cfg.M;
  p.d = cfg.d;
  p.noise = cfg.noise;
  p.lambda = cfg.lambda;
  p.solver = cfg.solver;
  p.W = cfg.W;
  p.gamma = cfg.gamma;
  p.p_cap_factor = cfg.p_cap_factor;
  p.r_lo = cfg.r_lo;
  p.r_hi = cfg.r_hi;
  return p;
}

std::size_t RegretLedger::index_of(PolicyKind kind) const {
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (policies[i] == kind) return i;
  }
  throw std::out_of_range("policy not in ledger: " + std::string(to_string(kind)));
}

PathResult run_path(const MarketModel& model, std::span<const PolicyKind> policies, const Rng& rng,
                    const PathOptions& opts) {
  const MarketConfig& cfg = model.cfg;
  Rng arrivals = rng.fork(kArrivalStream);
  Rng contexts = rng.fork(kContextStream);
  Rng primitives = rng.fork(kPrimitiveStream);
  Rng noise = rng.fork(kNoiseStream);

  std::vector<Policy> learners;
  for (PolicyKind kind : policies) {
    learners.emplace_back(policy_config(cfg, kind), kind == PolicyKind::Oracle ? model.theta : std::vector<Vec>{});
  }
  const PolicyConfig oracle_cfg = policy_config(cfg, PolicyKind::Oracle);
  const std::size_t P = learners.size();

  PathResult out;
  out.ledger.policies.assign(policies.begin(), policies.end());
  out.ledger.realized.assign(P, std::vector<double>(cfg.T));
  out.ledger.expected.assign(P, std::vector<double>(cfg.T));
  out.ledger.theta_err.assign(P, std::vector<double>(cfg.T));
  if (opts.keep_records) out.records.reserve(cfg.T * P);
  std::vector<double> cum_realized(P, 0.0);
  std::vector<double> cum_expected(P, 0.0);

  const auto d = static_cast<Eigen::Index>(cfg.d);
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    const std::size_t j = arrivals.categorical(model.pi);
    Vec x(d);
    for (Eigen::Index i = 0; i < d; ++i) x(i) = cfg.context_scale * contexts.normal();
    const BondPrimitives bond = cfg.fixed_primitives ? model.fixed_primitives[j] : draw_primitives(cfg, primitives);
    const double eps = sample(cfg.noise, noise);
    const double mean_yield = model.theta[j].dot(x);
    const double bcl_price = price(bond, mean_yield + eps);

    const PriceGrid grid = PriceGrid::build(bond, cfg.p_cap_factor * bond.par(), cfg.r_lo, cfg.r_hi);
    const QuoteProblem truth = make_quote_problem(oracle_cfg, bond, mean_yield);
    const QuoteResult best = optimal_quote(truth, grid, oracle_cfg.quote_tol);
    const bool oracle_win = best.p_star <= bcl_price;
    const double oracle_reward = oracle_win ? best.p_star - cfg.gamma : 0.0;

    const int episode = episode_index(t).k;
    for (std::size_t i = 0; i < P; ++i) {
      Policy& pol = learners[i];
      const QuoteResult q = pol.quote(t, j, x, bond, &grid);
      const Vec theta_used = pol.theta_for(j);
      const Observation obs = Observation::from_trade(t, j, x, q.p_star, q.r_star, bcl_price, bond);
      const double reward = obs.won ? q.p_star - cfg.gamma : 0.0;
      const double expected_gap = best.reward - reward_at_yield(truth, q.r_star);
      pol.observe(obs);

      cum_realized[i] += oracle_reward - reward;
      cum_expected[i] += expected_gap;
      out.ledger.realized[i][t - 1] = cum_realized[i];
      out.ledger.expected[i][t - 1] = cum_expected[i];
      const double err = (theta_used - model.theta[j]).norm();
      out.ledger.theta_err[i][t - 1] = err;
      if (opts.keep_records) {
        out.records.push_back(RoundRecord{t, episode, j, pol.kind(), q.p_star, bcl_price, obs.won, reward,
                                          oracle_reward, oracle_reward - reward, expected_gap, err});
      }
    }
    if (opts.export_log) {
      out.log.push_back(RfqRow{t, j, bcl_price, 1, x});
      out.round_primitives.push_back(bond);
    }
  }
  for (const auto& pol : learners) out.extended_terms.push_back(pol.extended_total());
  return out;
}

SeedRun run_seed(const MarketConfig& cfg, std::span<const PolicyKind> policies, std::uint64_t seed,
                 const PathOptions& opts) {
  const Rng root(seed);
  Rng model_rng = root.fork(kModelStream);
  SeedRun out{generate_model(cfg, model_rng), {}};
  out.path = run_path(out.model, policies, root, opts);
  return out;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = std::min<unsigned>(threads, static_cast<unsigned>(n));
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace creditquote
