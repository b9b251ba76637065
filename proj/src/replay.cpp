#include "creditquote/replay.hpp"

#include "creditquote/pricing.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <system_error>

namespace creditquote {

namespace {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what) {}
};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view s, const std::string& source, std::size_t line, const char* field) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
    throw ParseError(source, line, std::string("bad number in field '") + field + "': '" + std::string(s) + "'");
  }
  return v;
}

std::size_t parse_index(std::string_view s, const std::string& source, std::size_t line, const char* field) {
  s = trim(s);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(source, line, std::string("bad integer in field '") + field + "': '" + std::string(s) + "'");
  }
  return v;
}

// Reads the header and checks its leading columns; returns the column count.
std::size_t read_header(std::istream& in, const std::string& source, std::span<const std::string_view> expect,
                        std::string_view feature_prefix) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  const auto cols = split(trim(line), ',');
  if (cols.size() < expect.size()) throw ParseError(source, 1, "header has too few columns");
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (trim(cols[i]) != expect[i]) {
      throw ParseError(source, 1, "expected column '" + std::string(expect[i]) + "', got '" + std::string(trim(cols[i])) + "'");
    }
  }
  for (std::size_t i = expect.size(); i < cols.size(); ++i) {
    const std::string want = std::string(feature_prefix) + std::to_string(i - expect.size());
    if (trim(cols[i]) != want) throw ParseError(source, 1, "expected column '" + want + "'");
  }
  return cols.size();
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

const BondPrimitives& RfqLog::bond(std::size_t id) const {
  if (id >= primitives.size() || !primitives[id]) throw std::out_of_range("no primitives for bond " + std::to_string(id));
  return *primitives[id];
}

void RfqLog::validate() const {
  std::size_t prev = 0;
  bool first = true;
  for (const auto& row : rows) {
    if (!first && row.round <= prev) throw std::invalid_argument("rfq log: round indices must be strictly increasing");
    first = false;
    prev = row.round;
    if (static_cast<std::size_t>(row.x.size()) != d) throw std::invalid_argument("rfq log: inconsistent feature dimension");
    (void)bond(row.bond_id);
  }
}

std::vector<RfqRow> read_rfq_rows(std::istream& in, const std::string& source) {
  static constexpr std::string_view kCols[] = {"round", "bond_id", "price", "trade_flag"};
  const std::size_t ncols = read_header(in, source, kCols, "f");
  const std::size_t d = ncols - 4;
  if (d == 0) throw ParseError(source, 1, "no feature columns");
  std::vector<RfqRow> rows;
  std::string line;
  std::size_t lineno = 1;
  bool have_prev = false;
  std::size_t prev = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != ncols) {
      throw ParseError(source, lineno, "expected " + std::to_string(ncols) + " fields, got " + std::to_string(f.size()));
    }
    RfqRow row;
    row.round = parse_index(f[0], source, lineno, "round");
    row.bond_id = parse_index(f[1], source, lineno, "bond_id");
    row.price = parse_real(f[2], source, lineno, "price");
    const std::size_t flag = parse_index(f[3], source, lineno, "trade_flag");
    if (flag > 1) throw ParseError(source, lineno, "trade_flag must be 0 or 1");
    row.trade_flag = static_cast<int>(flag);
    if (row.trade_flag == 1 && !(row.price > 0.0)) throw ParseError(source, lineno, "traded price must be positive");
    if (have_prev && row.round <= prev) throw ParseError(source, lineno, "round index not strictly increasing");
    have_prev = true;
    prev = row.round;
    row.x.resize(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) row.x(static_cast<Eigen::Index>(i)) = parse_real(f[4 + i], source, lineno, "feature");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::optional<BondPrimitives>> read_primitives(std::istream& in, const std::string& source,
                                                           const PrimitiveBox& box) {
  static constexpr std::string_view kCols[] = {"bond_id", "coupon", "par", "payment_times"};
  if (read_header(in, source, kCols, "") != 4) throw ParseError(source, 1, "expected exactly 4 columns");
  std::vector<std::optional<BondPrimitives>> out;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw ParseError(source, lineno, "expected 4 fields");
    const std::size_t id = parse_index(f[0], source, lineno, "bond_id");
    const double coupon = parse_real(f[1], source, lineno, "coupon");
    const double par = parse_real(f[2], source, lineno, "par");
    std::vector<double> times;
    for (auto t : split(trim(f[3]), ';')) times.push_back(parse_real(t, source, lineno, "payment_times"));
    if (id >= out.size()) out.resize(id + 1);
    if (out[id]) throw ParseError(source, lineno, "duplicate bond_id " + std::to_string(id));
    try {
      out[id].emplace(coupon, par, std::move(times), box);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

std::vector<Vec> read_coefficients(std::istream& in, const std::string& source) {
  static constexpr std::string_view kCols[] = {"bond_id"};
  const std::size_t ncols = read_header(in, source, kCols, "c");
  const std::size_t d = ncols - 1;
  if (d == 0) throw ParseError(source, 1, "no coefficient columns");
  std::vector<Vec> out;
  std::vector<bool> seen;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != ncols) throw ParseError(source, lineno, "expected " + std::to_string(ncols) + " fields");
    const std::size_t id = parse_index(f[0], source, lineno, "bond_id");
    if (id >= out.size()) {
      out.resize(id + 1, Vec::Zero(static_cast<Eigen::Index>(d)));
      seen.resize(id + 1, false);
    }
    if (seen[id]) throw ParseError(source, lineno, "duplicate bond_id " + std::to_string(id));
    seen[id] = true;
    for (std::size_t i = 0; i < d; ++i) out[id](static_cast<Eigen::Index>(i)) = parse_real(f[1 + i], source, lineno, "coefficient");
  }
  return out;
}

RfqLog read_rfq_log(const std::string& rows_path, const std::string& primitives_path) {
  std::ifstream rows(rows_path);
  if (!rows) throw std::runtime_error("cannot open " + rows_path);
  std::ifstream prims(primitives_path);
  if (!prims) throw std::runtime_error("cannot open " + primitives_path);
  RfqLog log;
  log.rows = read_rfq_rows(rows, rows_path);
  log.primitives = read_primitives(prims, primitives_path);
  log.d = log.rows.empty() ? 0 : static_cast<std::size_t>(log.rows.front().x.size());
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const std::size_t id = log.rows[i].bond_id;
    if (id >= log.primitives.size() || !log.primitives[id]) {
      throw std::runtime_error(rows_path + ":" + std::to_string(i + 2) + ": bond_id " + std::to_string(id) +
                               " missing from " + primitives_path);
    }
  }
  return log;
}

void write_rfq_rows(std::ostream& out, std::span<const RfqRow> rows, std::size_t d) {
  out << "round,bond_id,price,trade_flag";
  for (std::size_t i = 0; i < d; ++i) out << ",f" << i;
  out << '\n';
  for (const auto& r : rows) {
    out << r.round << ',' << r.bond_id << ',' << format_double(r.price) << ',' << r.trade_flag;
    for (Eigen::Index i = 0; i < r.x.size(); ++i) out << ',' << format_double(r.x(i));
    out << '\n';
  }
}

void write_primitives(std::ostream& out, std::span<const BondPrimitives> by_bond) {
  out << "bond_id,coupon,par,payment_times\n";
  for (std::size_t j = 0; j < by_bond.size(); ++j) {
    const auto& b = by_bond[j];
    out << j << ',' << format_double(b.coupon()) << ',' << format_double(b.par()) << ',';
    for (std::size_t i = 0; i < b.payment_times().size(); ++i) {
      if (i) out << ';';
      out << format_double(b.payment_times()[i]);
    }
    out << '\n';
  }
}

void write_coefficients(std::ostream& out, std::span<const Vec> by_bond) {
  const Eigen::Index d = by_bond.empty() ? 0 : by_bond.front().size();
  out << "bond_id";
  for (Eigen::Index i = 0; i < d; ++i) out << ",c" << i;
  out << '\n';
  for (std::size_t j = 0; j < by_bond.size(); ++j) {
    out << j;
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(by_bond[j](i));
    out << '\n';
  }
}

RidgeOracle fit_ridge_oracle(const RfqLog& log, double alpha, double r2_threshold) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("fit_ridge_oracle: alpha must be >= 0");
  const std::size_t M = log.bonds();
  const auto d = static_cast<Eigen::Index>(log.d);
  RidgeOracle out;
  out.theta.assign(M, Vec::Zero(d));
  out.r_squared.assign(M, std::numeric_limits<double>::quiet_NaN());
  out.samples.assign(M, 0);
  out.fitted.assign(M, false);
  out.retained.assign(M, false);

  std::vector<std::vector<const RfqRow*>> by_bond(M);
  for (const auto& row : log.rows) {
    if (row.trade_flag == 1) by_bond.at(row.bond_id).push_back(&row);
  }
  for (std::size_t j = 0; j < M; ++j) {
    const auto n = static_cast<Eigen::Index>(by_bond[j].size());
    out.samples[j] = by_bond[j].size();
    if (n < 2) continue;
    const BondPrimitives& b = log.bond(j);
    Mat X(n, d);
    Vec y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      X.row(i) = by_bond[j][static_cast<std::size_t>(i)]->x.transpose();
      y(i) = yield_of_price(b, by_bond[j][static_cast<std::size_t>(i)]->price);
    }
    Vec scale = (X.colwise().squaredNorm() / static_cast<double>(n)).transpose().cwiseSqrt();
    for (Eigen::Index c = 0; c < d; ++c) {
      if (scale(c) == 0.0) scale(c) = 1.0;  // all-zero column: leave it, ridge keeps its weight at 0
    }
    const Mat Xs = X * scale.cwiseInverse().asDiagonal();
    const Vec beta = ridge_solve(Xs, y, alpha);
    out.theta[j] = beta.cwiseQuotient(scale);
    const double ss_res = (y - X * out.theta[j]).squaredNorm();
    const double ss_tot = y.squaredNorm();
    out.r_squared[j] = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity());
    out.fitted[j] = true;
    out.retained[j] = out.r_squared[j] >= r2_threshold;
  }
  return out;
}

ReplayResult replay_policies(const RfqLog& log, std::span<const PolicyKind> policies,
                             const PolicyConfig& base, std::span<const Vec> oracle_theta,
                             const ReplayOptions& opts, const RidgeOracle* oracle_fit) {
  log.validate();
  const std::size_t M = log.bonds();
  if (oracle_theta.size() != M) throw std::invalid_argument("replay: need oracle coefficients for every bond");
  if (opts.retained_only && !oracle_fit) throw std::invalid_argument("replay: retained_only needs the oracle fit");

  PolicyConfig cfg = base;
  cfg.M = M;
  cfg.d = log.d;
  std::vector<Vec> truth(oracle_theta.begin(), oracle_theta.end());
  std::vector<Policy> learners;
  for (PolicyKind kind : policies) {
    PolicyConfig pc = cfg;
    pc.kind = kind;
    learners.emplace_back(pc, kind == PolicyKind::Oracle ? truth : std::vector<Vec>{});
  }
  PolicyConfig oracle_cfg = cfg;
  oracle_cfg.kind = PolicyKind::Oracle;
  const std::size_t P = learners.size();

  ReplayResult out;
  out.ledger.policies.assign(policies.begin(), policies.end());
  out.ledger.realized.assign(P, {});
  std::vector<double> cum(P, 0.0);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::size_t t = 0;
  for (const auto& row : log.rows) {
    if (opts.retained_only && !oracle_fit->retained.at(row.bond_id)) {
      ++out.skipped_rows;
      continue;
    }
    ++t;
    const int episode = episode_index(t).k;
    if (row.trade_flag == 0) {
      ++out.skipped_rows;
      for (std::size_t i = 0; i < P; ++i) out.ledger.realized[i].push_back(cum[i]);
      continue;
    }
    const std::size_t j = row.bond_id;
    const BondPrimitives& bond = log.bond(j);
    const double traded = row.price;
    const PriceGrid grid = PriceGrid::build(bond, cfg.p_cap_factor * bond.par(), cfg.r_lo, cfg.r_hi);
    const QuoteProblem truth_q = make_quote_problem(oracle_cfg, bond, truth[j].dot(row.x));
    const QuoteResult best = optimal_quote(truth_q, grid, oracle_cfg.quote_tol);
    const double oracle_reward = best.p_star <= traded ? best.p_star - cfg.gamma : 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      Policy& pol = learners[i];
      const QuoteResult q = pol.quote(t, j, row.x, bond, &grid);
      const Observation obs = Observation::from_trade(t, j, row.x, q.p_star, q.r_star, traded, bond);
      const double reward = obs.won ? q.p_star - cfg.gamma : 0.0;
      pol.observe(obs);
      cum[i] += oracle_reward - reward;
      out.ledger.realized[i].push_back(cum[i]);
      if (opts.keep_records) {
        out.records.push_back(RoundRecord{t, episode, j, pol.kind(), q.p_star, traded, obs.won, reward,
                                          oracle_reward, oracle_reward - reward, nan, nan});
      }
    }
  }
  return out;
}

}  // namespace creditquote
