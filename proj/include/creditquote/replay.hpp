#pragma once

#include "creditquote/bond.hpp"
#include "creditquote/policies.hpp"
#include "creditquote/simulator.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace creditquote {

/// A recorded RFQ stream plus the primitives of every bond it mentions.
struct RfqLog {
  std::vector<RfqRow> rows;
  std::vector<std::optional<BondPrimitives>> primitives;  ///< indexed by bond id
  std::size_t d = 0;

  std::size_t bonds() const { return primitives.size(); }
  const BondPrimitives& bond(std::size_t id) const;
  void validate() const;
};

/// `round,bond_id,price,trade_flag,f0,...,f{d-1}`. `source` names the stream in errors.
std::vector<RfqRow> read_rfq_rows(std::istream& in, const std::string& source = "rfq log");
/// `bond_id,coupon,par,payment_times` with ';'-separated payment times.
std::vector<std::optional<BondPrimitives>> read_primitives(std::istream& in, const std::string& source = "primitives",
                                                           const PrimitiveBox& box = PrimitiveBox{});
/// `bond_id,c0,...,c{d-1}`.
std::vector<Vec> read_coefficients(std::istream& in, const std::string& source = "coefficients");

RfqLog read_rfq_log(const std::string& rows_path, const std::string& primitives_path);

void write_rfq_rows(std::ostream& out, std::span<const RfqRow> rows, std::size_t d);
void write_primitives(std::ostream& out, std::span<const BondPrimitives> by_bond);
void write_coefficients(std::ostream& out, std::span<const Vec> by_bond);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

struct RidgeOracle {
  std::vector<Vec> theta;
  std::vector<double> r_squared;  ///< intercept-free: 1 - SS_res / sum y^2; NaN when not fitted
  std::vector<std::size_t> samples;
  std::vector<bool> fitted;       ///< at least 2 traded rows
  std::vector<bool> retained;     ///< fitted and r_squared >= threshold
};

/// Per-bond ridge regression of the traded yield on the features. Columns are
/// scaled to unit root-mean-square before the fit and the coefficients are
/// mapped back, so alpha acts on standardized features; no intercept is fitted.
RidgeOracle fit_ridge_oracle(const RfqLog& log, double alpha = 1.0, double r2_threshold = 0.4);

struct ReplayOptions {
  bool retained_only = false;  ///< drop rows of bonds the oracle did not retain
  bool keep_records = true;
};

struct ReplayResult {
  std::vector<RoundRecord> records;  ///< expected_regret and theta_err_l2 are NaN
  RegretLedger ledger;               ///< realized only; `expected` is left empty
  std::size_t skipped_rows = 0;      ///< rows without a traded price or of dropped bonds
};

/// Streams the log in order; row t (1-based, after filtering) is round t for
/// the episode schedule. A quote wins iff it is <= the traded price. Rows with
/// trade_flag 0 carry no price: nobody quotes and nothing is learnt.
ReplayResult replay_policies(const RfqLog& log, std::span<const PolicyKind> policies,
                             const PolicyConfig& base, std::span<const Vec> oracle_theta,
                             const ReplayOptions& opts = {}, const RidgeOracle* oracle_fit = nullptr);

}  // namespace creditquote
