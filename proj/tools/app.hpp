#pragma once

#include "creditquote/diagnostics.hpp"
#include "creditquote/replay.hpp"
#include "creditquote/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace creditquote::cli {

/// Bad configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepGrid {
  std::vector<std::size_t> M;
  std::vector<double> delta_max;
  std::vector<double> alpha;  ///< polynomial-decay exponents
};

struct ReplaySection {
  std::string rfq_log;
  std::string primitives;
  std::string coefficients;  ///< optional: oracle coefficients instead of the ridge fit
  double ridge_alpha = 1.0;
  double r2_threshold = 0.4;
  bool retained_only = false;
};

struct ExperimentConfig {
  MarketConfig market;
  std::vector<PolicyKind> policies{PolicyKind::TSMT, PolicyKind::Pooling, PolicyKind::Individual};
  std::vector<std::uint64_t> seeds{1};
  std::string out = "out";
  bool svg = false;
  bool export_log = false;
  SweepGrid sweep;
  std::optional<ReplaySection> replay;
  DiagnosticsConfig diagnostics;
  std::vector<std::string> notices;  ///< non-fatal remarks produced while parsing
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Checkpoints 1, 2, 4, ... and T.
std::vector<std::size_t> checkpoints(std::size_t T);

struct SummaryRow {
  std::size_t t;
  PolicyKind policy;
  double mean_realized, sd_realized, mean_expected, sd_expected;
  std::size_t seeds;
};

/// Mean and sample standard deviation across seeds at every checkpoint.
std::vector<SummaryRow> summarize(const std::vector<RegretLedger>& ledgers, std::size_t T);

void write_rounds_csv(std::ostream& out, const std::vector<RoundRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(std::istream& in);

struct Panel {
  std::string title;
  std::vector<SummaryRow> rows;
};

/// Small multiples of mean cumulative expected regret with +-1 sd bands.
std::string render_svg(const std::vector<Panel>& panels);

/// Worker count: CREDITQUOTE_THREADS if set, else the hardware concurrency.
unsigned thread_count();

// Subcommands; they throw ConfigError or std::exception on failure.
void cmd_simulate(const ExperimentConfig& cfg, std::ostream& log);
void cmd_sweep(const ExperimentConfig& cfg, std::ostream& log);
void cmd_replay(const ExperimentConfig& cfg, std::ostream& log);
void cmd_diagnose(const ExperimentConfig& cfg, std::ostream& log);

std::string diagnostics_json(const DiagnosticsReport& rep);

/// Entry point shared by the binary and the tests.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace creditquote::cli
