#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "robustfl/simulation.hpp"

namespace robustfl {

/// A base configuration plus the axes swept over. The Cartesian product is
/// taken in the order rule x attack x p x alpha x seed (seed fastest).
struct SweepSpec {
  ExperimentConfig base;
  bool beta_auto = true;    // beta = C = round(p * M) at each point
  bool lambda_auto = true;  // lambda = M
  std::vector<RuleKind> rules{RuleKind::FedAvg};
  std::vector<AttackKind> attacks{AttackKind::None};
  std::vector<double> fractions{0.0};
  std::vector<double> alphas{1.0};
  std::vector<std::uint64_t> seeds{1};
  std::size_t threads = 1;

  std::size_t num_points() const;
};

struct SweepPoint {
  std::size_t ordinal = 0;
  ExperimentConfig config;
  std::string run_id;
  std::string skip_reason;  // empty when the point is runnable

  bool runnable() const { return skip_reason.empty(); }
};

/// Parses flat `key = value` text (one key per line, `#` comments, lists
/// comma-separated), then applies `key=value` overrides. Unknown keys,
/// malformed values, and specs with no valid point raise ConfigError.
SweepSpec parse_config_text(std::string_view text, std::span<const std::string> overrides = {});
SweepSpec parse_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});

/// Resolves every point of the product. Points violating a constraint carry
/// the violated invariant in skip_reason.
std::vector<SweepPoint> expand(const SweepSpec& spec);

/// Stable 16-hex-digit identifier hashed from the fully resolved config.
std::string run_id(const ExperimentConfig& config);

struct PointResult {
  SweepPoint point;
  std::vector<RoundMetrics> metrics;
  std::string error;  // set when the run threw

  bool ok() const { return point.runnable() && error.empty(); }
};

/// Runs every runnable point on spec.threads workers. Results are in
/// ordinal order regardless of scheduling.
std::vector<PointResult> execute_sweep(const SweepSpec& spec);

/// Column headers of the CSV files written by run_sweep.
inline constexpr std::string_view kMetricsHeader =
    "run_id,rule,attack,p,alpha,beta,seed,round,test_acc,test_err,excluded_devices";
inline constexpr std::string_view kSummaryHeader =
    "run_id,rule,attack,p,alpha,beta,seed,min_test_err,rounds_run,status";
inline constexpr std::string_view kScoresHeader = "run_id,round,device,score";

void write_metrics_csv(std::ostream& out, std::span<const PointResult> results, bool header = true);
void write_summary_csv(std::ostream& out, std::span<const PointResult> results);
void write_scores_csv(std::ostream& out, std::span<const PointResult> results, bool header = true);

enum ExitCode : int { kExitOk = 0, kExitConfigError = 2, kExitPartialFailure = 3 };

/// Executes the sweep and writes out_dir/{metrics,summary,scores}.csv plus
/// out_dir/runs/<run_id>.csv per point, each via write-then-rename.
/// Returns kExitPartialFailure if any run threw, kExitOk otherwise.
int run_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir);

}  // namespace robustfl
