#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coordtune/config.hpp"
#include "coordtune/coordinator.hpp"

namespace coordtune {

/// Strategy label accepted by run_tuning: any allocator strategy, or "joint"
/// for BO over the concatenated space.
inline constexpr const char* kJointStrategy = "joint";

/// Runs one task end to end on a fresh synthetic system. `strategy` replaces
/// the config's strategy when given.
TuningResult run_tuning(const TaskConfig& config, const std::optional<std::string>& strategy = std::nullopt);

// ---------------------------------------------------------------- traces

/// Line-delimited JSON: a header record, one record per epoch, a result record.
void write_trace(std::ostream& out, const TuningResult& result);
void write_trace_file(const std::string& path, const TuningResult& result);
TuningResult read_trace(std::istream& in);
TuningResult read_trace_file(const std::string& path);

// ------------------------------------------------------ allocation pattern

struct PatternRow {
  std::uint64_t epoch = 0;
  std::size_t agent = 0;
  std::string agent_name;
  /// Cumulative share of agent budget per component through this epoch.
  std::vector<double> shares;
};

struct PatternTable {
  std::vector<std::string> component_names;
  std::vector<PatternRow> rows;
  std::vector<double> shares;  // final shares
};

/// Budget shares count each epoch's agent cost; context measurements are
/// excluded so that equal schedules give equal shares.
PatternTable allocation_pattern(const TuningTrace& trace);
void write_pattern(std::ostream& out, const PatternTable& table);

// ---------------------------------------------------------- experiments

/// One (strategy, buffer size, seed) run.
struct RunSummary {
  std::string strategy;
  std::size_t buffer_size = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double best_f = 0.0;
  double initial_f = 0.0;
  std::size_t epochs = 0;
  /// 1-based epoch of the last improvement, 0 when nothing improved.
  std::size_t epochs_to_best = 0;
  std::size_t evaluations_to_best = 0;
  std::size_t evaluations = 0;
  double total_cost = 0.0;
  std::vector<std::string> component_names;
  std::vector<double> shares;
  std::string trace_file;
};

RunSummary summarize(const TuningResult& result);

struct AggregateRow {
  std::string strategy;
  std::size_t buffer_size = 0;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
};

struct ExperimentSummary {
  std::vector<RunSummary> runs;
  std::vector<AggregateRow> aggregate;
};

/// Linear-interpolation quantile of a non-empty sample, q in [0, 1].
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

/// Task config of one run inside an experiment.
TaskConfig experiment_task(const ExperimentSpec& spec, std::uint64_t seed, std::optional<std::size_t> buffer_size);

/// Runs every (strategy, buffer size, seed), writes traces/<run>.jsonl,
/// summary.tsv and aggregate.tsv under output_dir. Failed runs are recorded
/// and the experiment continues.
ExperimentSummary run_experiment(const ExperimentSpec& spec);
void write_summary(std::ostream& out, const std::vector<RunSummary>& runs);
void write_aggregate(std::ostream& out, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> aggregate(const std::vector<RunSummary>& runs);

// ------------------------------------------------------------ grid case

struct GridCaseRow {
  std::string strategy;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double best_f = 0.0;
  double oracle_f = 0.0;
  /// (best_f - oracle_f) / |oracle_f|
  double gap = 0.0;
  std::size_t evaluations = 0;
  /// Evaluations charged until f_global was within target_gap of the oracle;
  /// empty when it never got there.
  std::optional<std::size_t> evaluations_to_target;
  std::size_t oracle_evaluations = 0;
};

struct GridCaseTable {
  std::vector<GridCaseRow> rows;
};

/// Runs the exhaustive oracle and every strategy on each seed. Refuses
/// scenarios above the enumeration cap.
GridCaseTable grid_case_study(const ExperimentSpec& spec, std::size_t enumeration_cap = 1'000'000);
void write_grid_case(std::ostream& out, const GridCaseTable& table);

/// First evaluation count at which the trace's f_global is within
/// `relative_gap` of `target`.
std::optional<std::size_t> evaluations_to_reach(const TuningTrace& trace, double target, double relative_gap);

/// printf("%.17g")
std::string format_real(double value);

}  // namespace coordtune
