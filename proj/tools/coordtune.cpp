// Command line front end: tune one task, run experiments, grid case
// studies, and print allocation patterns from trace files.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "coordtune/harness.hpp"
#include "coordtune/serialization.hpp"

using namespace coordtune;

namespace {

struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
  std::optional<std::size_t> buffer_size;
  std::optional<std::string> out;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--seed", f.seed, "Random seed (replaces the file's seed or seed list)");
  cmd->add_option("--strategy", f.strategy,
                  "Allocation strategy: ts_buffer, ts, round_robin, ucb, sequential(i-k-q), joint");
  cmd->add_option("--buffer-size", f.buffer_size, "Memory buffer size for ts_buffer")->check(CLI::PositiveNumber);
}

void apply(ExperimentSpec& spec, const Flags& f) {
  if (f.seed) spec.seeds = {*f.seed};
  if (f.strategy) spec.strategies = {*f.strategy};
  if (f.buffer_size) spec.buffer_sizes = {*f.buffer_size};
  if (f.out) spec.output_dir = *f.out;
}

int cmd_tune(const std::string& path, const Flags& f) {
  TaskConfig config = parse_task_file(path);
  if (f.seed) {
    config.task.seed = *f.seed;
    config.system.seed = *f.seed;
  }
  if (f.buffer_size) config.task.buffer_size = *f.buffer_size;
  if (f.strategy && *f.strategy != kJointStrategy) config.strategy = parse_strategy(*f.strategy);
  const TuningResult result =
      run_tuning(config, f.strategy && *f.strategy == kJointStrategy ? f.strategy : std::nullopt);
  if (f.out) write_trace_file(*f.out, result);

  std::cout << "strategy\t" << result.trace.strategy << '\n';
  std::cout << "epochs\t" << result.trace.epochs.size() << '\n';
  std::cout << "initial_f\t" << format_real(result.trace.initial_performance) << '\n';
  std::cout << "f_global\t" << format_real(result.f_global) << '\n';
  std::cout << "budget_used\t" << format_real(result.trace.total_cost()) << '\n';
  if (!result.trace.epochs.empty()) {
    const auto pattern = allocation_pattern(result.trace);
    for (std::size_t i = 0; i < pattern.shares.size(); ++i)
      std::cout << "share_" << pattern.component_names[i] << '\t' << format_real(pattern.shares[i]) << '\n';
  }
  std::cout << "incumbent\t" << to_text(result.incumbent) << '\n';
  return 0;
}

int cmd_experiment(const std::string& path, const Flags& f) {
  ExperimentSpec spec = parse_experiment_file(path);
  apply(spec, f);
  const ExperimentSummary summary = run_experiment(spec);
  write_aggregate(std::cout, summary.aggregate);
  std::size_t failures = 0;
  for (const auto& r : summary.runs)
    if (!r.ok) ++failures;
  std::cerr << summary.runs.size() << " runs, " << failures << " failed; results in " << spec.output_dir << '\n';
  return 0;
}

std::ofstream open_output(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

int cmd_grid_case(const std::string& path, const Flags& f) {
  ExperimentSpec spec = parse_experiment_file(path);
  const auto out = f.out;
  Flags rest = f;
  rest.out.reset();
  apply(spec, rest);
  const GridCaseTable table = grid_case_study(spec);
  write_grid_case(std::cout, table);
  if (out) {
    std::ofstream file = open_output(*out);
    write_grid_case(file, table);
  }
  return 0;
}

int cmd_pattern(const std::string& path, const Flags& f) {
  const TuningResult result = read_trace_file(path);
  const PatternTable table = allocation_pattern(result.trace);
  if (f.out) {
    std::ofstream file = open_output(*f.out);
    write_pattern(file, table);
  } else {
    write_pattern(std::cout, table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coordinated multi-agent tuning on a simulated multi-component system"};
  app.require_subcommand(1);

  Flags flags;
  std::string input;

  auto* tune = app.add_subcommand("tune", "Run one tuning task from an INI file");
  tune->add_option("task", input, "Task file")->required()->check(CLI::ExistingFile);
  add_run_flags(tune, flags);
  tune->add_option("--out", flags.out, "Write the trace (JSON lines) to this file");

  auto* experiment = app.add_subcommand("experiment", "Run a multi-seed experiment");
  experiment->add_option("spec", input, "Experiment file")->required()->check(CLI::ExistingFile);
  add_run_flags(experiment, flags);
  experiment->add_option("--out", flags.out, "Output directory");

  auto* grid = app.add_subcommand("grid-case", "Compare strategies with the exhaustive grid oracle");
  grid->add_option("spec", input, "Experiment file")->required()->check(CLI::ExistingFile);
  add_run_flags(grid, flags);
  grid->add_option("--out", flags.out, "Also write the table to this file");

  auto* pattern = app.add_subcommand("pattern", "Print the budget allocation pattern of a trace");
  pattern->add_option("trace", input, "Trace file")->required()->check(CLI::ExistingFile);
  pattern->add_option("--out", flags.out, "Write the table to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (tune->parsed()) return cmd_tune(input, flags);
    if (experiment->parsed()) return cmd_experiment(input, flags);
    if (grid->parsed()) return cmd_grid_case(input, flags);
    if (pattern->parsed()) return cmd_pattern(input, flags);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}
