#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coordtune/agents.hpp"
#include "coordtune/allocator.hpp"
#include "coordtune/core.hpp"
#include "coordtune/target_sim.hpp"

namespace coordtune {

/// Config file error; `line` is 1-based, 0 when it is not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct IniEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct IniSection {
  std::string name;
  std::size_t line = 0;
  std::vector<IniEntry> entries;
};

/// INI reader: `[Section]` headers, `key = value` pairs, `#`/`;` comment
/// lines. A value with unbalanced `{`/`[` continues onto following lines
/// until its brackets close, which is how dict literals spanning several
/// lines are read.
struct IniDocument {
  std::string source;
  std::vector<IniSection> sections;

  const IniSection* find(const std::string& name) const;
};

IniDocument parse_ini(std::istream& in, const std::string& source);
IniDocument parse_ini_text(const std::string& text, const std::string& source = "<string>");
IniDocument parse_ini_file(const std::string& path);

/// Strips one pair of matching single or double quotes.
std::string unquote(const std::string& text);
/// `{'a': 'b', "c": d}` -> ordered (key, value) pairs with quotes removed.
std::vector<std::pair<std::string, std::string>> parse_dict(const std::string& text);
/// Comma separated list, optionally in brackets; quotes removed.
std::vector<std::string> parse_list(const std::string& text);
/// Comma separated integers and inclusive ranges such as "1-50".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Agent kind for a kind name or a well-known tuner name (for example
/// "OtterTune" maps to BO, "CDBTune" to RL, "LearnedRewrite" to RLEstimator).
AgentKind resolve_agent_kind(const std::string& name);
/// (name, kind) pairs behind resolve_agent_kind, for documentation.
const std::vector<std::pair<std::string, AgentKind>>& agent_aliases();

/// Named synthetic setup: the system, which agent tunes each component and
/// a default budget.
struct ScenarioPreset {
  std::string name;
  SyntheticSystemSpec system;
  std::vector<ComponentSpec> components;
  AgentSettings settings;
  double tuning_budget = 0.0;
  /// Evaluations per sub-budget; sub_budget = 2 * eval_cost * k_evals.
  std::size_t k_evals = 5;
};

ScenarioPreset scenario_preset(const std::string& name);
std::vector<std::string> scenario_names();

/// Everything needed to run one tuning task.
struct TaskConfig {
  TuningTask task;
  SyntheticSystemSpec system;
  AgentSettings settings;
  StrategySpec strategy;
  std::string scenario;
};

/// Reads a task file. [Tuning-Setting] needs `components` and
/// `tuning_budget`; [Allocator], [System] and [Agent] are optional. Unknown
/// sections or keys are errors.
TaskConfig parse_task(const IniDocument& doc);
TaskConfig parse_task_file(const std::string& path);
TaskConfig parse_task_text(const std::string& text, const std::string& source = "<string>");

/// Task config for a preset with the given seed.
TaskConfig task_from_preset(const ScenarioPreset& preset, std::uint64_t seed);

struct ExperimentSpec {
  std::string scenario = "default-3c";
  std::vector<std::string> strategies{"ts_buffer"};
  std::vector<std::uint64_t> seeds{1};
  /// Buffer sizes to sweep; empty means the task default.
  std::vector<std::size_t> buffer_sizes;
  std::optional<double> tuning_budget;
  std::string output_dir = "results";
  std::size_t threads = 1;
  /// Relative gap used for the evaluations-to-target column in grid cases.
  double target_gap = 0.05;
  /// Replace the scenario's system and agent settings when set. The system
  /// seed is always the run seed.
  std::optional<SyntheticSystemSpec> system;
  std::optional<AgentSettings> settings;
};

/// [Experiment] keys: scenario, strategies, seeds, buffer_sizes,
/// tuning_budget, output_dir, threads, target_gap. Optional [System] and
/// [Agent] sections override the scenario preset.
ExperimentSpec parse_experiment(const IniDocument& doc);
ExperimentSpec parse_experiment_file(const std::string& path);
ExperimentSpec parse_experiment_text(const std::string& text, const std::string& source = "<string>");

/// Maps a sequential order (names, unique name prefixes or indices) onto
/// component indices. Empty order means component order.
std::vector<std::size_t> resolve_order(const std::vector<std::string>& order,
                                       const std::vector<std::string>& component_names);

}  // namespace coordtune
