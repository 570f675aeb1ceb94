#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coordtune/agents.hpp"
#include "coordtune/allocator.hpp"
#include "coordtune/core.hpp"
#include "coordtune/target_sim.hpp"

namespace coordtune {

struct EpochRecord {
  std::uint64_t epoch = 0;
  std::size_t agent = 0;
  std::string agent_name;
  bool bootstrap = false;
  /// Budget charged for the agent's run (the full sub-budget when it failed).
  double agent_cost = 0.0;
  /// Budget charged for measuring the agent's context (0 when cached).
  double context_cost = 0.0;
  std::size_t evaluations = 0;
  std::size_t context_evaluations = 0;
  double f_inc = 0.0;
  double reward = 0.0;
  double f_global_before = 0.0;
  double f_global_after = 0.0;
  bool improved = false;
  bool failed = false;
  std::string error;
  /// epoch_tag of the context the agent ran with.
  std::int64_t context_tag = -1;
  /// epoch_tag of every agent's cached context after the epoch, -1 when stale.
  std::vector<std::int64_t> context_tags;

  double cost() const { return agent_cost + context_cost; }
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TuningTrace {
  std::vector<std::string> component_names;
  std::vector<std::string> agent_names;
  std::string strategy;
  std::size_t buffer_size = 0;
  std::uint64_t seed = 0;
  double tuning_budget = 0.0;
  double sub_budget = 0.0;
  double eval_cost = 0.0;
  double initial_cost = 0.0;
  double initial_performance = 0.0;
  std::optional<double> rfactor;
  std::vector<EpochRecord> epochs;

  /// initial_cost plus every epoch's cost.
  double total_cost() const;
  /// Number of system evaluations charged so far, including the initial one.
  std::size_t total_evaluations() const;

  friend bool operator==(const TuningTrace&, const TuningTrace&) = default;
};

struct TuningResult {
  JointConfiguration incumbent;
  double f_global = 0.0;
  TuningTrace trace;
};

/// Alternating multi-agent tuning loop. Owns the agents and allocator for the
/// lifetime of one task; evaluations are issued strictly one at a time.
class Coordinator {
 public:
  /// Bandit strategies (ts_buffer, ts, ucb) start with bootstrap_rounds of
  /// round-robin epochs; round_robin and sequential follow their own schedule
  /// from the first epoch.
  Coordinator(TuningTask task, const TunableSystem& system, std::vector<std::unique_ptr<Agent>> agents,
              BudgetAllocator allocator);

  TuningResult tune();

  /// Internal metrics with the other components at their incumbents and this
  /// one at its default. Served from cache until update_message invalidates it.
  const ContextFeature& get_message(std::size_t agent);
  /// Invalidates the cached context of every agent except `changed`.
  void update_message(std::size_t changed);

  double f_global() const { return f_global_; }
  const JointConfiguration& incumbent() const { return incumbent_; }
  double budget_remaining() const { return budget_remaining_; }
  std::uint64_t epoch() const { return epoch_; }
  const std::vector<RewardHistory>& histories() const { return histories_; }
  const TuningTrace& trace() const { return trace_; }
  const BudgetAllocator& allocator() const { return allocator_; }
  bool has_cached_context(std::size_t agent) const { return contexts_.at(agent).has_value(); }
  std::size_t bootstrap_epochs() const;

 private:
  void initialize();
  void run_epoch();
  Evaluation charge(const JointConfiguration& joint);

  TuningTask task_;
  const TunableSystem& system_;
  std::vector<std::unique_ptr<Agent>> agents_;
  BudgetAllocator allocator_;

  bool initialized_ = false;
  double f_global_ = 0.0;
  JointConfiguration incumbent_;
  Evaluation incumbent_evaluation_;
  std::vector<std::optional<ContextFeature>> contexts_;
  std::vector<ContextFeature> last_contexts_;
  std::vector<RewardHistory> histories_;
  std::vector<double> bootstrap_rewards_;
  double budget_remaining_ = 0.0;
  double last_message_cost_ = 0.0;
  std::uint64_t epoch_ = 0;
  TuningTrace trace_;
};

/// Builds one agent per task component with the system's metric width as
/// context length. Component names and order must match the system.
std::vector<std::unique_ptr<Agent>> build_agents(const TuningTask& task, const TunableSystem& system,
                                                 const AgentSettings& settings);

/// Plain BO over the concatenation of every subspace under the same budget
/// rules as Coordinator::tune (initial default evaluation charged, epochs of
/// one sub-budget while the budget lasts). No context is used.
TuningResult tune_joint(const TuningTask& task, const TunableSystem& system, const AgentSettings& settings);

}  // namespace coordtune
