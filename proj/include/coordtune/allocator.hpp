#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coordtune/core.hpp"
#include "coordtune/random.hpp"

namespace coordtune {

enum class StrategyKind { TsBuffer, Ts, RoundRobin, Ucb, Sequential };

std::string to_string(StrategyKind kind);

/// Parses "ts_buffer", "ts", "round_robin", "ucb", "sequential" or
/// "sequential(i-k-q)". The order inside the parentheses is a dash separated
/// list of component names or indices; it is resolved later against the task.
struct StrategySpec {
  StrategyKind kind = StrategyKind::TsBuffer;
  std::vector<std::string> order;

  std::string label() const;
  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

StrategySpec parse_strategy(const std::string& text);

inline constexpr std::size_t kUnboundedBuffer = std::numeric_limits<std::size_t>::max();

struct BetaPosterior {
  std::uint64_t successes = 0;  // S
  std::uint64_t failures = 0;   // F

  friend bool operator==(const BetaPosterior&, const BetaPosterior&) = default;
};

/// S and F over the last `buffer_size` entries: a positive reward adds
/// round(reward / rfactor) successes (half away from zero), anything else one
/// failure.
BetaPosterior beta_posterior(std::span<const double> entries, std::size_t buffer_size, double rfactor);

/// Appends max(0, f_global - f_inc).
double record_reward(RewardHistory& history, double f_inc, double f_global);

/// max(rewards) / 20, or 1 when that is zero or there are no rewards.
double calibrate_rfactor(std::span<const double> bootstrap_rewards);

struct AllocationInput {
  std::span<const RewardHistory> histories;
  /// Latest known context per agent; used by ucb only and may be empty otherwise.
  std::span<const ContextFeature> contexts;
  /// Fraction of the main budget already spent, in [0, 1]; used by sequential.
  double budget_fraction = 0.0;
};

class BudgetAllocator {
 public:
  /// `order` is only read for sequential: a permutation of 0..m-1, or empty
  /// for component order.
  BudgetAllocator(StrategyKind strategy, std::size_t num_agents, std::size_t buffer_size, std::uint64_t seed,
                  std::vector<std::size_t> order = {});

  std::size_t select_agent(const AllocationInput& input);
  /// Feeds the contextual strategies; a no-op for the others.
  void observe(std::size_t agent, const ContextFeature& context, double reward);

  StrategyKind strategy() const { return strategy_; }
  std::size_t buffer_size() const { return buffer_size_; }
  double rfactor() const { return rfactor_; }
  void set_rfactor(double rfactor);
  std::size_t num_agents() const { return num_agents_; }
  const std::vector<std::size_t>& order() const { return order_; }

  /// Posterior of one agent as select_agent computes it.
  BetaPosterior posterior(const RewardHistory& history) const;

  static constexpr double kUcbRidge = 1.0;
  static constexpr double kUcbBeta = 1.0;

 private:
  std::size_t select_thompson(const AllocationInput& input);
  std::size_t select_ucb(const AllocationInput& input) const;

  StrategyKind strategy_;
  std::size_t num_agents_;
  std::size_t buffer_size_;
  double rfactor_ = 1.0;
  Rng rng_;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
  std::vector<std::vector<std::pair<std::vector<double>, double>>> ucb_data_;
};

}  // namespace coordtune
