#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coordtune/random.hpp"

namespace coordtune {

/// Identifies one tunable component of the target system. Indices are dense
/// 0..m-1 within a task.
struct ComponentId {
  std::size_t index = 0;
  std::string name;

  friend bool operator==(const ComponentId&, const ComponentId&) = default;
};

enum class SubspaceKind { ContinuousBox, BinarySet, CategoricalTuple };

/// Linear resource constraint on a binary set: sum(weight_d * bit_d) <= capacity.
struct ResourceConstraint {
  std::vector<double> weights;
  double capacity = 0.0;

  friend bool operator==(const ResourceConstraint&, const ResourceConstraint&) = default;
};

/// Domain of one component's settings. Construct through the factories, which
/// reject malformed domains with std::invalid_argument.
class Subspace {
 public:
  static Subspace continuous_box(std::vector<double> lower, std::vector<double> upper);
  static Subspace binary_set(std::size_t dims, std::optional<ResourceConstraint> constraint = std::nullopt);
  static Subspace categorical_tuple(std::vector<std::size_t> cardinalities);

  SubspaceKind kind() const { return kind_; }
  std::size_t dims() const { return dims_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<std::size_t>& cardinalities() const { return cardinalities_; }
  const std::optional<ResourceConstraint>& constraint() const { return constraint_; }

  /// Length of the real-valued surrogate encoding: one per continuous or
  /// binary dim, one-hot width per categorical position.
  std::size_t encoding_length() const;

  friend bool operator==(const Subspace&, const Subspace&) = default;

 private:
  Subspace() = default;

  SubspaceKind kind_ = SubspaceKind::ContinuousBox;
  std::size_t dims_ = 0;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<std::size_t> cardinalities_;
  std::optional<ResourceConstraint> constraint_;
};

std::string to_string(SubspaceKind kind);

/// Settings for one component. Values are reals for a continuous box, 0/1 for
/// a binary set and category indices for a categorical tuple.
struct Configuration {
  ComponentId component;
  std::vector<double> values;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

/// One configuration per component, stored in ComponentId order.
struct JointConfiguration {
  std::vector<Configuration> configurations;

  std::size_t size() const { return configurations.size(); }
  const Configuration& operator[](std::size_t i) const { return configurations[i]; }
  Configuration& operator[](std::size_t i) { return configurations[i]; }

  friend bool operator==(const JointConfiguration&, const JointConfiguration&) = default;
};

/// Normalized internal metrics describing the environment an agent tunes in.
struct ContextFeature {
  std::vector<double> values;
  std::int64_t epoch_tag = -1;

  friend bool operator==(const ContextFeature&, const ContextFeature&) = default;
};

/// Training row for BO and estimator-backed agents.
struct EvaluationRecord {
  ContextFeature context;
  Configuration configuration;
  double performance = 0.0;
  double cost = 0.0;
  std::uint64_t epoch = 0;

  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

/// Training row for RL agents; both state vectors are metrics ++ context.
struct TransitionRecord {
  std::vector<double> state;
  Configuration action;
  std::vector<double> next_state;
  double reward = 0.0;

  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

/// Append-only list of non-negative per-epoch rewards for one agent.
class RewardHistory {
 public:
  RewardHistory() = default;
  explicit RewardHistory(ComponentId agent, std::vector<double> entries = {});

  const ComponentId& agent() const { return agent_; }
  const std::vector<double>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Throws std::invalid_argument for negative or non-finite rewards.
  void append(double reward);

  friend bool operator==(const RewardHistory&, const RewardHistory&) = default;

 private:
  ComponentId agent_;
  std::vector<double> entries_;
};

enum class AgentKind { BO, RL, RLEstimator, RuleBased };

std::string to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string& name);

struct ComponentSpec {
  ComponentId id;
  AgentKind kind = AgentKind::BO;
  /// Name the user configured (may be an alias such as "OtterTune").
  std::string agent_name;

  friend bool operator==(const ComponentSpec&, const ComponentSpec&) = default;
};

struct TuningTask {
  std::vector<ComponentSpec> components;
  double tuning_budget = 0.0;
  double sub_budget = 0.0;
  std::string performance_metric = "execution-time";
  std::size_t buffer_size = 7;
  std::size_t bootstrap_rounds = 3;
  std::optional<double> rfactor;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when an invariant does not hold.
  void validate() const;

  friend bool operator==(const TuningTask&, const TuningTask&) = default;
};

/// Thrown when a configuration does not belong to its subspace.
class InvalidConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

bool validate(const Configuration& config, const Subspace& subspace);
bool validate(const JointConfiguration& joint, std::span<const Subspace> subspaces);

/// Sum of weights over set bits; 0 when the subspace has no constraint.
double resource_usage(std::span<const double> bits, const Subspace& subspace);

/// Lower bounds for a box, no bits set, category 0 everywhere.
Configuration default_configuration(const ComponentId& component, const Subspace& subspace);

/// Uniform draw. Binary sets are rejection-sampled against the constraint;
/// after 1000 rejections set bits are dropped at random until it holds.
std::vector<double> sample_uniform(const Subspace& subspace, Rng& rng);

/// Appends the surrogate encoding of `values` to `out`: box values and bits
/// as they are, categories one-hot.
void encode(std::span<const double> values, const Subspace& subspace, std::vector<double>& out);
std::vector<double> encode(std::span<const double> values, const Subspace& subspace);

/// Three discretization levels of a continuous dim, at 30%, 50% and 70% of
/// its range.
std::vector<double> grid_levels(const Subspace& subspace, std::size_t dim);

}  // namespace coordtune
