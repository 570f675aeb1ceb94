#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "coordtune/core.hpp"

namespace coordtune {

/// Result of running a joint configuration on the target system.
struct Evaluation {
  double performance = 0.0;  // lower is better
  std::vector<double> metrics;
  double cost = 0.0;
};

/// A multi-component system that can be configured and stress-tested.
class TunableSystem {
 public:
  virtual ~TunableSystem() = default;

  virtual const std::vector<ComponentId>& components() const = 0;
  virtual const std::vector<Subspace>& subspaces() const = 0;
  virtual std::size_t metric_dims() const = 0;
  virtual double eval_cost() const = 0;

  /// Throws InvalidConfigurationError (no cost) when `joint` is not valid.
  virtual Evaluation evaluate(const JointConfiguration& joint) const = 0;

  JointConfiguration default_joint() const;
  std::size_t num_components() const { return components().size(); }
};

/// Parameters of the synthetic system. Component roles are "index", "knob" and
/// "query"; a role not listed in `component_order` is absent.
struct SyntheticSystemSpec {
  std::vector<std::string> component_order{"index", "knob", "query"};
  std::size_t knob_dims = 5;
  std::size_t index_bits = 10;
  std::size_t queries = 4;
  std::size_t rewrites = 4;
  /// capacity = capacity_fraction * sum of index weights
  double capacity_fraction = 0.5;
  /// lambda in the pairwise diminishing-returns term of the index cost
  double diminishing = 0.3;
  std::size_t metric_dims = 8;
  double noise_sigma = 0.0;
  double eval_cost = 120.0;
  std::uint64_t seed = 0;

  double gain_min = 0.5;
  double gain_max = 1.5;
  double query_cost_min = 0.2;
  double query_cost_max = 0.6;
  double best_speedup_min = 0.3;
  double best_speedup_max = 0.6;
  double other_speedup_min = 0.75;
  double other_speedup_max = 1.0;
};

/// Deterministic stand-in for a DBMS with three coupled components:
///
///   f = sum_d (k_d - mu_d(I))^2
///     + B - sum_d g_d I_d + lambda * sum_{d<e} g_d g_e I_d I_e / B
///     + sum_q c_q s_{q, Q_q}
///
/// where mu_d(I) = 0.3 if index bit ceil(d * nb / dk) (1-based) is set and 0.7
/// otherwise, B = sum_d g_d. Gains g, weights w, query costs c and speedups s
/// are drawn once from the seed. Rewrite 0 of every query is the unmodified
/// query (speedup 1).
class SyntheticSystem final : public TunableSystem {
 public:
  explicit SyntheticSystem(SyntheticSystemSpec spec);

  const std::vector<ComponentId>& components() const override { return components_; }
  const std::vector<Subspace>& subspaces() const override { return subspaces_; }
  std::size_t metric_dims() const override { return spec_.metric_dims; }
  double eval_cost() const override { return spec_.eval_cost; }
  Evaluation evaluate(const JointConfiguration& joint) const override;

  /// Noise-free objective.
  double objective(const JointConfiguration& joint) const;
  /// Each metric is sigmoid(W x + b) over (index bits, knob values, normalized
  /// query choices, f / f_default) with W, b drawn from the seed.
  std::vector<double> internal_metrics(const JointConfiguration& joint) const;

  const SyntheticSystemSpec& spec() const { return spec_; }

  // Term-level access for oracles and tests. Missing roles contribute 0.
  double knob_term(std::span<const double> knobs, std::span<const double> bits) const;
  double index_term(std::span<const double> bits) const;
  double query_term(std::span<const double> rewrites) const;
  /// mu(I) for every knob dim.
  std::vector<double> knob_optimum(std::span<const double> bits) const;
  /// 1-based index bit that controls knob dim d (0-based), or 0 without an index component.
  std::size_t controlling_bit(std::size_t knob_dim) const;

  const std::vector<double>& gains() const { return gains_; }
  const std::vector<double>& query_costs() const { return query_costs_; }
  const std::vector<std::vector<double>>& speedups() const { return speedups_; }

  /// Component index of a role, or -1 when absent.
  int role_index(const std::string& role) const;

 private:
  std::vector<double> role_values(const JointConfiguration& joint, int role) const;

  SyntheticSystemSpec spec_;
  std::vector<ComponentId> components_;
  std::vector<Subspace> subspaces_;
  int index_role_ = -1;
  int knob_role_ = -1;
  int query_role_ = -1;

  std::vector<double> gains_;
  double gain_total_ = 0.0;
  std::vector<double> query_costs_;
  std::vector<std::vector<double>> speedups_;
  std::vector<std::vector<double>> projection_;
  std::vector<double> projection_bias_;
  double reference_performance_ = 1.0;
  mutable std::atomic<std::uint64_t> noise_counter_{0};
};

struct GridResult {
  JointConfiguration best;
  double value = 0.0;
  std::size_t evaluations = 0;
};

/// Exhaustive search over the discretized joint space: three grid_levels per
/// continuous dim, every feasible bit pattern, every rewrite tuple. Throws
/// std::length_error when the space holds more than `enumeration_cap` points.
GridResult grid_optimum(const SyntheticSystem& system, std::size_t enumeration_cap = 1'000'000);

/// Number of points grid_optimum would enumerate.
std::size_t grid_cardinality(const SyntheticSystem& system, std::size_t enumeration_cap = 1'000'000);

}  // namespace coordtune
