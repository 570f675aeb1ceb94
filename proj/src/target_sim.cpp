#include "coordtune/target_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coordtune {

JointConfiguration TunableSystem::default_joint() const {
  JointConfiguration joint;
  for (std::size_t i = 0; i < components().size(); ++i)
    joint.configurations.push_back(default_configuration(components()[i], subspaces()[i]));
  return joint;
}

SyntheticSystem::SyntheticSystem(SyntheticSystemSpec spec) : spec_(std::move(spec)) {
  if (spec_.component_order.empty()) throw std::invalid_argument("synthetic system needs at least one component");
  if (spec_.metric_dims == 0) throw std::invalid_argument("metric_dims must be positive");
  if (!(spec_.eval_cost > 0.0)) throw std::invalid_argument("eval_cost must be positive");
  if (!(spec_.noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");

  Rng rng(derive_seed(spec_.seed, 0x5157));

  // Draw order is fixed regardless of which roles are present.
  gains_.resize(spec_.index_bits);
  std::vector<double> weights(spec_.index_bits);
  for (std::size_t d = 0; d < spec_.index_bits; ++d) {
    gains_[d] = rng.uniform(spec_.gain_min, spec_.gain_max);
    weights[d] = rng.uniform(0.5, 1.5);
  }
  for (double g : gains_) gain_total_ += g;
  double weight_total = 0.0;
  for (double w : weights) weight_total += w;

  query_costs_.resize(spec_.queries);
  speedups_.assign(spec_.queries, std::vector<double>(spec_.rewrites, 1.0));
  for (std::size_t q = 0; q < spec_.queries; ++q) {
    query_costs_[q] = rng.uniform(spec_.query_cost_min, spec_.query_cost_max);
    const std::size_t best = spec_.rewrites > 1 ? 1 + rng.index(spec_.rewrites - 1) : 0;
    for (std::size_t r = 1; r < spec_.rewrites; ++r)
      speedups_[q][r] = r == best ? rng.uniform(spec_.best_speedup_min, spec_.best_speedup_max)
                                  : rng.uniform(spec_.other_speedup_min, spec_.other_speedup_max);
  }

  for (const auto& role : spec_.component_order) {
    const std::size_t idx = components_.size();
    if (role == "index") {
      if (index_role_ >= 0 || spec_.index_bits == 0) throw std::invalid_argument("bad index component");
      index_role_ = static_cast<int>(idx);
      subspaces_.push_back(Subspace::binary_set(
          spec_.index_bits, ResourceConstraint{weights, spec_.capacity_fraction * weight_total}));
    } else if (role == "knob") {
      if (knob_role_ >= 0 || spec_.knob_dims == 0) throw std::invalid_argument("bad knob component");
      knob_role_ = static_cast<int>(idx);
      subspaces_.push_back(Subspace::continuous_box(std::vector<double>(spec_.knob_dims, 0.0),
                                                    std::vector<double>(spec_.knob_dims, 1.0)));
    } else if (role == "query") {
      if (query_role_ >= 0 || spec_.queries == 0) throw std::invalid_argument("bad query component");
      query_role_ = static_cast<int>(idx);
      subspaces_.push_back(Subspace::categorical_tuple(std::vector<std::size_t>(spec_.queries, spec_.rewrites)));
    } else {
      throw std::invalid_argument("unknown component role '" + role + "'");
    }
    components_.push_back(ComponentId{idx, role});
  }

  const std::size_t input_len = spec_.index_bits + spec_.knob_dims + spec_.queries + 1;
  projection_.assign(spec_.metric_dims, std::vector<double>(input_len));
  projection_bias_.resize(spec_.metric_dims);
  for (std::size_t m = 0; m < spec_.metric_dims; ++m) {
    for (double& w : projection_[m]) w = rng.normal();
    projection_bias_[m] = rng.normal(0.0, 0.5);
  }

  reference_performance_ = objective(default_joint());
  if (!(reference_performance_ > 0.0)) reference_performance_ = 1.0;
}

int SyntheticSystem::role_index(const std::string& role) const {
  if (role == "index") return index_role_;
  if (role == "knob") return knob_role_;
  if (role == "query") return query_role_;
  return -1;
}

std::vector<double> SyntheticSystem::role_values(const JointConfiguration& joint, int role) const {
  if (role < 0) return {};
  return joint[static_cast<std::size_t>(role)].values;
}

std::size_t SyntheticSystem::controlling_bit(std::size_t knob_dim) const {
  if (index_role_ < 0) return 0;
  const std::size_t d = knob_dim + 1;
  // ceil(d * nb / dk)
  return (d * spec_.index_bits + spec_.knob_dims - 1) / spec_.knob_dims;
}

std::vector<double> SyntheticSystem::knob_optimum(std::span<const double> bits) const {
  std::vector<double> mu(spec_.knob_dims, 0.7);
  if (bits.empty()) return mu;
  for (std::size_t d = 0; d < spec_.knob_dims; ++d) {
    const std::size_t bit = controlling_bit(d);
    if (bit > 0 && bits[bit - 1] != 0.0) mu[d] = 0.3;
  }
  return mu;
}

double SyntheticSystem::knob_term(std::span<const double> knobs, std::span<const double> bits) const {
  if (knobs.empty()) return 0.0;
  const auto mu = knob_optimum(bits);
  double sum = 0.0;
  for (std::size_t d = 0; d < knobs.size(); ++d) sum += (knobs[d] - mu[d]) * (knobs[d] - mu[d]);
  return sum;
}

double SyntheticSystem::index_term(std::span<const double> bits) const {
  if (bits.empty()) return 0.0;
  double linear = 0.0;
  double pairwise = 0.0;
  double prefix = 0.0;
  for (std::size_t d = 0; d < bits.size(); ++d) {
    if (bits[d] == 0.0) continue;
    linear += gains_[d];
    pairwise += gains_[d] * prefix;
    prefix += gains_[d];
  }
  return gain_total_ - linear + spec_.diminishing * pairwise / gain_total_;
}

double SyntheticSystem::query_term(std::span<const double> rewrites) const {
  double sum = 0.0;
  for (std::size_t q = 0; q < rewrites.size(); ++q)
    sum += query_costs_[q] * speedups_[q][static_cast<std::size_t>(rewrites[q])];
  return sum;
}

double SyntheticSystem::objective(const JointConfiguration& joint) const {
  if (!validate(joint, subspaces_)) throw InvalidConfigurationError("joint configuration is not valid for the system");
  const auto bits = role_values(joint, index_role_);
  return knob_term(role_values(joint, knob_role_), bits) + index_term(bits) +
         query_term(role_values(joint, query_role_));
}

std::vector<double> SyntheticSystem::internal_metrics(const JointConfiguration& joint) const {
  const double f = objective(joint);
  std::vector<double> x;
  x.reserve(projection_.front().size());
  const auto bits = role_values(joint, index_role_);
  const auto knobs = role_values(joint, knob_role_);
  const auto rewrites = role_values(joint, query_role_);
  for (std::size_t d = 0; d < spec_.index_bits; ++d) x.push_back(d < bits.size() ? bits[d] : 0.0);
  for (std::size_t d = 0; d < spec_.knob_dims; ++d) x.push_back(d < knobs.size() ? knobs[d] : 0.0);
  for (std::size_t q = 0; q < spec_.queries; ++q)
    x.push_back(q < rewrites.size() ? rewrites[q] / static_cast<double>(spec_.rewrites - 1) : 0.0);
  x.push_back(f / reference_performance_);

  std::vector<double> metrics(spec_.metric_dims);
  for (std::size_t m = 0; m < spec_.metric_dims; ++m) {
    double z = projection_bias_[m];
    for (std::size_t j = 0; j < x.size(); ++j) z += projection_[m][j] * x[j];
    z = std::clamp(z, -30.0, 30.0);
    metrics[m] = 1.0 / (1.0 + std::exp(-z));
  }
  return metrics;
}

Evaluation SyntheticSystem::evaluate(const JointConfiguration& joint) const {
  Evaluation e;
  e.performance = objective(joint);
  e.metrics = internal_metrics(joint);
  if (spec_.noise_sigma > 0.0) {
    Rng noise(derive_seed(spec_.seed ^ 0x6e6f697365ULL, noise_counter_.fetch_add(1)));
    e.performance += noise.normal(0.0, spec_.noise_sigma);
  }
  e.cost = spec_.eval_cost;
  return e;
}

namespace {

struct GridAxes {
  std::vector<std::vector<std::vector<double>>> per_component;
};

// Odometer over a mixed-radix tuple.
bool advance(std::vector<std::size_t>& digits, const std::vector<std::size_t>& radix) {
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (++digits[i] < radix[i]) return true;
    digits[i] = 0;
  }
  return false;
}

std::vector<std::vector<double>> enumerate_subspace(const Subspace& s, std::size_t cap) {
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> radix(s.dims());
  std::vector<std::vector<double>> levels(s.dims());
  for (std::size_t d = 0; d < s.dims(); ++d) {
    switch (s.kind()) {
      case SubspaceKind::ContinuousBox: levels[d] = grid_levels(s, d); break;
      case SubspaceKind::BinarySet: levels[d] = {0.0, 1.0}; break;
      case SubspaceKind::CategoricalTuple:
        for (std::size_t c = 0; c < s.cardinalities()[d]; ++c) levels[d].push_back(static_cast<double>(c));
        break;
    }
    radix[d] = levels[d].size();
  }
  double raw = 1.0;
  for (std::size_t r : radix) raw *= static_cast<double>(r);
  if (raw > static_cast<double>(cap) && !(s.kind() == SubspaceKind::BinarySet && s.dims() <= 24))
    throw std::length_error("grid enumeration exceeds the cap");

  std::vector<std::size_t> digits(s.dims(), 0);
  Configuration probe;
  probe.values.resize(s.dims());
  do {
    for (std::size_t d = 0; d < s.dims(); ++d) probe.values[d] = levels[d][digits[d]];
    if (validate(probe, s)) {
      out.push_back(probe.values);
      if (out.size() > cap) throw std::length_error("grid enumeration exceeds the cap");
    }
  } while (advance(digits, radix));
  return out;
}

GridAxes build_axes(const SyntheticSystem& system, std::size_t cap) {
  GridAxes axes;
  double total = 1.0;
  for (const auto& s : system.subspaces()) {
    axes.per_component.push_back(enumerate_subspace(s, cap));
    total *= static_cast<double>(axes.per_component.back().size());
    if (total > static_cast<double>(cap)) throw std::length_error("grid enumeration exceeds the cap");
  }
  return axes;
}

}  // namespace

std::size_t grid_cardinality(const SyntheticSystem& system, std::size_t enumeration_cap) {
  const auto axes = build_axes(system, enumeration_cap);
  std::size_t total = 1;
  for (const auto& a : axes.per_component) total *= a.size();
  return total;
}

GridResult grid_optimum(const SyntheticSystem& system, std::size_t enumeration_cap) {
  const auto axes = build_axes(system, enumeration_cap);
  std::vector<std::size_t> radix;
  for (const auto& a : axes.per_component) radix.push_back(a.size());

  GridResult result;
  result.value = std::numeric_limits<double>::infinity();
  JointConfiguration joint = system.default_joint();
  std::vector<std::size_t> digits(radix.size(), 0);
  do {
    for (std::size_t i = 0; i < digits.size(); ++i) joint[i].values = axes.per_component[i][digits[i]];
    const double f = system.objective(joint);
    ++result.evaluations;
    if (f < result.value) {
      result.value = f;
      result.best = joint;
    }
  } while (advance(digits, radix));
  return result;
}

}  // namespace coordtune
