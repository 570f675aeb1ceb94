#include "coordtune/core.hpp"

#include <algorithm>
#include <cmath>

namespace coordtune {

Subspace Subspace::continuous_box(std::vector<double> lower, std::vector<double> upper) {
  if (lower.empty() || lower.size() != upper.size())
    throw std::invalid_argument("continuous box needs matching, non-empty bounds");
  for (std::size_t d = 0; d < lower.size(); ++d) {
    if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]) || !(lower[d] < upper[d]))
      throw std::invalid_argument("continuous box needs lower < upper in every dimension");
  }
  Subspace s;
  s.kind_ = SubspaceKind::ContinuousBox;
  s.dims_ = lower.size();
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

Subspace Subspace::binary_set(std::size_t dims, std::optional<ResourceConstraint> constraint) {
  if (dims == 0) throw std::invalid_argument("binary set needs at least one dimension");
  if (constraint) {
    if (constraint->weights.size() != dims)
      throw std::invalid_argument("resource constraint needs one weight per bit");
    if (!(constraint->capacity >= 0.0) || !std::isfinite(constraint->capacity))
      throw std::invalid_argument("resource capacity must be finite and non-negative");
    for (double w : constraint->weights)
      if (!(w >= 0.0) || !std::isfinite(w))
        throw std::invalid_argument("resource weights must be finite and non-negative");
  }
  Subspace s;
  s.kind_ = SubspaceKind::BinarySet;
  s.dims_ = dims;
  s.constraint_ = std::move(constraint);
  return s;
}

Subspace Subspace::categorical_tuple(std::vector<std::size_t> cardinalities) {
  if (cardinalities.empty()) throw std::invalid_argument("categorical tuple needs at least one position");
  for (std::size_t c : cardinalities)
    if (c < 2) throw std::invalid_argument("every categorical position needs at least two choices");
  Subspace s;
  s.kind_ = SubspaceKind::CategoricalTuple;
  s.dims_ = cardinalities.size();
  s.cardinalities_ = std::move(cardinalities);
  return s;
}

std::size_t Subspace::encoding_length() const {
  if (kind_ == SubspaceKind::CategoricalTuple) {
    std::size_t n = 0;
    for (std::size_t c : cardinalities_) n += c;
    return n;
  }
  return dims_;
}

std::string to_string(SubspaceKind kind) {
  switch (kind) {
    case SubspaceKind::ContinuousBox: return "continuous-box";
    case SubspaceKind::BinarySet: return "binary-set";
    case SubspaceKind::CategoricalTuple: return "categorical-tuple";
  }
  return "unknown";
}

RewardHistory::RewardHistory(ComponentId agent, std::vector<double> entries) : agent_(std::move(agent)) {
  for (double r : entries) append(r);
}

void RewardHistory::append(double reward) {
  if (!std::isfinite(reward) || reward < 0.0)
    throw std::invalid_argument("rewards must be finite and non-negative");
  entries_.push_back(reward);
}

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::BO: return "BO";
    case AgentKind::RL: return "RL";
    case AgentKind::RLEstimator: return "RLEstimator";
    case AgentKind::RuleBased: return "RuleBased";
  }
  return "unknown";
}

AgentKind agent_kind_from_string(const std::string& name) {
  if (name == "BO") return AgentKind::BO;
  if (name == "RL") return AgentKind::RL;
  if (name == "RLEstimator") return AgentKind::RLEstimator;
  if (name == "RuleBased") return AgentKind::RuleBased;
  throw std::invalid_argument("unknown agent kind '" + name + "'");
}

void TuningTask::validate() const {
  if (components.empty()) throw std::invalid_argument("task has no components");
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (components[i].id.index != i)
      throw std::invalid_argument("component indices must be dense 0..m-1 in order");
    for (std::size_t j = 0; j < i; ++j)
      if (components[j].id.name == components[i].id.name)
        throw std::invalid_argument("duplicate component '" + components[i].id.name + "'");
  }
  if (!(tuning_budget > 0.0)) throw std::invalid_argument("tuning_budget must be positive");
  if (!(sub_budget > 0.0)) throw std::invalid_argument("sub_budget must be positive");
  if (sub_budget > tuning_budget) throw std::invalid_argument("sub_budget exceeds tuning_budget");
  if (buffer_size == 0) throw std::invalid_argument("buffer_size must be at least 1");
  if (bootstrap_rounds == 0) throw std::invalid_argument("bootstrap_rounds must be at least 1");
  if (rfactor && !(*rfactor > 0.0)) throw std::invalid_argument("rfactor must be positive");
}

double resource_usage(std::span<const double> bits, const Subspace& subspace) {
  if (!subspace.constraint()) return 0.0;
  const auto& w = subspace.constraint()->weights;
  double used = 0.0;
  for (std::size_t d = 0; d < bits.size() && d < w.size(); ++d)
    if (bits[d] != 0.0) used += w[d];
  return used;
}

bool validate(const Configuration& config, const Subspace& subspace) {
  const auto& v = config.values;
  if (v.size() != subspace.dims()) return false;
  switch (subspace.kind()) {
    case SubspaceKind::ContinuousBox:
      for (std::size_t d = 0; d < v.size(); ++d)
        if (!std::isfinite(v[d]) || v[d] < subspace.lower()[d] || v[d] > subspace.upper()[d]) return false;
      return true;
    case SubspaceKind::BinarySet:
      for (double b : v)
        if (b != 0.0 && b != 1.0) return false;
      if (subspace.constraint()) return resource_usage(v, subspace) <= subspace.constraint()->capacity;
      return true;
    case SubspaceKind::CategoricalTuple:
      for (std::size_t d = 0; d < v.size(); ++d) {
        if (!std::isfinite(v[d]) || v[d] < 0.0 || v[d] != std::floor(v[d])) return false;
        if (v[d] >= static_cast<double>(subspace.cardinalities()[d])) return false;
      }
      return true;
  }
  return false;
}

bool validate(const JointConfiguration& joint, std::span<const Subspace> subspaces) {
  if (joint.size() != subspaces.size()) return false;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i].component.index != i) return false;
    if (!validate(joint[i], subspaces[i])) return false;
  }
  return true;
}

Configuration default_configuration(const ComponentId& component, const Subspace& subspace) {
  Configuration c{component, {}};
  if (subspace.kind() == SubspaceKind::ContinuousBox)
    c.values = subspace.lower();
  else
    c.values.assign(subspace.dims(), 0.0);
  return c;
}

std::vector<double> sample_uniform(const Subspace& subspace, Rng& rng) {
  std::vector<double> v(subspace.dims());
  switch (subspace.kind()) {
    case SubspaceKind::ContinuousBox:
      for (std::size_t d = 0; d < v.size(); ++d) v[d] = rng.uniform(subspace.lower()[d], subspace.upper()[d]);
      return v;
    case SubspaceKind::CategoricalTuple:
      for (std::size_t d = 0; d < v.size(); ++d)
        v[d] = static_cast<double>(rng.index(subspace.cardinalities()[d]));
      return v;
    case SubspaceKind::BinarySet: {
      const auto& constraint = subspace.constraint();
      for (int attempt = 0; attempt < 1000; ++attempt) {
        for (double& b : v) b = rng.bernoulli(0.5) ? 1.0 : 0.0;
        if (!constraint || resource_usage(v, subspace) <= constraint->capacity) return v;
      }
      // Repair: drop random set bits until feasible.
      while (resource_usage(v, subspace) > constraint->capacity) {
        std::vector<std::size_t> set;
        for (std::size_t d = 0; d < v.size(); ++d)
          if (v[d] != 0.0) set.push_back(d);
        v[set[rng.index(set.size())]] = 0.0;
      }
      return v;
    }
  }
  return v;
}

void encode(std::span<const double> values, const Subspace& subspace, std::vector<double>& out) {
  if (subspace.kind() != SubspaceKind::CategoricalTuple) {
    out.insert(out.end(), values.begin(), values.end());
    return;
  }
  for (std::size_t d = 0; d < values.size(); ++d) {
    const std::size_t card = subspace.cardinalities()[d];
    const auto choice = static_cast<std::size_t>(values[d]);
    for (std::size_t c = 0; c < card; ++c) out.push_back(c == choice ? 1.0 : 0.0);
  }
}

std::vector<double> encode(std::span<const double> values, const Subspace& subspace) {
  std::vector<double> out;
  out.reserve(subspace.encoding_length());
  encode(values, subspace, out);
  return out;
}

std::vector<double> grid_levels(const Subspace& subspace, std::size_t dim) {
  const double lo = subspace.lower().at(dim);
  const double span = subspace.upper().at(dim) - lo;
  return {lo + 0.3 * span, lo + 0.5 * span, lo + 0.7 * span};
}

}  // namespace coordtune
