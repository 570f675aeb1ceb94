#pragma once

#include <string>

#include <json.hpp>

#include "coordtune/core.hpp"

// JSON text is the canonical record format; field names follow the C++
// member names. Doubles are written in shortest round-trip form, so values
// survive a write/read cycle bit-exactly.
namespace coordtune {

void to_json(nlohmann::json& j, const ComponentId& v);
void from_json(const nlohmann::json& j, ComponentId& v);

void to_json(nlohmann::json& j, const Subspace& v);
void from_json(const nlohmann::json& j, Subspace& v);

void to_json(nlohmann::json& j, const Configuration& v);
void from_json(const nlohmann::json& j, Configuration& v);

void to_json(nlohmann::json& j, const JointConfiguration& v);
void from_json(const nlohmann::json& j, JointConfiguration& v);

void to_json(nlohmann::json& j, const ContextFeature& v);
void from_json(const nlohmann::json& j, ContextFeature& v);

void to_json(nlohmann::json& j, const EvaluationRecord& v);
void from_json(const nlohmann::json& j, EvaluationRecord& v);

void to_json(nlohmann::json& j, const TransitionRecord& v);
void from_json(const nlohmann::json& j, TransitionRecord& v);

void to_json(nlohmann::json& j, const RewardHistory& v);
void from_json(const nlohmann::json& j, RewardHistory& v);

void to_json(nlohmann::json& j, const ComponentSpec& v);
void from_json(const nlohmann::json& j, ComponentSpec& v);

void to_json(nlohmann::json& j, const TuningTask& v);
void from_json(const nlohmann::json& j, TuningTask& v);

/// One-line document for any type above.
template <typename T>
std::string to_text(const T& value) {
  return nlohmann::json(value).dump();
}

template <typename T>
T from_text(const std::string& text) {
  return nlohmann::json::parse(text).get<T>();
}

}  // namespace coordtune

// Subspace has no public default constructor, so json::get needs a
// serializer that returns by value.
template <>
struct nlohmann::adl_serializer<coordtune::Subspace> {
  static coordtune::Subspace from_json(const nlohmann::json& j) {
    coordtune::Subspace s = coordtune::Subspace::binary_set(1);
    coordtune::from_json(j, s);
    return s;
  }
  static void to_json(nlohmann::json& j, const coordtune::Subspace& s) { coordtune::to_json(j, s); }
};
