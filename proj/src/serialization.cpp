#include "coordtune/serialization.hpp"

namespace coordtune {

using nlohmann::json;

void to_json(json& j, const ComponentId& v) { j = json{{"index", v.index}, {"name", v.name}}; }

void from_json(const json& j, ComponentId& v) {
  j.at("index").get_to(v.index);
  j.at("name").get_to(v.name);
}

void to_json(json& j, const Subspace& v) {
  j = json{{"kind", to_string(v.kind())}, {"dims", v.dims()}};
  switch (v.kind()) {
    case SubspaceKind::ContinuousBox:
      j["bounds"] = json{{"lower", v.lower()}, {"upper", v.upper()}};
      break;
    case SubspaceKind::BinarySet:
      if (v.constraint())
        j["constraint"] = json{{"weights", v.constraint()->weights}, {"capacity", v.constraint()->capacity}};
      break;
    case SubspaceKind::CategoricalTuple:
      j["cardinalities"] = v.cardinalities();
      break;
  }
}

void from_json(const json& j, Subspace& v) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "continuous-box") {
    v = Subspace::continuous_box(j.at("bounds").at("lower").get<std::vector<double>>(),
                                 j.at("bounds").at("upper").get<std::vector<double>>());
  } else if (kind == "binary-set") {
    std::optional<ResourceConstraint> c;
    if (j.contains("constraint"))
      c = ResourceConstraint{j["constraint"].at("weights").get<std::vector<double>>(),
                             j["constraint"].at("capacity").get<double>()};
    v = Subspace::binary_set(j.at("dims").get<std::size_t>(), std::move(c));
  } else if (kind == "categorical-tuple") {
    v = Subspace::categorical_tuple(j.at("cardinalities").get<std::vector<std::size_t>>());
  } else {
    throw std::invalid_argument("unknown subspace kind '" + kind + "'");
  }
}

void to_json(json& j, const Configuration& v) { j = json{{"component", v.component}, {"values", v.values}}; }

void from_json(const json& j, Configuration& v) {
  j.at("component").get_to(v.component);
  j.at("values").get_to(v.values);
}

void to_json(json& j, const JointConfiguration& v) { j = json{{"configurations", v.configurations}}; }

void from_json(const json& j, JointConfiguration& v) { j.at("configurations").get_to(v.configurations); }

void to_json(json& j, const ContextFeature& v) { j = json{{"values", v.values}, {"epoch_tag", v.epoch_tag}}; }

void from_json(const json& j, ContextFeature& v) {
  j.at("values").get_to(v.values);
  j.at("epoch_tag").get_to(v.epoch_tag);
}

void to_json(json& j, const EvaluationRecord& v) {
  j = json{{"context", v.context},
           {"configuration", v.configuration},
           {"performance", v.performance},
           {"cost", v.cost},
           {"epoch", v.epoch}};
}

void from_json(const json& j, EvaluationRecord& v) {
  j.at("context").get_to(v.context);
  j.at("configuration").get_to(v.configuration);
  j.at("performance").get_to(v.performance);
  j.at("cost").get_to(v.cost);
  j.at("epoch").get_to(v.epoch);
}

void to_json(json& j, const TransitionRecord& v) {
  j = json{{"state", v.state}, {"action", v.action}, {"next_state", v.next_state}, {"reward", v.reward}};
}

void from_json(const json& j, TransitionRecord& v) {
  j.at("state").get_to(v.state);
  j.at("action").get_to(v.action);
  j.at("next_state").get_to(v.next_state);
  j.at("reward").get_to(v.reward);
}

void to_json(json& j, const RewardHistory& v) { j = json{{"agent", v.agent()}, {"entries", v.entries()}}; }

void from_json(const json& j, RewardHistory& v) {
  v = RewardHistory(j.at("agent").get<ComponentId>(), j.at("entries").get<std::vector<double>>());
}

void to_json(json& j, const ComponentSpec& v) {
  j = json{{"id", v.id}, {"kind", to_string(v.kind)}, {"agent_name", v.agent_name}};
}

void from_json(const json& j, ComponentSpec& v) {
  j.at("id").get_to(v.id);
  v.kind = agent_kind_from_string(j.at("kind").get<std::string>());
  j.at("agent_name").get_to(v.agent_name);
}

void to_json(json& j, const TuningTask& v) {
  j = json{{"components", v.components},
           {"tuning_budget", v.tuning_budget},
           {"sub_budget", v.sub_budget},
           {"performance_metric", v.performance_metric},
           {"buffer_size", v.buffer_size},
           {"bootstrap_rounds", v.bootstrap_rounds},
           {"rfactor", v.rfactor ? json(*v.rfactor) : json(nullptr)},
           {"seed", v.seed}};
}

void from_json(const json& j, TuningTask& v) {
  j.at("components").get_to(v.components);
  j.at("tuning_budget").get_to(v.tuning_budget);
  j.at("sub_budget").get_to(v.sub_budget);
  j.at("performance_metric").get_to(v.performance_metric);
  j.at("buffer_size").get_to(v.buffer_size);
  j.at("bootstrap_rounds").get_to(v.bootstrap_rounds);
  if (j.contains("rfactor") && !j["rfactor"].is_null())
    v.rfactor = j["rfactor"].get<double>();
  else
    v.rfactor.reset();
  j.at("seed").get_to(v.seed);
}

}  // namespace coordtune
