#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "coordtune/core.hpp"
#include "coordtune/gaussian_process.hpp"
#include "coordtune/target_sim.hpp"

namespace coordtune {

/// Evaluates settings of one component while every other component stays at
/// its incumbent value. Supplied to agents by whoever drives them.
class ComponentEvaluator {
 public:
  virtual ~ComponentEvaluator() = default;

  /// Charges one evaluation cost. Throws InvalidConfigurationError without
  /// charging if the system rejects the configuration.
  virtual Evaluation evaluate(const Configuration& config) = 0;
  virtual const Configuration& incumbent() const = 0;
  virtual const Evaluation& incumbent_evaluation() const = 0;
  virtual double eval_cost() const = 0;
  virtual std::uint64_t epoch() const { return 0; }
};

struct AgentSettings {
  // BO and estimator surrogate
  std::size_t candidates = 2000;
  std::size_t refit_every = 5;
  int refit_iterations = 40;
  // tabular Q-learning
  std::size_t buckets = 3;
  double epsilon = 0.2;
  double epsilon_decay = 0.99;
  double learning_rate = 0.1;
  double discount = 0.9;
  // RL-estimator internal episodes; episode_length 0 means one step per dim
  std::size_t episodes = 20;
  std::size_t episode_length = 0;
  // system rejections tolerated per suggestion before a random fallback
  std::size_t max_rejections = 10;
};

struct AgentRunResult {
  Configuration best;
  Evaluation best_evaluation;
  std::size_t evaluations = 0;
  double cost = 0.0;
};

/// Number of evaluations a sub-budget pays for.
std::size_t evaluations_in(double sub_budget, double eval_cost);

/// Single-dimension moves away from `from`: other grid levels per continuous
/// dim, feasible bit flips, other categories per position.
std::vector<std::vector<double>> neighbor_moves(const Subspace& subspace, std::span<const double> from);

/// Bucket index of each coordinate of a vector in [0, 1], joined into a key.
std::string bucket_key(std::span<const double> values, std::size_t buckets);
/// Exact key of a configuration's values.
std::string values_key(std::span<const double> values);

/// Tabular Q function. Unvisited actions count as 0.
class QTable {
 public:
  double value(const std::string& state, const std::string& action) const;
  /// max over actions of Q(state, .), at least 0.
  double max_value(const std::string& state) const;
  /// Q(s,a) += alpha * (reward + gamma * max Q(s',.) - Q(s,a))
  void update(const std::string& state, const std::string& action, double reward, const std::string& next_state,
              double alpha, double gamma);
  void set(const std::string& state, const std::string& action, double q);
  std::size_t size() const;
  void clear() { table_.clear(); }

 private:
  std::unordered_map<std::string, std::unordered_map<std::string, double>> table_;
};

/// Max-priority queue of configurations keyed by surrogate uncertainty. Equal
/// priorities leave in insertion order; duplicates of a queued configuration
/// are ignored.
class UncertaintyQueue {
 public:
  bool push(Configuration config, double priority);
  std::optional<Configuration> pop();
  void reprioritize(const std::function<double(const Configuration&)>& priority);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  struct Entry {
    Configuration config;
    double priority;
    std::uint64_t sequence;
  };
  std::vector<Entry> entries_;
  std::uint64_t next_sequence_ = 0;
};

/// GP surrogate + expected improvement over a product of subspaces, with
/// uniform candidate sampling. Inputs are context ++ encoding of every part.
class BayesianSearch {
 public:
  BayesianSearch(std::vector<Subspace> parts, std::size_t context_dims, AgentSettings settings, std::uint64_t seed);

  using Point = std::vector<std::vector<double>>;

  /// Argmax EI over `settings.candidates` uniform candidates, skipping inputs
  /// already in the training set; uniform random when the model is empty or
  /// the posterior is degenerate.
  Point suggest(std::span<const double> context);
  void update(std::span<const double> context, const Point& point, double performance);

  double acquisition(std::span<const double> context, const Point& point) const;
  std::vector<double> input(std::span<const double> context, const Point& point) const;
  Point sample_uniform_point();

  const GaussianProcess& surrogate() const { return gp_; }
  GaussianProcess& surrogate() { return gp_; }
  const std::vector<Subspace>& parts() const { return parts_; }
  std::size_t context_dims() const { return context_dims_; }
  std::size_t input_dims() const { return input_dims_; }
  void reset();

 private:
  std::vector<Subspace> parts_;
  std::size_t context_dims_;
  std::size_t input_dims_;
  AgentSettings settings_;
  Rng rng_;
  GaussianProcess gp_;
  std::set<std::vector<double>> seen_;
};

/// Common base of all tuning agents. InitModel / Suggest / UpdatePolicy (and
/// UpdateEstimator where applicable) live on the concrete classes; `run`
/// spends one sub-budget and reports the best configuration it evaluated.
class Agent {
 public:
  Agent(ComponentId component, Subspace subspace, std::size_t context_dims, AgentSettings settings,
        std::uint64_t seed);
  virtual ~Agent() = default;

  virtual AgentKind kind() const = 0;
  virtual void init_model() = 0;
  virtual AgentRunResult run(const ContextFeature& context, double sub_budget, ComponentEvaluator& evaluator) = 0;

  const ComponentId& component() const { return component_; }
  const Subspace& subspace() const { return subspace_; }
  std::size_t context_dims() const { return context_dims_; }
  const AgentSettings& settings() const { return settings_; }

 protected:
  /// Evaluates `suggest()`; each rejection asks for a new suggestion, and
  /// after max_rejections a uniform random configuration is used instead.
  std::pair<Configuration, Evaluation> evaluate_suggestion(ComponentEvaluator& evaluator,
                                                           const std::function<Configuration()>& suggest);
  Configuration random_configuration();
  void check_context(const ContextFeature& context) const;

  ComponentId component_;
  Subspace subspace_;
  std::size_t context_dims_;
  AgentSettings settings_;
  Rng rng_;
};

class BOAgent final : public Agent {
 public:
  BOAgent(ComponentId component, Subspace subspace, std::size_t context_dims, AgentSettings settings,
          std::uint64_t seed);

  AgentKind kind() const override { return AgentKind::BO; }
  void init_model() override;
  AgentRunResult run(const ContextFeature& context, double sub_budget, ComponentEvaluator& evaluator) override;

  Configuration suggest(const ContextFeature& context);
  /// Throws std::invalid_argument for a foreign component or non-finite performance.
  void update_policy(const EvaluationRecord& record);

  double expected_improvement(const ContextFeature& context, const Configuration& config) const;
  const std::vector<EvaluationRecord>& training_rows() const { return rows_; }
  const BayesianSearch& search() const { return search_; }
  BayesianSearch& search() { return search_; }

 private:
  BayesianSearch search_;
  std::vector<EvaluationRecord> rows_;
};

class RLAgent final : public Agent {
 public:
  RLAgent(ComponentId component, Subspace subspace, std::size_t context_dims, AgentSettings settings,
          std::uint64_t seed);

  AgentKind kind() const override { return AgentKind::RL; }
  void init_model() override;
  AgentRunResult run(const ContextFeature& context, double sub_budget, ComponentEvaluator& evaluator) override;

  /// Epsilon-greedy over neighbor_moves(position()); state = metrics ++ context.
  Configuration suggest(const ContextFeature& context, std::span<const double> state_metrics);
  void update_policy(const TransitionRecord& transition);

  std::string state_key(std::span<const double> state) const;
  static std::string action_key(const Configuration& action);
  double q_value(std::span<const double> state, const Configuration& action) const;
  void set_q_value(std::span<const double> state, const Configuration& action, double q);

  const Configuration& position() const { return position_; }
  void set_position(Configuration config) { position_ = std::move(config); }
  double epsilon() const { return epsilon_; }
  void set_epsilon(double epsilon) { epsilon_ = epsilon; }
  const QTable& q_table() const { return q_; }

 private:
  QTable q_;
  Configuration position_;
  double epsilon_;
};

/// RL policy trained against a GP estimator; real evaluations go first to
/// the policy's recommendation, then to queued configurations in order of
/// estimator uncertainty.
class RLEstimatorAgent final : public Agent {
 public:
  RLEstimatorAgent(ComponentId component, Subspace subspace, std::size_t context_dims, AgentSettings settings,
                   std::uint64_t seed);

  AgentKind kind() const override { return AgentKind::RLEstimator; }
  void init_model() override;
  AgentRunResult run(const ContextFeature& context, double sub_budget, ComponentEvaluator& evaluator) override;

  /// Internal episodes against the estimator starting at `start`; every
  /// visited configuration is queued. Returns the recommended configuration.
  Configuration suggest(const ContextFeature& context, const Configuration& start);
  void update_policy(const std::string& state, const std::string& action, double reward, const std::string& next_state);
  void update_estimator(const EvaluationRecord& record);

  GaussianProcess::Prediction estimate(const ContextFeature& context, const Configuration& config) const;
  const std::vector<EvaluationRecord>& estimator_rows() const { return rows_; }
  const UncertaintyQueue& queue() const { return queue_; }
  const QTable& q_table() const { return q_; }

 private:
  std::string state_key(const ContextFeature& context, const Configuration& config) const;
  std::size_t episode_length() const;

  BayesianSearch estimator_;
  QTable q_;
  UncertaintyQueue queue_;
  std::vector<EvaluationRecord> rows_;
};

/// Non-learning heuristic: coordinate pattern search over grid moves from the
/// best configuration it knows, ignoring context.
class RuleBasedAgent final : public Agent {
 public:
  RuleBasedAgent(ComponentId component, Subspace subspace, std::size_t context_dims, AgentSettings settings,
                 std::uint64_t seed);

  AgentKind kind() const override { return AgentKind::RuleBased; }
  void init_model() override;
  AgentRunResult run(const ContextFeature& context, double sub_budget, ComponentEvaluator& evaluator) override;

 private:
  std::size_t cursor_ = 0;
};

std::unique_ptr<Agent> make_agent(AgentKind kind, ComponentId component, Subspace subspace, std::size_t context_dims,
                                  AgentSettings settings, std::uint64_t seed);

}  // namespace coordtune
