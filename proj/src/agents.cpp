#include "coordtune/agents.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coordtune {

std::size_t evaluations_in(double sub_budget, double eval_cost) {
  if (!(eval_cost > 0.0) || !(sub_budget >= 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(sub_budget / eval_cost + 1e-9));
}

std::vector<std::vector<double>> neighbor_moves(const Subspace& subspace, std::span<const double> from) {
  std::vector<std::vector<double>> moves;
  std::vector<double> base(from.begin(), from.end());
  switch (subspace.kind()) {
    case SubspaceKind::ContinuousBox:
      for (std::size_t d = 0; d < subspace.dims(); ++d)
        for (double level : grid_levels(subspace, d)) {
          if (level == base[d]) continue;
          auto v = base;
          v[d] = level;
          moves.push_back(std::move(v));
        }
      break;
    case SubspaceKind::BinarySet: {
      Configuration probe;
      for (std::size_t d = 0; d < subspace.dims(); ++d) {
        probe.values = base;
        probe.values[d] = base[d] != 0.0 ? 0.0 : 1.0;
        if (validate(probe, subspace)) moves.push_back(probe.values);
      }
      break;
    }
    case SubspaceKind::CategoricalTuple:
      for (std::size_t d = 0; d < subspace.dims(); ++d)
        for (std::size_t c = 0; c < subspace.cardinalities()[d]; ++c) {
          if (static_cast<double>(c) == base[d]) continue;
          auto v = base;
          v[d] = static_cast<double>(c);
          moves.push_back(std::move(v));
        }
      break;
  }
  return moves;
}

std::string bucket_key(std::span<const double> values, std::size_t buckets) {
  std::string key;
  key.reserve(values.size() * 2);
  for (double v : values) {
    const double scaled = std::floor(v * static_cast<double>(buckets));
    const auto b = static_cast<long>(std::clamp(scaled, 0.0, static_cast<double>(buckets - 1)));
    key += std::to_string(b);
    key += ',';
  }
  return key;
}

std::string values_key(std::span<const double> values) {
  std::string key;
  char buf[32];
  for (double v : values) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    key.append(buf, end);
    key += ',';
  }
  return key;
}

// ---------------------------------------------------------------- QTable

double QTable::value(const std::string& state, const std::string& action) const {
  auto s = table_.find(state);
  if (s == table_.end()) return 0.0;
  auto a = s->second.find(action);
  return a == s->second.end() ? 0.0 : a->second;
}

double QTable::max_value(const std::string& state) const {
  double best = 0.0;
  auto s = table_.find(state);
  if (s == table_.end()) return best;
  for (const auto& [action, q] : s->second) best = std::max(best, q);
  return best;
}

void QTable::update(const std::string& state, const std::string& action, double reward, const std::string& next_state,
                    double alpha, double gamma) {
  const double target = reward + gamma * max_value(next_state);
  double& q = table_[state][action];
  q += alpha * (target - q);
}

void QTable::set(const std::string& state, const std::string& action, double q) { table_[state][action] = q; }

std::size_t QTable::size() const {
  std::size_t n = 0;
  for (const auto& [state, actions] : table_) n += actions.size();
  return n;
}

// ------------------------------------------------------- UncertaintyQueue

bool UncertaintyQueue::push(Configuration config, double priority) {
  for (const auto& e : entries_)
    if (e.config.values == config.values) return false;
  entries_.push_back(Entry{std::move(config), priority, next_sequence_++});
  return true;
}

std::optional<Configuration> UncertaintyQueue::pop() {
  if (entries_.empty()) return std::nullopt;
  auto best = entries_.begin();
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->priority > best->priority || (it->priority == best->priority && it->sequence < best->sequence)) best = it;
  }
  Configuration out = std::move(best->config);
  entries_.erase(best);
  return out;
}

void UncertaintyQueue::reprioritize(const std::function<double(const Configuration&)>& priority) {
  for (auto& e : entries_) e.priority = priority(e.config);
}

// --------------------------------------------------------- BayesianSearch

namespace {

std::size_t total_encoding(const std::vector<Subspace>& parts) {
  std::size_t n = 0;
  for (const auto& p : parts) n += p.encoding_length();
  return n;
}

}  // namespace

BayesianSearch::BayesianSearch(std::vector<Subspace> parts, std::size_t context_dims, AgentSettings settings,
                               std::uint64_t seed)
    : parts_(std::move(parts)),
      context_dims_(context_dims),
      input_dims_(context_dims + total_encoding(parts_)),
      settings_(settings),
      rng_(seed),
      gp_(input_dims_) {
  if (parts_.empty()) throw std::invalid_argument("search space needs at least one subspace");
  if (settings_.candidates == 0) throw std::invalid_argument("candidate count must be positive");
}

void BayesianSearch::reset() {
  gp_ = GaussianProcess(input_dims_);
  seen_.clear();
}

BayesianSearch::Point BayesianSearch::sample_uniform_point() {
  Point p;
  p.reserve(parts_.size());
  for (const auto& s : parts_) p.push_back(sample_uniform(s, rng_));
  return p;
}

std::vector<double> BayesianSearch::input(std::span<const double> context, const Point& point) const {
  if (context.size() != context_dims_) throw std::invalid_argument("context has the wrong length");
  std::vector<double> x(context.begin(), context.end());
  x.reserve(input_dims_);
  for (std::size_t i = 0; i < parts_.size(); ++i) encode(point[i], parts_[i], x);
  return x;
}

double BayesianSearch::acquisition(std::span<const double> context, const Point& point) const {
  const auto p = gp_.predict(input(context, point));
  return expected_improvement(p.mean, p.variance, gp_.best_target());
}

BayesianSearch::Point BayesianSearch::suggest(std::span<const double> context) {
  if (gp_.size() == 0) return sample_uniform_point();

  const std::size_t n = settings_.candidates;
  std::vector<Point> candidates;
  candidates.reserve(n);
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(input_dims_), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    candidates.push_back(sample_uniform_point());
    const auto x = input(context, candidates.back());
    inputs.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  }
  Eigen::VectorXd mean, variance;
  gp_.predict_batch(inputs, mean, variance);

  const double best = gp_.best_target();
  std::optional<std::size_t> arg;
  double best_ei = -1.0;
  bool any_variance = false;
  std::vector<double> x(input_dims_);
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    // Evaluations are repeatable, so an input that is already in the
    // training set carries no new information.
    Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())) = inputs.col(idx);
    if (seen_.count(x)) continue;
    if (variance[idx] > 1e-12 * gp_.prior_variance()) any_variance = true;
    const double ei = expected_improvement(mean[idx], variance[idx], best);
    if (ei > best_ei) {
      best_ei = ei;
      arg = i;
    }
  }
  if (!arg || !any_variance) return sample_uniform_point();
  return std::move(candidates[*arg]);
}

void BayesianSearch::update(std::span<const double> context, const Point& point, double performance) {
  if (!std::isfinite(performance)) throw std::invalid_argument("performance must be finite");
  auto x = input(context, point);
  gp_.add_observation(x, performance);
  seen_.insert(std::move(x));
  if (settings_.refit_every > 0 && gp_.size() % settings_.refit_every == 0)
    gp_.fit_hyperparameters(settings_.refit_iterations);
}

// ------------------------------------------------------------------ Agent

Agent::Agent(ComponentId component, Subspace subspace, std::size_t context_dims, AgentSettings settings,
             std::uint64_t seed)
    : component_(std::move(component)),
      subspace_(std::move(subspace)),
      context_dims_(context_dims),
      settings_(settings),
      rng_(seed) {}

Configuration Agent::random_configuration() { return Configuration{component_, sample_uniform(subspace_, rng_)}; }

void Agent::check_context(const ContextFeature& context) const {
  if (context.values.size() != context_dims_) throw std::invalid_argument("context has the wrong length");
}

std::pair<Configuration, Evaluation> Agent::evaluate_suggestion(ComponentEvaluator& evaluator,
                                                                const std::function<Configuration()>& suggest) {
  for (std::size_t attempt = 0;; ++attempt) {
    Configuration config = attempt < settings_.max_rejections ? suggest() : random_configuration();
    try {
      Evaluation e = evaluator.evaluate(config);
      return {std::move(config), std::move(e)};
    } catch (const InvalidConfigurationError&) {
      if (attempt >= settings_.max_rejections) throw;
    }
  }
}

namespace {

void track_best(AgentRunResult& result, const Configuration& config, const Evaluation& e) {
  ++result.evaluations;
  result.cost += e.cost;
  if (result.evaluations == 1 || e.performance < result.best_evaluation.performance) {
    result.best = config;
    result.best_evaluation = e;
  }
}

std::size_t require_evaluations(double sub_budget, const ComponentEvaluator& evaluator) {
  const std::size_t k = evaluations_in(sub_budget, evaluator.eval_cost());
  if (k == 0) throw std::invalid_argument("sub-budget does not cover a single evaluation");
  return k;
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------- BOAgent

BOAgent::BOAgent(ComponentId component, Subspace subspace, std::size_t context_dims, AgentSettings settings,
                 std::uint64_t seed)
    : Agent(std::move(component), subspace, context_dims, settings, seed),
      search_({subspace}, context_dims, settings, derive_seed(seed, 1)) {}

void BOAgent::init_model() {
  search_.reset();
  rows_.clear();
}

Configuration BOAgent::suggest(const ContextFeature& context) {
  check_context(context);
  return Configuration{component_, search_.suggest(context.values).front()};
}

void BOAgent::update_policy(const EvaluationRecord& record) {
  if (record.configuration.component.index != component_.index)
    throw std::invalid_argument("record belongs to another component");
  if (!std::isfinite(record.performance)) throw std::invalid_argument("performance must be finite");
  check_context(record.context);
  search_.update(record.context.values, {record.configuration.values}, record.performance);
  rows_.push_back(record);
}

double BOAgent::expected_improvement(const ContextFeature& context, const Configuration& config) const {
  return search_.acquisition(context.values, {config.values});
}

AgentRunResult BOAgent::run(const ContextFeature& context, double sub_budget, ComponentEvaluator& evaluator) {
  check_context(context);
  const std::size_t k = require_evaluations(sub_budget, evaluator);
  AgentRunResult result;
  for (std::size_t i = 0; i < k; ++i) {
    auto [config, e] = evaluate_suggestion(evaluator, [&] { return suggest(context); });
    update_policy(EvaluationRecord{context, config, e.performance, e.cost, evaluator.epoch()});
    track_best(result, config, e);
  }
  return result;
}

// ---------------------------------------------------------------- RLAgent

RLAgent::RLAgent(ComponentId component, Subspace subspace, std::size_t context_dims, AgentSettings settings,
                 std::uint64_t seed)
    : Agent(std::move(component), std::move(subspace), context_dims, settings, seed), epsilon_(settings.epsilon) {
  position_ = default_configuration(component_, subspace_);
}

void RLAgent::init_model() {
  q_.clear();
  epsilon_ = settings_.epsilon;
  position_ = default_configuration(component_, subspace_);
}

std::string RLAgent::state_key(std::span<const double> state) const { return bucket_key(state, settings_.buckets); }

std::string RLAgent::action_key(const Configuration& action) { return values_key(action.values); }

double RLAgent::q_value(std::span<const double> state, const Configuration& action) const {
  return q_.value(state_key(state), action_key(action));
}

void RLAgent::set_q_value(std::span<const double> state, const Configuration& action, double q) {
  q_.set(state_key(state), action_key(action), q);
}

Configuration RLAgent::suggest(const ContextFeature& context, std::span<const double> state_metrics) {
  check_context(context);
  const auto moves = neighbor_moves(subspace_, position_.values);
  if (moves.empty()) return position_;
  if (rng_.uniform() < epsilon_) return Configuration{component_, moves[rng_.index(moves.size())]};

  const std::string state = state_key(concat(state_metrics, context.values));
  double best_q = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> ties;
  for (std::size_t i = 0; i < moves.size(); ++i) {
    const double q = q_.value(state, values_key(moves[i]));
    if (q > best_q) {
      best_q = q;
      ties.assign(1, i);
    } else if (q == best_q) {
      ties.push_back(i);
    }
  }
  return Configuration{component_, moves[ties[rng_.index(ties.size())]]};
}

void RLAgent::update_policy(const TransitionRecord& transition) {
  if (transition.state.size() != transition.next_state.size())
    throw std::invalid_argument("state and next state must have the same length");
  q_.update(state_key(transition.state), action_key(transition.action), transition.reward,
            state_key(transition.next_state), settings_.learning_rate, settings_.discount);
  epsilon_ *= settings_.epsilon_decay;
}

AgentRunResult RLAgent::run(const ContextFeature& context, double sub_budget, ComponentEvaluator& evaluator) {
  check_context(context);
  const std::size_t k = require_evaluations(sub_budget, evaluator);
  position_ = evaluator.incumbent();
  double position_perf = evaluator.incumbent_evaluation().performance;
  std::vector<double> metrics = evaluator.incumbent_evaluation().metrics;

  AgentRunResult result;
  for (std::size_t i = 0; i < k; ++i) {
    auto [config, e] = evaluate_suggestion(evaluator, [&] { return suggest(context, metrics); });
    TransitionRecord t{concat(metrics, context.values), config, concat(e.metrics, context.values),
                       position_perf - e.performance};
    update_policy(t);
    if (e.performance < position_perf) {
      position_ = config;
      position_perf = e.performance;
      metrics = e.metrics;
    }
    track_best(result, config, e);
  }
  return result;
}

// ------------------------------------------------------- RLEstimatorAgent

RLEstimatorAgent::RLEstimatorAgent(ComponentId component, Subspace subspace, std::size_t context_dims,
                                   AgentSettings settings, std::uint64_t seed)
    : Agent(std::move(component), subspace, context_dims, settings, seed),
      estimator_({subspace}, context_dims, settings, derive_seed(seed, 1)) {}

void RLEstimatorAgent::init_model() {
  estimator_.reset();
  q_.clear();
  queue_ = UncertaintyQueue{};
  rows_.clear();
}

std::size_t RLEstimatorAgent::episode_length() const {
  return settings_.episode_length > 0 ? settings_.episode_length : subspace_.dims();
}

std::string RLEstimatorAgent::state_key(const ContextFeature& context, const Configuration& config) const {
  return bucket_key(context.values, settings_.buckets) + "|" + values_key(config.values);
}

GaussianProcess::Prediction RLEstimatorAgent::estimate(const ContextFeature& context, const Configuration& config) const {
  return estimator_.surrogate().predict(estimator_.input(context.values, {config.values}));
}

void RLEstimatorAgent::update_policy(const std::string& state, const std::string& action, double reward,
                                     const std::string& next_state) {
  q_.update(state, action, reward, next_state, settings_.learning_rate, settings_.discount);
}

void RLEstimatorAgent::update_estimator(const EvaluationRecord& record) {
  if (record.configuration.component.index != component_.index)
    throw std::invalid_argument("record belongs to another component");
  check_context(record.context);
  estimator_.update(record.context.values, {record.configuration.values}, record.performance);
  rows_.push_back(record);
}

Configuration RLEstimatorAgent::suggest(const ContextFeature& context, const Configuration& start) {
  check_context(context);
  const std::size_t length = episode_length();

  for (std::size_t episode = 0; episode < settings_.episodes; ++episode) {
    Configuration current = start;
    double current_mean = estimate(context, current).mean;
    for (std::size_t step = 0; step < length; ++step) {
      const auto moves = neighbor_moves(subspace_, current.values);
      if (moves.empty()) break;
      const std::string state = state_key(context, current);
      std::size_t choice = 0;
      if (rng_.uniform() < settings_.epsilon) {
        choice = rng_.index(moves.size());
      } else {
        double best_q = -std::numeric_limits<double>::infinity();
        std::vector<std::size_t> ties;
        for (std::size_t i = 0; i < moves.size(); ++i) {
          const double q = q_.value(state, values_key(moves[i]));
          if (q > best_q) {
            best_q = q;
            ties.assign(1, i);
          } else if (q == best_q) {
            ties.push_back(i);
          }
        }
        choice = ties[rng_.index(ties.size())];
      }
      Configuration next{component_, moves[choice]};
      const auto prediction = estimate(context, next);
      update_policy(state, values_key(next.values), current_mean - prediction.mean, state_key(context, next));
      queue_.push(next, std::sqrt(prediction.variance));
      current = std::move(next);
      current_mean = prediction.mean;
    }
  }

  if (estimator_.surrogate().size() == 0) return random_configuration();

  // Greedy rollout; recommend the lowest estimated configuration on the path.
  Configuration current = start;
  std::optional<Configuration> best;
  double best_mean = std::numeric_limits<double>::infinity();
  for (std::size_t step = 0; step < length; ++step) {
    const auto moves = neighbor_moves(subspace_, current.values);
    if (moves.empty()) break;
    const std::string state = state_key(context, current);
    std::size_t choice = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < moves.size(); ++i) {
      const double q = q_.value(state, values_key(moves[i]));
      if (q > best_q) {
        best_q = q;
        choice = i;
      }
    }
    current = Configuration{component_, moves[choice]};
    const double mean = estimate(context, current).mean;
    if (mean < best_mean) {
      best_mean = mean;
      best = current;
    }
  }
  return best ? *best : random_configuration();
}

AgentRunResult RLEstimatorAgent::run(const ContextFeature& context, double sub_budget, ComponentEvaluator& evaluator) {
  check_context(context);
  const std::size_t k = require_evaluations(sub_budget, evaluator);
  AgentRunResult result;

  const Configuration recommended = suggest(context, evaluator.incumbent());
  bool first = true;
  auto [config, e] = evaluate_suggestion(evaluator, [&] {
    if (first) {
      first = false;
      return recommended;
    }
    return random_configuration();
  });
  update_estimator(EvaluationRecord{context, config, e.performance, e.cost, evaluator.epoch()});
  track_best(result, config, e);
  if (k < 2) return result;

  queue_.reprioritize([&](const Configuration& c) { return std::sqrt(estimate(context, c).variance); });
  for (std::size_t i = 1; i < k; ++i) {
    auto [queued, qe] = evaluate_suggestion(evaluator, [&] {
      auto next = queue_.pop();
      return next ? *next : random_configuration();
    });
    update_estimator(EvaluationRecord{context, queued, qe.performance, qe.cost, evaluator.epoch()});
    track_best(result, queued, qe);
  }
  return result;
}

// --------------------------------------------------------- RuleBasedAgent

RuleBasedAgent::RuleBasedAgent(ComponentId component, Subspace subspace, std::size_t context_dims,
                               AgentSettings settings, std::uint64_t seed)
    : Agent(std::move(component), std::move(subspace), context_dims, settings, seed) {}

void RuleBasedAgent::init_model() { cursor_ = 0; }

AgentRunResult RuleBasedAgent::run(const ContextFeature& /*context*/, double sub_budget,
                                   ComponentEvaluator& evaluator) {
  const std::size_t k = require_evaluations(sub_budget, evaluator);
  Configuration position = evaluator.incumbent();
  double position_perf = evaluator.incumbent_evaluation().performance;
  auto moves = neighbor_moves(subspace_, position.values);

  AgentRunResult result;
  for (std::size_t i = 0; i < k; ++i) {
    auto [config, e] = evaluate_suggestion(evaluator, [&] {
      if (moves.empty()) return random_configuration();
      if (cursor_ >= moves.size()) cursor_ = 0;
      return Configuration{component_, moves[cursor_++]};
    });
    if (e.performance < position_perf) {
      position = config;
      position_perf = e.performance;
      moves = neighbor_moves(subspace_, position.values);
      cursor_ = 0;
    }
    track_best(result, config, e);
  }
  return result;
}

std::unique_ptr<Agent> make_agent(AgentKind kind, ComponentId component, Subspace subspace, std::size_t context_dims,
                                  AgentSettings settings, std::uint64_t seed) {
  switch (kind) {
    case AgentKind::BO:
      return std::make_unique<BOAgent>(std::move(component), std::move(subspace), context_dims, settings, seed);
    case AgentKind::RL:
      return std::make_unique<RLAgent>(std::move(component), std::move(subspace), context_dims, settings, seed);
    case AgentKind::RLEstimator:
      return std::make_unique<RLEstimatorAgent>(std::move(component), std::move(subspace), context_dims, settings,
                                                seed);
    case AgentKind::RuleBased:
      return std::make_unique<RuleBasedAgent>(std::move(component), std::move(subspace), context_dims, settings,
                                              seed);
  }
  throw std::invalid_argument("unknown agent kind");
}

}  // namespace coordtune
