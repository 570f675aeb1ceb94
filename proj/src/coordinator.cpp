#include "coordtune/coordinator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace coordtune {

double TuningTrace::total_cost() const {
  double total = initial_cost;
  for (const auto& e : epochs) total += e.cost();
  return total;
}

std::size_t TuningTrace::total_evaluations() const {
  std::size_t n = initial_cost > 0.0 ? 1 : 0;
  for (const auto& e : epochs) n += e.evaluations + e.context_evaluations;
  return n;
}

namespace {

bool uses_bootstrap(StrategyKind kind) {
  return kind == StrategyKind::TsBuffer || kind == StrategyKind::Ts || kind == StrategyKind::Ucb;
}

// Hands one component to an agent: everything else stays at the incumbent and
// no more than `max_evaluations` are charged.
class IsolatedEvaluator final : public ComponentEvaluator {
 public:
  IsolatedEvaluator(const TunableSystem& system, const JointConfiguration& incumbent,
                    const Evaluation& incumbent_evaluation, std::size_t component, std::size_t max_evaluations,
                    std::uint64_t epoch)
      : system_(system),
        joint_(incumbent),
        incumbent_evaluation_(incumbent_evaluation),
        component_(component),
        max_evaluations_(max_evaluations),
        epoch_(epoch),
        original_(incumbent[component]) {}

  Evaluation evaluate(const Configuration& config) override {
    if (config.component.index != component_) throw std::invalid_argument("agent evaluated a foreign component");
    if (evaluations_ >= max_evaluations_) throw std::runtime_error("agent exceeded its sub-budget");
    joint_[component_].values = config.values;
    Evaluation e = system_.evaluate(joint_);
    ++evaluations_;
    cost_ += e.cost;
    return e;
  }
  const Configuration& incumbent() const override { return original_; }
  const Evaluation& incumbent_evaluation() const override { return incumbent_evaluation_; }
  double eval_cost() const override { return system_.eval_cost(); }
  std::uint64_t epoch() const override { return epoch_; }

  std::size_t evaluations() const { return evaluations_; }
  double cost() const { return cost_; }

 private:
  const TunableSystem& system_;
  JointConfiguration joint_;
  Evaluation incumbent_evaluation_;
  std::size_t component_;
  std::size_t max_evaluations_;
  std::uint64_t epoch_;
  Configuration original_;
  std::size_t evaluations_ = 0;
  double cost_ = 0.0;
};

}  // namespace

Coordinator::Coordinator(TuningTask task, const TunableSystem& system, std::vector<std::unique_ptr<Agent>> agents,
                         BudgetAllocator allocator)
    : task_(std::move(task)), system_(system), agents_(std::move(agents)), allocator_(std::move(allocator)) {
  task_.validate();
  const std::size_t m = task_.components.size();
  if (system_.num_components() != m) throw std::invalid_argument("task and system disagree on the component count");
  if (agents_.size() != m) throw std::invalid_argument("need exactly one agent per component");
  if (allocator_.num_agents() != m) throw std::invalid_argument("allocator sized for a different agent count");
  for (std::size_t i = 0; i < m; ++i) {
    if (!agents_[i]) throw std::invalid_argument("null agent");
    if (agents_[i]->component().index != i) throw std::invalid_argument("agents must be in component order");
    if (agents_[i]->context_dims() != system_.metric_dims())
      throw std::invalid_argument("agent context length differs from the system metric width");
  }
  if (task_.sub_budget < system_.eval_cost()) throw std::invalid_argument("sub_budget is below one evaluation cost");
  if (task_.rfactor) allocator_.set_rfactor(*task_.rfactor);

  histories_.reserve(m);
  for (const auto& c : task_.components) histories_.emplace_back(c.id);
  contexts_.assign(m, std::nullopt);
  last_contexts_.assign(m, ContextFeature{});
  budget_remaining_ = task_.tuning_budget;

  trace_.strategy = to_string(allocator_.strategy());
  trace_.buffer_size = allocator_.buffer_size() == kUnboundedBuffer ? 0 : allocator_.buffer_size();
  trace_.seed = task_.seed;
  trace_.tuning_budget = task_.tuning_budget;
  trace_.sub_budget = task_.sub_budget;
  trace_.eval_cost = system_.eval_cost();
  for (const auto& c : task_.components) {
    trace_.component_names.push_back(c.id.name);
    trace_.agent_names.push_back(c.agent_name.empty() ? to_string(c.kind) : c.agent_name);
  }
  if (task_.rfactor) trace_.rfactor = task_.rfactor;
}

std::size_t Coordinator::bootstrap_epochs() const {
  return uses_bootstrap(allocator_.strategy()) ? task_.bootstrap_rounds * agents_.size() : 0;
}

Evaluation Coordinator::charge(const JointConfiguration& joint) {
  Evaluation e = system_.evaluate(joint);
  budget_remaining_ -= e.cost;
  return e;
}

void Coordinator::initialize() {
  if (initialized_) return;
  if (task_.tuning_budget < system_.eval_cost()) throw std::invalid_argument("budget does not cover one evaluation");
  incumbent_ = system_.default_joint();
  incumbent_evaluation_ = charge(incumbent_);
  f_global_ = incumbent_evaluation_.performance;
  trace_.initial_cost = incumbent_evaluation_.cost;
  trace_.initial_performance = f_global_;
  // With every component at its default the initial measurement is each
  // agent's context too.
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    contexts_[i] = ContextFeature{incumbent_evaluation_.metrics, 0};
    last_contexts_[i] = *contexts_[i];
  }
  for (auto& a : agents_) a->init_model();
  initialized_ = true;
}

const ContextFeature& Coordinator::get_message(std::size_t agent) {
  initialize();
  auto& slot = contexts_.at(agent);
  if (!slot) {
    JointConfiguration probe = incumbent_;
    probe[agent] = default_configuration(task_.components[agent].id, system_.subspaces()[agent]);
    const Evaluation e = charge(probe);
    last_message_cost_ = e.cost;
    slot = ContextFeature{e.metrics, static_cast<std::int64_t>(epoch_)};
    last_contexts_[agent] = *slot;
  }
  return *slot;
}

void Coordinator::update_message(std::size_t changed) {
  for (std::size_t i = 0; i < contexts_.size(); ++i)
    if (i != changed) contexts_[i].reset();
}

void Coordinator::run_epoch() {
  const std::size_t m = agents_.size();
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.f_global_before = f_global_;

  const bool bootstrap = epoch_ < bootstrap_epochs();
  std::size_t agent = 0;
  if (bootstrap) {
    agent = epoch_ % m;
  } else {
    AllocationInput input;
    input.histories = histories_;
    input.contexts = last_contexts_;
    input.budget_fraction = (task_.tuning_budget - budget_remaining_) / task_.tuning_budget;
    agent = allocator_.select_agent(input);
  }
  rec.agent = agent;
  rec.agent_name = task_.components[agent].id.name;
  rec.bootstrap = bootstrap;

  const bool cached = contexts_[agent].has_value();
  last_message_cost_ = 0.0;
  const ContextFeature context = get_message(agent);
  rec.context_cost = last_message_cost_;
  rec.context_evaluations = cached ? 0 : 1;
  rec.context_tag = context.epoch_tag;

  IsolatedEvaluator evaluator(system_, incumbent_, incumbent_evaluation_, agent,
                              evaluations_in(task_.sub_budget, system_.eval_cost()), epoch_);
  AgentRunResult run;
  try {
    run = agents_[agent]->run(context, task_.sub_budget, evaluator);
    if (run.evaluations == 0) throw std::runtime_error("agent made no evaluation");
    rec.agent_cost = evaluator.cost();
    rec.f_inc = run.best_evaluation.performance;
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.agent_cost = task_.sub_budget;
    rec.f_inc = f_global_;
  }
  rec.evaluations = evaluator.evaluations();
  budget_remaining_ -= rec.agent_cost;

  rec.reward = record_reward(histories_[agent], rec.f_inc, f_global_);
  allocator_.observe(agent, context, rec.reward);
  if (bootstrap) bootstrap_rewards_.push_back(rec.reward);

  if (!rec.failed && rec.f_inc < f_global_) {
    f_global_ = rec.f_inc;
    incumbent_[agent] = run.best;
    incumbent_evaluation_ = run.best_evaluation;
    rec.improved = true;
    update_message(agent);
  }
  rec.f_global_after = f_global_;
  for (const auto& c : contexts_) rec.context_tags.push_back(c ? c->epoch_tag : -1);
  trace_.epochs.push_back(std::move(rec));

  ++epoch_;
  if (bootstrap && epoch_ == bootstrap_epochs() && !task_.rfactor) {
    allocator_.set_rfactor(calibrate_rfactor(bootstrap_rewards_));
    trace_.rfactor = allocator_.rfactor();
  }
}

TuningResult Coordinator::tune() {
  initialize();
  // Reserve room for a possible context measurement so an epoch never
  // overdraws the budget.
  while (budget_remaining_ >= task_.sub_budget + system_.eval_cost()) run_epoch();
  return TuningResult{incumbent_, f_global_, trace_};
}

std::vector<std::unique_ptr<Agent>> build_agents(const TuningTask& task, const TunableSystem& system,
                                                 const AgentSettings& settings) {
  if (task.components.size() != system.num_components())
    throw std::invalid_argument("task and system disagree on the component count");
  std::vector<std::unique_ptr<Agent>> agents;
  for (std::size_t i = 0; i < task.components.size(); ++i) {
    const auto& spec = task.components[i];
    if (spec.id.name != system.components()[i].name)
      throw std::invalid_argument("component " + std::to_string(i) + " is '" + system.components()[i].name +
                                  "' in the system but '" + spec.id.name + "' in the task");
    agents.push_back(make_agent(spec.kind, system.components()[i], system.subspaces()[i], system.metric_dims(),
                                settings, derive_seed(task.seed, 0x100 + i)));
  }
  return agents;
}

TuningResult tune_joint(const TuningTask& task, const TunableSystem& system, const AgentSettings& settings) {
  task.validate();
  if (task.sub_budget < system.eval_cost()) throw std::invalid_argument("sub_budget is below one evaluation cost");
  BayesianSearch search(system.subspaces(), 0, settings, derive_seed(task.seed, 0x200));

  TuningResult result;
  auto& trace = result.trace;
  trace.component_names.push_back("joint");
  trace.agent_names.push_back("BO");
  trace.strategy = "joint";
  trace.seed = task.seed;
  trace.tuning_budget = task.tuning_budget;
  trace.sub_budget = task.sub_budget;
  trace.eval_cost = system.eval_cost();

  double remaining = task.tuning_budget;
  result.incumbent = system.default_joint();
  const Evaluation initial = system.evaluate(result.incumbent);
  remaining -= initial.cost;
  result.f_global = initial.performance;
  trace.initial_cost = initial.cost;
  trace.initial_performance = initial.performance;

  const std::size_t k = evaluations_in(task.sub_budget, system.eval_cost());
  const std::vector<double> no_context;
  std::uint64_t epoch = 0;
  while (remaining >= task.sub_budget + system.eval_cost()) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.agent_name = "joint";
    rec.f_global_before = result.f_global;
    rec.f_inc = std::numeric_limits<double>::infinity();
    JointConfiguration best;
    for (std::size_t i = 0; i < k; ++i) {
      BayesianSearch::Point point;
      JointConfiguration joint = result.incumbent;
      Evaluation e;
      for (std::size_t attempt = 0;; ++attempt) {
        point = attempt < settings.max_rejections ? search.suggest(no_context) : search.sample_uniform_point();
        for (std::size_t c = 0; c < joint.size(); ++c) joint[c].values = point[c];
        try {
          e = system.evaluate(joint);
          break;
        } catch (const InvalidConfigurationError&) {
          if (attempt >= settings.max_rejections) throw;
        }
      }
      search.update(no_context, point, e.performance);
      ++rec.evaluations;
      rec.agent_cost += e.cost;
      if (e.performance < rec.f_inc) {
        rec.f_inc = e.performance;
        best = joint;
      }
    }
    remaining -= rec.agent_cost;
    rec.reward = std::max(0.0, result.f_global - rec.f_inc);
    if (rec.f_inc < result.f_global) {
      result.f_global = rec.f_inc;
      result.incumbent = best;
      rec.improved = true;
    }
    rec.f_global_after = result.f_global;
    trace.epochs.push_back(std::move(rec));
    ++epoch;
  }
  return result;
}

}  // namespace coordtune
