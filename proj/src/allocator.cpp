#include "coordtune/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace coordtune {

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::TsBuffer: return "ts_buffer";
    case StrategyKind::Ts: return "ts";
    case StrategyKind::RoundRobin: return "round_robin";
    case StrategyKind::Ucb: return "ucb";
    case StrategyKind::Sequential: return "sequential";
  }
  return "unknown";
}

std::string StrategySpec::label() const {
  std::string out = to_string(kind);
  if (kind == StrategyKind::Sequential && !order.empty()) {
    out += '(';
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i) out += '-';
      out += order[i];
    }
    out += ')';
  }
  return out;
}

StrategySpec parse_strategy(const std::string& text) {
  StrategySpec spec;
  std::string name = text;
  std::string args;
  if (const auto open = text.find('('); open != std::string::npos) {
    if (text.back() != ')') throw std::invalid_argument("malformed strategy '" + text + "'");
    name = text.substr(0, open);
    args = text.substr(open + 1, text.size() - open - 2);
  }
  if (name == "ts_buffer") spec.kind = StrategyKind::TsBuffer;
  else if (name == "ts") spec.kind = StrategyKind::Ts;
  else if (name == "round_robin") spec.kind = StrategyKind::RoundRobin;
  else if (name == "ucb") spec.kind = StrategyKind::Ucb;
  else if (name == "sequential") spec.kind = StrategyKind::Sequential;
  else throw std::invalid_argument("unknown strategy '" + text + "'");

  if (!args.empty()) {
    if (spec.kind != StrategyKind::Sequential) throw std::invalid_argument("only sequential takes an order: " + text);
    std::size_t start = 0;
    while (start <= args.size()) {
      const auto dash = args.find('-', start);
      const auto end = dash == std::string::npos ? args.size() : dash;
      if (end == start) throw std::invalid_argument("empty entry in sequential order: " + text);
      spec.order.push_back(args.substr(start, end - start));
      if (dash == std::string::npos) break;
      start = dash + 1;
    }
  }
  return spec;
}

BetaPosterior beta_posterior(std::span<const double> entries, std::size_t buffer_size, double rfactor) {
  if (!(rfactor > 0.0)) throw std::invalid_argument("rfactor must be positive");
  BetaPosterior p;
  const std::size_t n = std::min(buffer_size, entries.size());
  for (std::size_t i = entries.size() - n; i < entries.size(); ++i) {
    const double r = entries[i];
    if (r > 0.0) p.successes += static_cast<std::uint64_t>(std::llround(r / rfactor));
    else ++p.failures;
  }
  return p;
}

double record_reward(RewardHistory& history, double f_inc, double f_global) {
  if (!std::isfinite(f_inc) || !std::isfinite(f_global)) throw std::invalid_argument("performance must be finite");
  const double reward = std::max(0.0, f_global - f_inc);
  history.append(reward);
  return reward;
}

double calibrate_rfactor(std::span<const double> bootstrap_rewards) {
  double best = 0.0;
  for (double r : bootstrap_rewards) best = std::max(best, r);
  const double rf = best / 20.0;
  return rf > 0.0 ? rf : 1.0;
}

BudgetAllocator::BudgetAllocator(StrategyKind strategy, std::size_t num_agents, std::size_t buffer_size,
                                 std::uint64_t seed, std::vector<std::size_t> order)
    : strategy_(strategy),
      num_agents_(num_agents),
      buffer_size_(strategy == StrategyKind::Ts ? kUnboundedBuffer : buffer_size),
      rng_(seed),
      order_(std::move(order)),
      ucb_data_(num_agents) {
  if (num_agents_ == 0) throw std::invalid_argument("allocator needs at least one agent");
  if (buffer_size_ == 0) throw std::invalid_argument("buffer_size must be at least 1");
  if (order_.empty()) {
    for (std::size_t i = 0; i < num_agents_; ++i) order_.push_back(i);
  }
  auto sorted = order_;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted.size() != num_agents_ || sorted[i] != i)
      throw std::invalid_argument("sequential order must be a permutation of the agents");
}

void BudgetAllocator::set_rfactor(double rfactor) {
  if (!(rfactor > 0.0) || !std::isfinite(rfactor)) throw std::invalid_argument("rfactor must be positive");
  rfactor_ = rfactor;
}

BetaPosterior BudgetAllocator::posterior(const RewardHistory& history) const {
  return beta_posterior(history.entries(), buffer_size_, rfactor_);
}

std::size_t BudgetAllocator::select_agent(const AllocationInput& input) {
  switch (strategy_) {
    case StrategyKind::TsBuffer:
    case StrategyKind::Ts: return select_thompson(input);
    case StrategyKind::RoundRobin: {
      const std::size_t pick = cursor_ % num_agents_;
      ++cursor_;
      return pick;
    }
    case StrategyKind::Sequential: {
      const double f = std::clamp(input.budget_fraction, 0.0, 1.0);
      const auto phase = std::min(num_agents_ - 1, static_cast<std::size_t>(std::floor(f * num_agents_)));
      return order_[phase];
    }
    case StrategyKind::Ucb: return select_ucb(input);
  }
  throw std::logic_error("unknown strategy");
}

std::size_t BudgetAllocator::select_thompson(const AllocationInput& input) {
  if (input.histories.size() != num_agents_) throw std::invalid_argument("need one reward history per agent");
  std::size_t best = 0;
  double best_w = -1.0;
  for (std::size_t i = 0; i < num_agents_; ++i) {
    const auto p = posterior(input.histories[i]);
    const double w = rng_.beta(static_cast<double>(p.successes) + 1.0, static_cast<double>(p.failures) + 1.0);
    if (w > best_w) {
      best_w = w;
      best = i;
    }
  }
  return best;
}

void BudgetAllocator::observe(std::size_t agent, const ContextFeature& context, double reward) {
  if (strategy_ != StrategyKind::Ucb) return;
  if (agent >= num_agents_) throw std::out_of_range("agent index out of range");
  ucb_data_[agent].emplace_back(context.values, reward);
}

std::size_t BudgetAllocator::select_ucb(const AllocationInput& input) const {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < num_agents_; ++i) {
    const auto& data = ucb_data_[i];
    double score = std::numeric_limits<double>::infinity();
    if (!data.empty()) {
      const std::vector<double> empty;
      const auto& ctx = i < input.contexts.size() ? input.contexts[i].values : empty;
      // Features are the context plus an intercept.
      const auto d = static_cast<Eigen::Index>(data.front().first.size() + 1);
      Eigen::MatrixXd a = kUcbRidge * Eigen::MatrixXd::Identity(d, d);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
      Eigen::VectorXd x(d);
      for (const auto& [c, r] : data) {
        if (static_cast<Eigen::Index>(c.size() + 1) != d) throw std::invalid_argument("context length changed");
        for (Eigen::Index j = 0; j + 1 < d; ++j) x[j] = c[static_cast<std::size_t>(j)];
        x[d - 1] = 1.0;
        a.noalias() += x * x.transpose();
        b += r * x;
      }
      x.setZero();
      if (static_cast<Eigen::Index>(ctx.size() + 1) == d)
        for (Eigen::Index j = 0; j + 1 < d; ++j) x[j] = ctx[static_cast<std::size_t>(j)];
      x[d - 1] = 1.0;
      const Eigen::LDLT<Eigen::MatrixXd> solver(a);
      const Eigen::VectorXd theta = solver.solve(b);
      const double width = std::sqrt(std::max(0.0, x.dot(solver.solve(x))));
      score = theta.dot(x) + kUcbBeta * width;
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

}  // namespace coordtune
