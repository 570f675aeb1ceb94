// Acceptance suite: one PASS/FAIL line per criterion. Thresholds and time
// limits are fixed below; a criterion that misses its limit fails.
#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coordtune/agents.hpp"
#include "coordtune/allocator.hpp"
#include "coordtune/coordinator.hpp"
#include "coordtune/gaussian_process.hpp"
#include "coordtune/harness.hpp"

using namespace coordtune;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::size_t g_threads = 1;
fs::path g_work;

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// ------------------------------------------------------------------ oracles

// Straight from the definition: last s entries, positive reward adds
// round(r / rfactor) successes, anything else one failure.
BetaPosterior brute_force_posterior(const std::vector<double>& entries, std::size_t s, double rfactor) {
  BetaPosterior p;
  const std::size_t n = entries.size();
  const std::size_t first = s >= n ? 0 : n - s;
  for (std::size_t i = first; i < n; ++i) {
    if (entries[i] > 0.0)
      p.successes += static_cast<std::uint64_t>(std::floor(entries[i] / rfactor + 0.5));
    else
      p.failures += 1;
  }
  return p;
}

double random_reward(Rng& rng) {
  switch (rng.index(4)) {
    case 0: return 0.0;
    case 1: return rng.uniform(0.0, 0.2);  // often rounds to zero successes
    case 2: return std::floor(rng.uniform(0.0, 8.0)) + 0.5;  // exact halves
    default: return rng.uniform(0.0, 50.0);
  }
}

RewardHistory random_history(Rng& rng, std::size_t agent, std::size_t max_len) {
  RewardHistory h({agent, "a" + std::to_string(agent)});
  const std::size_t len = rng.index(max_len + 1);
  for (std::size_t i = 0; i < len; ++i) h.append(random_reward(rng));
  return h;
}

// ------------------------------------------------------------- criteria

Outcome allocator_math() {
  Rng rng(101);
  std::size_t mismatches = 0, choice_mismatches = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t m = 1 + rng.index(5);
    const std::size_t s = rng.bernoulli(0.2) ? kUnboundedBuffer : 1 + rng.index(15);
    const double rfactor = rng.bernoulli(0.3) ? 1.0 : rng.uniform(0.05, 3.0);
    const auto seed = rng();
    std::vector<RewardHistory> hs;
    for (std::size_t i = 0; i < m; ++i) hs.push_back(random_history(rng, i, 40));

    const auto kind = s == kUnboundedBuffer ? StrategyKind::Ts : StrategyKind::TsBuffer;
    BudgetAllocator alloc(kind, m, s == kUnboundedBuffer ? 7 : s, seed);
    alloc.set_rfactor(rfactor);
    // Replays select_agent's draws from the oracle counts.
    Rng replay(seed);
    std::size_t expected = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto want = brute_force_posterior(hs[i].entries(), s, rfactor);
      if (!(alloc.posterior(hs[i]) == want)) ++mismatches;
      const double w = replay.beta(static_cast<double>(want.successes) + 1.0, static_cast<double>(want.failures) + 1.0);
      if (w > best) {
        best = w;
        expected = i;
      }
    }
    if (alloc.select_agent(AllocationInput{hs, {}, 0.0}) != expected) ++choice_mismatches;
  }
  return {mismatches == 0 && choice_mismatches == 0,
          "1000 histories, posterior mismatches " + std::to_string(mismatches) + ", selection mismatches " +
              std::to_string(choice_mismatches)};
}

Outcome empty_histories() {
  BudgetAllocator alloc(StrategyKind::TsBuffer, 2, 7, 202);
  const std::vector<RewardHistory> hs{RewardHistory({0, "a"}), RewardHistory({1, "b"})};
  const int draws = 100000;
  int first = 0;
  for (int i = 0; i < draws; ++i) first += alloc.select_agent(AllocationInput{hs, {}, 0.0}) == 0;
  const double freq = static_cast<double>(first) / draws;
  return {std::abs(freq - 0.5) <= 0.01, "frequency of agent 0 = " + fmt(freq, 5) + " (0.50 +- 0.01)"};
}

Outcome buffer_truncation() {
  Rng rng(303);
  std::size_t bad = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t m = 1 + rng.index(4);
    const std::size_t s = 1 + rng.index(20);
    const double rfactor = rng.uniform(0.05, 2.0);
    const auto seed = rng();
    std::vector<RewardHistory> plain, padded;
    for (std::size_t i = 0; i < m; ++i) {
      auto h = random_history(rng, i, 30);
      // at least s entries so the prefix lies wholly beyond the buffer
      while (h.size() < s) h.append(random_reward(rng));
      std::vector<double> longer;
      for (int k = 0; k < 100; ++k) longer.push_back(random_reward(rng));
      longer.insert(longer.end(), h.entries().begin(), h.entries().end());
      plain.push_back(h);
      padded.emplace_back(h.agent(), longer);
    }
    BudgetAllocator a(StrategyKind::TsBuffer, m, s, seed), b(StrategyKind::TsBuffer, m, s, seed);
    a.set_rfactor(rfactor);
    b.set_rfactor(rfactor);
    for (std::size_t i = 0; i < m; ++i)
      if (!(a.posterior(plain[i]) == b.posterior(padded[i]))) ++bad;
    if (a.select_agent(AllocationInput{plain, {}, 0.0}) != b.select_agent(AllocationInput{padded, {}, 0.0})) ++bad;
  }
  return {bad == 0, "1000 cases, differences " + std::to_string(bad)};
}

// Arm A pays 1.0 for its first 10 pulls and 0 afterwards, arm B pays 0.3.
// Bandit strategies bootstrap 3 rounds round-robin and calibrate rfactor as
// the coordinator does.
double decaying_bandit(StrategyKind kind, std::uint64_t seed, int epochs) {
  BudgetAllocator alloc(kind, 2, 7, seed);
  std::vector<RewardHistory> hs{RewardHistory({0, "A"}), RewardHistory({1, "B"})};
  const int bootstrap = kind == StrategyKind::RoundRobin ? 0 : 3 * 2;
  std::vector<double> boot;
  int pulls_a = 0;
  double total = 0.0;
  for (int e = 0; e < epochs; ++e) {
    if (e == bootstrap && bootstrap > 0) alloc.set_rfactor(calibrate_rfactor(boot));
    const std::size_t arm = e < bootstrap ? static_cast<std::size_t>(e % 2) : alloc.select_agent({hs, {}, 0.0});
    const double r = arm == 0 ? (pulls_a++ < 10 ? 1.0 : 0.0) : 0.3;
    hs[arm].append(r);
    if (e < bootstrap) boot.push_back(r);
    total += r;
  }
  return total;
}

Outcome nonstationary_bandit() {
  std::vector<double> buf, ts, rr, margin;
  for (std::uint64_t s = 1; s <= 200; ++s) {
    buf.push_back(decaying_bandit(StrategyKind::TsBuffer, s, 60));
    ts.push_back(decaying_bandit(StrategyKind::Ts, s, 60));
    rr.push_back(decaying_bandit(StrategyKind::RoundRobin, s, 60));
    margin.push_back(buf.back() - ts.back());
  }
  const double mb = median(buf), mt = median(ts), mr = median(rr), mm = median(margin);
  return {mb - mt > 0.0 && mt >= mr, "median cumulative reward ts_buffer " + fmt(mb) + ", ts " + fmt(mt) +
                                         ", round_robin " + fmt(mr) + ", median paired margin " + fmt(mm)};
}

ExperimentSpec spec_for(const std::string& scenario, std::vector<std::string> strategies, std::uint64_t seeds,
                        const std::string& dir) {
  ExperimentSpec s;
  s.scenario = scenario;
  s.strategies = std::move(strategies);
  s.seeds.clear();
  for (std::uint64_t i = 1; i <= seeds; ++i) s.seeds.push_back(i);
  s.threads = g_threads;
  s.output_dir = (g_work / dir).string();
  return s;
}

std::map<std::string, double> medians_by_label(const ExperimentSummary& summary, bool by_buffer) {
  std::map<std::string, double> out;
  for (const auto& a : summary.aggregate)
    out[by_buffer ? std::to_string(a.buffer_size) : a.strategy] = a.median;
  return out;
}

std::size_t failures(const ExperimentSummary& s) {
  std::size_t n = 0;
  for (const auto& r : s.runs) n += !r.ok;
  return n;
}

Outcome buffer_sweep() {
  auto spec = spec_for("default-3c", {"ts_buffer"}, 30, "buffer_sweep");
  spec.buffer_sizes = {1, 4, 7, 10};
  const auto summary = run_experiment(spec);
  const auto med = medians_by_label(summary, true);
  bool pass = failures(summary) == 0;
  std::string detail = "median best-f by buffer size:";
  for (const auto& [b, m] : med) {
    detail += " " + b + "=" + fmt(m, 6);
    if (m > med.at("1")) pass = false;
  }
  return {pass, detail};
}

Outcome strategy_comparison() {
  auto spec = spec_for("default-3c",
                       {"ts_buffer", "ts", "round_robin", "ucb", "sequential(i-k-q)", "sequential(i-q-k)",
                        "sequential(k-i-q)", "sequential(k-q-i)", "sequential(q-i-k)", "sequential(q-k-i)"},
                       30, "strategies");
  const auto summary = run_experiment(spec);
  const auto med = medians_by_label(summary, false);
  const double mine = med.at("ts_buffer");
  bool pass = failures(summary) == 0 && mine < med.at("round_robin");
  std::string detail = "median best-f:";
  for (const auto& name : spec.strategies) {
    detail += " " + name + "=" + fmt(med.at(name), 6);
    if (mine > med.at(name)) pass = false;
  }
  return {pass, detail};
}

Outcome grid_case() {
  auto spec = spec_for("small-grid", {"ts_buffer"}, 50, "grid");
  spec.target_gap = 0.05;
  const auto table = grid_case_study(spec);
  std::size_t hits = 0, runs = 0, failed = 0;
  std::vector<double> share;
  for (const auto& r : table.rows) {
    if (r.strategy == "grid") continue;
    ++runs;
    if (!r.ok) {
      ++failed;
      continue;
    }
    const double budget = 0.40 * static_cast<double>(r.oracle_evaluations);
    if (r.evaluations_to_target && static_cast<double>(*r.evaluations_to_target) <= budget) {
      ++hits;
      share.push_back(static_cast<double>(*r.evaluations_to_target) / static_cast<double>(r.oracle_evaluations));
    }
  }
  const bool pass = failed == 0 && runs == 50 && hits * 5 >= runs * 4;
  return {pass, std::to_string(hits) + "/" + std::to_string(runs) +
                    " seeds within 5% of the grid optimum using <= 40% of its evaluations" +
                    (share.empty() ? "" : ", median evaluation share " + fmt(median(share)))};
}

Outcome alternating_vs_joint() {
  const auto summary = run_experiment(spec_for("wide-knob", {"ts_buffer", "joint"}, 50, "joint"));
  const auto med = medians_by_label(summary, false);
  return {failures(summary) == 0 && med.at("ts_buffer") < med.at("joint"),
          "median best-f alternating " + fmt(med.at("ts_buffer"), 6) + ", joint " + fmt(med.at("joint"), 6)};
}

// Wraps the synthetic system, logs every evaluation and flags overlap.
class RecordingSystem final : public TunableSystem {
 public:
  explicit RecordingSystem(SyntheticSystemSpec spec) : inner_(std::move(spec)) {}
  const std::vector<ComponentId>& components() const override { return inner_.components(); }
  const std::vector<Subspace>& subspaces() const override { return inner_.subspaces(); }
  std::size_t metric_dims() const override { return inner_.metric_dims(); }
  double eval_cost() const override { return inner_.eval_cost(); }
  Evaluation evaluate(const JointConfiguration& joint) const override {
    if (in_flight_.fetch_add(1) != 0) overlapped = true;
    Evaluation e;
    try {
      e = inner_.evaluate(joint);
    } catch (...) {
      in_flight_.fetch_sub(1);
      throw;
    }
    in_flight_.fetch_sub(1);
    log.push_back(joint);
    charged += e.cost;
    return e;
  }
  const SyntheticSystem& inner() const { return inner_; }

  mutable std::vector<JointConfiguration> log;
  mutable double charged = 0.0;
  mutable bool overlapped = false;

 private:
  SyntheticSystem inner_;
  mutable std::atomic<int> in_flight_{0};
};

// Returns the first violated invariant, empty when all hold.
std::string check_run(StrategyKind kind, std::uint64_t seed) {
  SyntheticSystemSpec sys_spec;
  sys_spec.knob_dims = 4;
  sys_spec.index_bits = 8;
  sys_spec.queries = 2;
  sys_spec.seed = seed;
  RecordingSystem sys(sys_spec);
  TuningTask task;
  task.components = {ComponentSpec{{0, "index"}, AgentKind::BO, "index"},
                     ComponentSpec{{1, "knob"}, AgentKind::RL, "knob"},
                     ComponentSpec{{2, "query"}, AgentKind::RLEstimator, "query"}};
  task.tuning_budget = 9000 + 130 * static_cast<double>(seed % 7);
  task.sub_budget = 600;
  task.seed = seed;
  AgentSettings settings;
  settings.candidates = 200;
  settings.episodes = 3;
  Coordinator coord(task, sys, build_agents(task, sys, settings),
                    BudgetAllocator(kind, 3, task.buffer_size, derive_seed(seed, 0x300)));
  const TuningResult r = coord.tune();
  const auto& t = r.trace;

  if (sys.overlapped) return "overlapping evaluations";
  if (t.total_cost() != sys.charged) return "trace cost differs from charged cost";
  if (task.tuning_budget != coord.budget_remaining() + t.total_cost()) return "budget not conserved";
  if (coord.budget_remaining() >= task.sub_budget + sys.eval_cost()) return "loop stopped early";
  if (t.total_evaluations() != sys.log.size()) return "evaluation count mismatch";

  const auto defaults = sys.default_joint();
  if (sys.log.empty() || sys.log.front() != defaults) return "first evaluation is not the default";
  JointConfiguration incumbent = defaults;
  double prev = t.initial_performance;
  std::size_t at = 1;
  for (const auto& e : t.epochs) {
    if (e.f_global_before != prev || e.f_global_after > e.f_global_before) return "f_global not monotone";
    for (std::size_t k = 0; k < e.context_evaluations; ++k, ++at) {
      JointConfiguration expected = incumbent;
      expected[e.agent] = defaults[e.agent];
      if (sys.log.at(at) != expected) return "context probe off the incumbent";
    }
    for (std::size_t k = 0; k < e.evaluations; ++k, ++at)
      for (std::size_t c = 0; c < incumbent.size(); ++c)
        if (c != e.agent && sys.log.at(at)[c] != incumbent[c]) return "agent touched another component";
    if (e.improved) {
      bool found = false;
      for (std::size_t k = at - e.evaluations; k < at && !found; ++k)
        if (sys.inner().objective(sys.log[k]) == e.f_global_after) {
          incumbent = sys.log[k];
          found = true;
        }
      if (!found) return "improvement not among the epoch's evaluations";
    }
    prev = e.f_global_after;
  }
  if (at != sys.log.size()) return "unaccounted evaluations";
  if (incumbent != r.incumbent || prev != r.f_global) return "incumbent replay mismatch";
  if (sys.inner().evaluate(r.incumbent).performance != r.f_global) return "incumbent re-evaluation differs";

  std::stringstream ss;
  write_trace(ss, r);
  const auto back = read_trace(ss);
  if (!(back.trace == t) || back.incumbent != r.incumbent || back.f_global != r.f_global)
    return "trace does not round-trip";
  return "";
}

Outcome coordinator_invariants() {
  std::size_t runs = 0;
  for (auto kind : {StrategyKind::TsBuffer, StrategyKind::Ts, StrategyKind::RoundRobin, StrategyKind::Ucb,
                    StrategyKind::Sequential})
    for (std::uint64_t seed = 1; seed <= 8; ++seed, ++runs) {
      const auto err = check_run(kind, seed);
      if (!err.empty()) return {false, to_string(kind) + " seed " + std::to_string(seed) + ": " + err};
    }
  return {true, std::to_string(runs) + " instrumented runs, all invariants hold"};
}

// Posterior of a 3-point GP by the adjugate inverse of the 3x3 Gram matrix.
Outcome gp_closed_form() {
  const double x[3][2] = {{0.1, 0.2}, {0.5, 0.9}, {0.8, 0.3}};
  const double y[3] = {1.0, -0.5, 2.0};
  const double len[2] = {0.4, 0.7}, sf2 = 1.7, sn2 = 0.01;
  auto kern = [&](const double* a, const double* b) {
    double r2 = 0.0;
    for (int d = 0; d < 2; ++d) r2 += (a[d] - b[d]) * (a[d] - b[d]) / (len[d] * len[d]);
    return sf2 * std::exp(-0.5 * r2);
  };
  double k[3][3], ki[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k[i][j] = kern(x[i], x[j]) + (i == j ? sn2 : 0.0);
  const double det = k[0][0] * (k[1][1] * k[2][2] - k[1][2] * k[2][1]) -
                     k[0][1] * (k[1][0] * k[2][2] - k[1][2] * k[2][0]) +
                     k[0][2] * (k[1][0] * k[2][1] - k[1][1] * k[2][0]);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      // cofactor of (j, i)
      const int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      ki[i][j] = (k[r0][c0] * k[r1][c1] - k[r0][c1] * k[r1][c0]) / det;
    }

  GpHyperparameters h;
  h.lengthscales = Eigen::Vector2d(len[0], len[1]);
  h.signal_variance = sf2;
  h.noise_variance = sn2;
  GaussianProcess gp(2, h);
  for (int i = 0; i < 3; ++i) gp.add_observation(std::vector<double>{x[i][0], x[i][1]}, y[i]);

  const double mu = (y[0] + y[1] + y[2]) / 3.0;
  const double probes[5][2] = {{0.0, 0.0}, {0.3, 0.5}, {0.5, 0.9}, {1.0, 1.0}, {0.75, 0.35}};
  double worst = 0.0;
  for (const auto& q : probes) {
    double ks[3], mean = mu, quad = 0.0;
    for (int i = 0; i < 3; ++i) ks[i] = kern(x[i], q);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        mean += ks[i] * ki[i][j] * (y[j] - mu);
        quad += ks[i] * ki[i][j] * ks[j];
      }
    const auto got = gp.predict(std::vector<double>{q[0], q[1]});
    worst = std::max({worst, std::abs(got.mean - mean), std::abs(got.variance - (sf2 - quad))});
  }
  bool below_prior = true;
  for (const auto& xi : x) below_prior &= gp.predict(std::vector<double>{xi[0], xi[1]}).variance < gp.prior_variance();
  return {worst <= 1e-9 && below_prior,
          "max deviation " + fmt(worst, 3) + ", variance at training inputs below prior: " + (below_prior ? "yes" : "no")};
}

// Context 0 has its optimum at 0.2, context 1 at 0.8; the posterior mean must
// prefer the matching probe in each context.
Outcome context_sensitivity() {
  const auto box = Subspace::continuous_box({0}, {1});
  AgentSettings s;
  s.candidates = 200;
  BOAgent agent({0, "knob"}, box, 1, s, 11);
  const ContextFeature c0{{0.0}, 1}, c1{{1.0}, 2};
  for (int i = 0; i <= 10; ++i) {
    const double x = i / 10.0;
    agent.update_policy(EvaluationRecord{c0, Configuration{{0, "knob"}, {x}}, (x - 0.2) * (x - 0.2), 1, 0});
    agent.update_policy(EvaluationRecord{c1, Configuration{{0, "knob"}, {x}}, (x - 0.8) * (x - 0.8), 1, 0});
  }
  const auto& gp = agent.search().surrogate();
  auto mean = [&](const ContextFeature& c, double x) { return gp.predict(agent.search().input(c.values, {{x}})).mean; };
  const double a = mean(c0, 0.2), b = mean(c0, 0.8), c = mean(c1, 0.2), d = mean(c1, 0.8);
  return {a < b && d < c, "context 0: mean(0.2)=" + fmt(a) + " mean(0.8)=" + fmt(b) + "; context 1: mean(0.2)=" +
                              fmt(c) + " mean(0.8)=" + fmt(d)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  auto a = spec_for("default-3c", {"ts_buffer", "ucb", "round_robin"}, 3, "determinism_a");
  a.tuning_budget = 12000;
  auto b = a;
  b.output_dir = (g_work / "determinism_b").string();
  b.threads = a.threads + 1;
  run_experiment(a);
  run_experiment(b);
  bool same = true;
  for (const char* f : {"summary.tsv", "aggregate.tsv"}) {
    const auto x = slurp(fs::path(a.output_dir) / f), y = slurp(fs::path(b.output_dir) / f);
    same &= !x.empty() && x == y;
  }
  return {same, same ? "summary.tsv and aggregate.tsv identical" : "summary files differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coordtune acceptance suite"};
  std::vector<int> only;
  std::string work = (fs::temp_directory_path() / "coordtune_acceptance").string();
  app.add_option("--only", only, "Criterion numbers to run (default: all)")->delimiter(',');
  app.add_option("--threads", g_threads, "Worker threads for experiments")->check(CLI::PositiveNumber);
  app.add_option("--work-dir", work, "Scratch directory for experiment output");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "allocator math oracle", 5, allocator_math},
      {2, "beta selection probability", 10, empty_histories},
      {3, "buffer truncation exactness", 10, buffer_truncation},
      {4, "non-stationary dominance", 120, nonstationary_bandit},
      {5, "buffer-size sweep", 900, buffer_sweep},
      {6, "strategy comparison", 1800, strategy_comparison},
      {7, "grid case study", 600, grid_case},
      {8, "alternating vs joint", 1200, alternating_vs_joint},
      {9, "coordinator invariants", 60, coordinator_invariants},
      {10, "gp closed form", 1, gp_closed_form},
      {11, "context sensitivity", 10, context_sensitivity},
      {12, "determinism", 600, determinism},
  };
  const std::set<int> wanted(only.begin(), only.end());
  for (int id : wanted)
    if (id < 1 || id > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "no criterion %d\n", id);
      return 2;
    }

  int failed = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    g_work = fs::path(work) / ("c" + std::to_string(c.id));
    fs::remove_all(g_work);
    fs::create_directories(g_work);
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("[%s] %2d %s: %s (%.2f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, c.limit_seconds, in_time ? "" : ", over time");
    std::fflush(stdout);
    fs::remove_all(g_work);
  }
  return failed == 0 ? 0 : 1;
}
