#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coordtune/harness.hpp"

using namespace coordtune;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentSpec tiny_spec(const fs::path& out) {
  ExperimentSpec s;
  s.scenario = "small-grid";
  s.strategies = {"ts_buffer", "round_robin", "joint"};
  s.seeds = {1, 2};
  s.tuning_budget = 6000;
  s.output_dir = out.string();
  AgentSettings a;
  a.candidates = 100;
  a.episodes = 2;
  s.settings = a;
  return s;
}

EpochRecord epoch(std::size_t agent, double agent_cost, double context_cost, std::size_t evals, double before,
                  double after) {
  EpochRecord e;
  e.agent = agent;
  e.agent_name = "c" + std::to_string(agent);
  e.agent_cost = agent_cost;
  e.context_cost = context_cost;
  e.evaluations = evals;
  e.context_evaluations = context_cost > 0 ? 1 : 0;
  e.f_global_before = before;
  e.f_global_after = after;
  e.f_inc = after;
  e.improved = after < before;
  e.reward = before - after;
  return e;
}

}  // namespace

TEST_CASE("quantiles interpolate linearly") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK(quantile({0, 10}, 0.25) == 2.5);
  CHECK(quantile({5}, 0.9) == 5);
  CHECK_THROWS(quantile({}, 0.5));
}

TEST_CASE("allocation shares count agent cost only") {
  TuningTrace t;
  t.component_names = {"index", "knob"};
  t.initial_cost = 10;
  t.initial_performance = 9;
  t.epochs = {epoch(0, 100, 0, 10, 9, 8), epoch(1, 100, 10, 10, 8, 8), epoch(0, 50, 10, 5, 8, 7)};
  const auto p = allocation_pattern(t);
  REQUIRE(p.rows.size() == 3);
  CHECK(p.rows[0].shares == std::vector<double>{1.0, 0.0});
  CHECK(p.rows[1].shares == std::vector<double>{0.5, 0.5});
  CHECK(p.rows[2].shares[0] == doctest::Approx(0.6));
  CHECK(p.shares == p.rows[2].shares);
  std::ostringstream out;
  write_pattern(out, p);
  CHECK(out.str().rfind("epoch\tagent\tshare_index\tshare_knob\n", 0) == 0);

  const auto s = summarize(TuningResult{{}, 7, t});
  CHECK(s.best_f == 7);
  CHECK(s.epochs_to_best == 3);
  CHECK(s.evaluations_to_best == 1 + 10 + 11 + 6);
  CHECK(s.evaluations == s.evaluations_to_best);
  CHECK(s.total_cost == 280);

  CHECK(evaluations_to_reach(t, 7.5, 0.0) == 1 + 10 + 11 + 6);
  CHECK(evaluations_to_reach(t, 7.5, 0.1) == 11);  // threshold 8.25
  CHECK(evaluations_to_reach(t, 9, 0.0) == 1);
  CHECK_FALSE(evaluations_to_reach(t, 6, 0.05).has_value());
}

TEST_CASE("traces round-trip through JSON lines") {
  auto config = task_from_preset(scenario_preset("small-grid"), 3);
  config.task.tuning_budget = 5000;
  config.settings.candidates = 100;
  const auto result = run_tuning(config);
  std::stringstream ss;
  write_trace(ss, result);
  const std::string text = ss.str();
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == result.trace.epochs.size() + 2);
  const auto back = read_trace(ss);
  CHECK(back.trace == result.trace);
  CHECK(back.incumbent == result.incumbent);
  CHECK(back.f_global == result.f_global);

  std::istringstream bad("{\"type\":\"epoch\"}\n");
  CHECK_THROWS(read_trace(bad));
}

TEST_CASE("run_tuning honours the strategy override") {
  auto config = task_from_preset(scenario_preset("small-grid"), 1);
  config.task.tuning_budget = 5000;
  config.settings.candidates = 100;
  CHECK(run_tuning(config, "sequential(q-k-i)").trace.strategy == "sequential(q-k-i)");
  CHECK(run_tuning(config, "joint").trace.strategy == "joint");
  CHECK_THROWS(run_tuning(config, "sequential(q-k)"));
}

TEST_CASE("experiments write traces and identical summaries for identical specs") {
  const fs::path base = fs::temp_directory_path() / "coordtune_harness_test";
  fs::remove_all(base);
  const auto a = run_experiment(tiny_spec(base / "a"));
  auto spec_b = tiny_spec(base / "b");
  spec_b.threads = 2;
  run_experiment(spec_b);
  CHECK(a.runs.size() == 6);
  CHECK(a.aggregate.size() == 3);
  for (const auto& r : a.runs) {
    CHECK(r.ok);
    CHECK(fs::exists(base / "a" / r.trace_file));
  }
  CHECK(slurp(base / "a" / "summary.tsv") == slurp(base / "b" / "summary.tsv"));
  CHECK(slurp(base / "a" / "aggregate.tsv") == slurp(base / "b" / "aggregate.tsv"));
  CHECK(slurp(base / "a" / "traces" / "ts_buffer_s1.jsonl") == slurp(base / "b" / "traces" / "ts_buffer_s1.jsonl"));
  fs::remove_all(base);
}

TEST_CASE("failed runs are recorded and the experiment continues") {
  const fs::path base = fs::temp_directory_path() / "coordtune_harness_fail";
  fs::remove_all(base);
  auto spec = tiny_spec(base);
  spec.strategies = {"sequential(i-k)", "round_robin"};
  spec.seeds = {1};
  const auto s = run_experiment(spec);
  REQUIRE(s.runs.size() == 2);
  CHECK_FALSE(s.runs[0].ok);
  CHECK(s.runs[1].ok);
  CHECK(s.aggregate[0].failures == 1);
  CHECK(slurp(base / "summary.tsv").find("error: ") != std::string::npos);
  fs::remove_all(base);
}

TEST_CASE("grid case rows") {
  ExperimentSpec spec = tiny_spec("unused");
  spec.strategies = {"ts_buffer"};
  spec.seeds = {4};
  const auto table = grid_case_study(spec);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].strategy == "grid");
  CHECK(table.rows[0].gap == 0.0);
  const auto& r = table.rows[1];
  CHECK(r.ok);
  CHECK(r.oracle_f == table.rows[0].best_f);
  CHECK(r.gap == doctest::Approx((r.best_f - r.oracle_f) / std::abs(r.oracle_f)));
  CHECK(r.oracle_evaluations == table.rows[0].oracle_evaluations);

  spec.scenario = "default-3c";
  CHECK_THROWS_AS(grid_case_study(spec, 1000), std::runtime_error);
}
