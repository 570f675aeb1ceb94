#include "coordtune/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "coordtune/serialization.hpp"

namespace coordtune {

using nlohmann::json;

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

TuningResult run_tuning(const TaskConfig& config, const std::optional<std::string>& strategy) {
  const SyntheticSystem system(config.system);
  const StrategySpec spec = strategy ? (*strategy == kJointStrategy ? StrategySpec{} : parse_strategy(*strategy))
                                     : config.strategy;
  if (strategy && *strategy == kJointStrategy) return tune_joint(config.task, system, config.settings);

  std::vector<std::string> names;
  for (const auto& c : config.task.components) names.push_back(c.id.name);
  BudgetAllocator allocator(spec.kind, names.size(), config.task.buffer_size, derive_seed(config.task.seed, 0x300),
                            resolve_order(spec.order, names));
  Coordinator coordinator(config.task, system, build_agents(config.task, system, config.settings),
                          std::move(allocator));
  TuningResult result = coordinator.tune();
  result.trace.strategy = spec.label();
  return result;
}

// ---------------------------------------------------------------- traces

namespace {

json epoch_json(const EpochRecord& e) {
  return json{{"type", "epoch"},
              {"epoch", e.epoch},
              {"agent", e.agent},
              {"agent_name", e.agent_name},
              {"bootstrap", e.bootstrap},
              {"agent_cost", e.agent_cost},
              {"context_cost", e.context_cost},
              {"evaluations", e.evaluations},
              {"context_evaluations", e.context_evaluations},
              {"f_inc", e.f_inc},
              {"reward", e.reward},
              {"f_global_before", e.f_global_before},
              {"f_global_after", e.f_global_after},
              {"improved", e.improved},
              {"failed", e.failed},
              {"error", e.error},
              {"context_tag", e.context_tag},
              {"context_tags", e.context_tags}};
}

EpochRecord epoch_from_json(const json& j) {
  EpochRecord e;
  j.at("epoch").get_to(e.epoch);
  j.at("agent").get_to(e.agent);
  j.at("agent_name").get_to(e.agent_name);
  j.at("bootstrap").get_to(e.bootstrap);
  j.at("agent_cost").get_to(e.agent_cost);
  j.at("context_cost").get_to(e.context_cost);
  j.at("evaluations").get_to(e.evaluations);
  j.at("context_evaluations").get_to(e.context_evaluations);
  j.at("f_inc").get_to(e.f_inc);
  j.at("reward").get_to(e.reward);
  j.at("f_global_before").get_to(e.f_global_before);
  j.at("f_global_after").get_to(e.f_global_after);
  j.at("improved").get_to(e.improved);
  j.at("failed").get_to(e.failed);
  j.at("error").get_to(e.error);
  j.at("context_tag").get_to(e.context_tag);
  j.at("context_tags").get_to(e.context_tags);
  return e;
}

}  // namespace

void write_trace(std::ostream& out, const TuningResult& result) {
  const auto& t = result.trace;
  out << json{{"type", "header"},
              {"component_names", t.component_names},
              {"agent_names", t.agent_names},
              {"strategy", t.strategy},
              {"buffer_size", t.buffer_size},
              {"seed", t.seed},
              {"tuning_budget", t.tuning_budget},
              {"sub_budget", t.sub_budget},
              {"eval_cost", t.eval_cost},
              {"initial_cost", t.initial_cost},
              {"initial_performance", t.initial_performance}}
             .dump()
      << '\n';
  for (const auto& e : t.epochs) out << epoch_json(e).dump() << '\n';
  out << json{{"type", "result"},
              {"f_global", result.f_global},
              {"incumbent", result.incumbent},
              {"rfactor", t.rfactor ? json(*t.rfactor) : json(nullptr)}}
             .dump()
      << '\n';
}

void write_trace_file(const std::string& path, const TuningResult& result) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file " + path);
  write_trace(out, result);
  if (!out) throw std::runtime_error("error writing trace file " + path);
}

TuningResult read_trace(std::istream& in) {
  TuningResult result;
  auto& t = result.trace;
  std::string line;
  std::size_t lineno = 0;
  bool header = false, done = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (header) throw std::runtime_error("second header record");
        header = true;
        j.at("component_names").get_to(t.component_names);
        j.at("agent_names").get_to(t.agent_names);
        j.at("strategy").get_to(t.strategy);
        j.at("buffer_size").get_to(t.buffer_size);
        j.at("seed").get_to(t.seed);
        j.at("tuning_budget").get_to(t.tuning_budget);
        j.at("sub_budget").get_to(t.sub_budget);
        j.at("eval_cost").get_to(t.eval_cost);
        j.at("initial_cost").get_to(t.initial_cost);
        j.at("initial_performance").get_to(t.initial_performance);
      } else if (type == "epoch") {
        if (!header || done) throw std::runtime_error("epoch record outside header/result");
        t.epochs.push_back(epoch_from_json(j));
      } else if (type == "result") {
        if (!header || done) throw std::runtime_error("misplaced result record");
        done = true;
        j.at("f_global").get_to(result.f_global);
        j.at("incumbent").get_to(result.incumbent);
        if (!j.at("rfactor").is_null()) t.rfactor = j.at("rfactor").get<double>();
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const std::exception& ex) {
      throw std::runtime_error("trace line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (!header) throw std::runtime_error("trace has no header record");
  if (!done) {
    // Truncated trace: recover f_global from the epochs.
    result.f_global = t.epochs.empty() ? t.initial_performance : t.epochs.back().f_global_after;
  }
  return result;
}

TuningResult read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file " + path);
  return read_trace(in);
}

// ------------------------------------------------------ allocation pattern

PatternTable allocation_pattern(const TuningTrace& trace) {
  if (trace.epochs.empty()) throw std::invalid_argument("trace has no epochs");
  PatternTable table;
  table.component_names = trace.component_names;
  const std::size_t m = trace.component_names.size();
  std::vector<double> spent(m, 0.0);
  double total = 0.0;
  for (const auto& e : trace.epochs) {
    if (e.agent >= m) throw std::invalid_argument("epoch names an unknown agent");
    spent[e.agent] += e.agent_cost;
    total += e.agent_cost;
    PatternRow row{e.epoch, e.agent, e.agent_name, std::vector<double>(m, 0.0)};
    if (total > 0.0)
      for (std::size_t i = 0; i < m; ++i) row.shares[i] = spent[i] / total;
    table.rows.push_back(std::move(row));
  }
  table.shares = table.rows.back().shares;
  return table;
}

void write_pattern(std::ostream& out, const PatternTable& table) {
  out << "epoch\tagent";
  for (const auto& n : table.component_names) out << "\tshare_" << n;
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.epoch << '\t' << r.agent_name;
    for (double s : r.shares) out << '\t' << format_real(s);
    out << '\n';
  }
}

// ---------------------------------------------------------- experiments

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

TaskConfig experiment_task(const ExperimentSpec& spec, std::uint64_t seed, std::optional<std::size_t> buffer_size) {
  TaskConfig config = task_from_preset(scenario_preset(spec.scenario), seed);
  if (spec.system) {
    config.system = *spec.system;
    config.system.seed = seed;
    config.task.sub_budget = 2.0 * config.system.eval_cost * static_cast<double>(scenario_preset(spec.scenario).k_evals);
  }
  if (spec.settings) config.settings = *spec.settings;
  if (spec.tuning_budget) config.task.tuning_budget = *spec.tuning_budget;
  if (buffer_size) config.task.buffer_size = *buffer_size;
  config.task.validate();
  return config;
}

RunSummary summarize(const TuningResult& result) {
  const auto& t = result.trace;
  RunSummary s;
  s.strategy = t.strategy;
  s.buffer_size = t.buffer_size;
  s.seed = t.seed;
  s.best_f = result.f_global;
  s.initial_f = t.initial_performance;
  s.epochs = t.epochs.size();
  s.component_names = t.component_names;
  s.total_cost = t.total_cost();
  std::size_t evaluations = t.initial_cost > 0.0 ? 1 : 0;
  s.evaluations_to_best = evaluations;
  for (std::size_t i = 0; i < t.epochs.size(); ++i) {
    evaluations += t.epochs[i].evaluations + t.epochs[i].context_evaluations;
    if (t.epochs[i].improved) {
      s.epochs_to_best = i + 1;
      s.evaluations_to_best = evaluations;
    }
  }
  s.evaluations = evaluations;
  if (!t.epochs.empty()) s.shares = allocation_pattern(t).shares;
  return s;
}

namespace {

std::string sanitize(const std::string& label) {
  std::string out;
  for (char c : label) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

struct Job {
  std::string strategy;
  std::optional<std::size_t> buffer_size;
  std::uint64_t seed = 0;
};

std::vector<Job> experiment_jobs(const ExperimentSpec& spec) {
  std::vector<Job> jobs;
  std::vector<std::optional<std::size_t>> buffers;
  if (spec.buffer_sizes.empty()) buffers.push_back(std::nullopt);
  for (auto b : spec.buffer_sizes) buffers.push_back(b);
  for (const auto& strategy : spec.strategies)
    for (const auto& b : buffers)
      for (auto seed : spec.seeds) jobs.push_back(Job{strategy, b, seed});
  return jobs;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots so the output order does not depend on timing.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<RunSummary>& runs) {
  std::vector<AggregateRow> rows;
  std::vector<std::vector<double>> samples;
  for (const auto& r : runs) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const AggregateRow& a) {
      return a.strategy == r.strategy && a.buffer_size == r.buffer_size;
    });
    if (it == rows.end()) {
      rows.push_back(AggregateRow{r.strategy, r.buffer_size, 0, 0, 0.0, 0.0, 0.0});
      samples.emplace_back();
      it = rows.end() - 1;
    }
    const auto idx = static_cast<std::size_t>(it - rows.begin());
    ++it->runs;
    if (r.ok) samples[idx].push_back(r.best_f);
    else ++it->failures;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (samples[i].empty()) {
      rows[i].median = rows[i].q1 = rows[i].q3 = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    rows[i].median = quantile(samples[i], 0.5);
    rows[i].q1 = quantile(samples[i], 0.25);
    rows[i].q3 = quantile(samples[i], 0.75);
  }
  return rows;
}

void write_summary(std::ostream& out, const std::vector<RunSummary>& runs) {
  out << "strategy\tbuffer_size\tseed\tstatus\tbest_f\tinitial_f\tepochs\tepochs_to_best\tevaluations_to_best"
         "\tevaluations\ttotal_cost\tshares\ttrace\n";
  for (const auto& r : runs) {
    out << r.strategy << '\t' << r.buffer_size << '\t' << r.seed << '\t';
    if (!r.ok) {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), '\t', ' ');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << "error: " << msg << "\t\t\t\t\t\t\t\t\t" << r.trace_file << '\n';
      continue;
    }
    out << "ok\t" << format_real(r.best_f) << '\t' << format_real(r.initial_f) << '\t' << r.epochs << '\t'
        << r.epochs_to_best << '\t' << r.evaluations_to_best << '\t' << r.evaluations << '\t'
        << format_real(r.total_cost) << '\t';
    for (std::size_t i = 0; i < r.shares.size(); ++i) {
      if (i) out << ';';
      out << r.component_names[i] << '=' << format_real(r.shares[i]);
    }
    out << '\t' << r.trace_file << '\n';
  }
}

void write_aggregate(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "strategy\tbuffer_size\truns\tfailures\tmedian_best_f\tq1\tq3\tiqr\n";
  for (const auto& r : rows)
    out << r.strategy << '\t' << r.buffer_size << '\t' << r.runs << '\t' << r.failures << '\t'
        << format_real(r.median) << '\t' << format_real(r.q1) << '\t' << format_real(r.q3) << '\t'
        << format_real(r.iqr()) << '\n';
}

ExperimentSummary run_experiment(const ExperimentSpec& spec) {
  namespace fs = std::filesystem;
  const auto jobs = experiment_jobs(spec);
  const fs::path root(spec.output_dir);
  fs::create_directories(root / "traces");

  std::vector<RunSummary> runs(jobs.size());
  parallel_for(jobs.size(), spec.threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    RunSummary& row = runs[i];
    std::string name = sanitize(job.strategy);
    if (job.buffer_size) name += "_b" + std::to_string(*job.buffer_size);
    name += "_s" + std::to_string(job.seed) + ".jsonl";
    try {
      const TaskConfig config = experiment_task(spec, job.seed, job.buffer_size);
      const TuningResult result = run_tuning(config, job.strategy);
      write_trace_file((root / "traces" / name).string(), result);
      row = summarize(result);
      row.strategy = job.strategy;
      row.buffer_size = config.task.buffer_size;
    } catch (const std::exception& ex) {
      row = RunSummary{};
      row.strategy = job.strategy;
      row.buffer_size = job.buffer_size.value_or(0);
      row.seed = job.seed;
      row.ok = false;
      row.error = ex.what();
    }
    row.seed = job.seed;
    row.trace_file = "traces/" + name;
  });

  ExperimentSummary summary{runs, aggregate(runs)};
  std::ofstream s((root / "summary.tsv").string(), std::ios::binary);
  write_summary(s, summary.runs);
  std::ofstream a((root / "aggregate.tsv").string(), std::ios::binary);
  write_aggregate(a, summary.aggregate);
  if (!s || !a) throw std::runtime_error("cannot write experiment summary under " + spec.output_dir);
  return summary;
}

// ------------------------------------------------------------ grid case

std::optional<std::size_t> evaluations_to_reach(const TuningTrace& trace, double target, double relative_gap) {
  const double threshold = target + relative_gap * std::abs(target);
  std::size_t evaluations = trace.initial_cost > 0.0 ? 1 : 0;
  if (trace.initial_performance <= threshold) return evaluations;
  for (const auto& e : trace.epochs) {
    evaluations += e.evaluations + e.context_evaluations;
    if (e.f_global_after <= threshold) return evaluations;
  }
  return std::nullopt;
}

GridCaseTable grid_case_study(const ExperimentSpec& spec, std::size_t enumeration_cap) {
  GridCaseTable table;
  std::vector<std::vector<GridCaseRow>> per_seed(spec.seeds.size());
  parallel_for(spec.seeds.size(), spec.threads, [&](std::size_t i) {
    const auto seed = spec.seeds[i];
    const TaskConfig config = experiment_task(spec, seed, spec.buffer_sizes.empty()
                                                              ? std::nullopt
                                                              : std::optional<std::size_t>(spec.buffer_sizes.front()));
    GridResult oracle;
    try {
      oracle = grid_optimum(SyntheticSystem(config.system), enumeration_cap);
    } catch (const std::length_error&) {
      throw std::runtime_error("scenario '" + spec.scenario + "' exceeds the enumeration cap of " +
                               std::to_string(enumeration_cap) + " points");
    }
    auto& rows = per_seed[i];
    rows.push_back(GridCaseRow{"grid", seed, true, "", oracle.value, oracle.value, 0.0, oracle.evaluations,
                               oracle.evaluations, oracle.evaluations});
    for (const auto& strategy : spec.strategies) {
      GridCaseRow row;
      row.strategy = strategy;
      row.seed = seed;
      row.oracle_f = oracle.value;
      row.oracle_evaluations = oracle.evaluations;
      try {
        const TuningResult r = run_tuning(config, strategy);
        row.best_f = r.f_global;
        row.gap = (r.f_global - oracle.value) / std::abs(oracle.value);
        row.evaluations = r.trace.total_evaluations();
        row.evaluations_to_target = evaluations_to_reach(r.trace, oracle.value, spec.target_gap);
      } catch (const std::exception& ex) {
        row.ok = false;
        row.error = ex.what();
      }
      rows.push_back(std::move(row));
    }
  });
  for (auto& rows : per_seed)
    for (auto& r : rows) table.rows.push_back(std::move(r));
  return table;
}

void write_grid_case(std::ostream& out, const GridCaseTable& table) {
  out << "strategy\tseed\tstatus\tbest_f\toracle_f\tgap\tevaluations\tevaluations_to_target\toracle_evaluations\n";
  for (const auto& r : table.rows) {
    out << r.strategy << '\t' << r.seed << '\t' << (r.ok ? "ok" : "error: " + r.error) << '\t'
        << format_real(r.best_f) << '\t' << format_real(r.oracle_f) << '\t' << format_real(r.gap) << '\t'
        << r.evaluations << '\t' << (r.evaluations_to_target ? std::to_string(*r.evaluations_to_target) : "-")
        << '\t' << r.oracle_evaluations << '\n';
  }
}

}  // namespace coordtune
