#include "coordtune/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace coordtune {

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& message)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + message : source + ": " + message),
      line_(line) {}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Net count of open brackets outside quotes.
int bracket_depth(const std::string& s) {
  int depth = 0;
  char quote = 0;
  for (char c : s) {
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      --depth;
    }
  }
  return depth;
}

// Splits on commas that are outside quotes and brackets.
std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  int depth = 0;
  char quote = 0;
  for (char c : s) {
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '{' || c == '[' || c == '(') {
      ++depth;
    } else if (c == '}' || c == ']' || c == ')') {
      --depth;
    } else if (c == ',' && depth == 0) {
      parts.push_back(trim(cur));
      cur.clear();
      continue;
    }
    cur += c;
  }
  if (!trim(cur).empty() || !parts.empty()) parts.push_back(trim(cur));
  return parts;
}

}  // namespace

const IniSection* IniDocument::find(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

IniDocument parse_ini(std::istream& in, const std::string& source) {
  IniDocument doc;
  doc.source = source;
  std::string raw;
  std::size_t lineno = 0;
  IniEntry* open_entry = nullptr;
  int depth = 0;
  std::size_t open_line = 0;

  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (open_entry) {
      open_entry->value += ' ';
      open_entry->value += line;
      depth += bracket_depth(line);
      if (depth <= 0) {
        open_entry->value = trim(open_entry->value);
        open_entry = nullptr;
      }
      continue;
    }
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, lineno, "malformed section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError(source, lineno, "empty section name");
      if (doc.find(name)) throw ConfigError(source, lineno, "duplicate section [" + name + "]");
      doc.sections.push_back(IniSection{name, lineno, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, lineno, "expected 'key = value'");
    if (doc.sections.empty()) throw ConfigError(source, lineno, "key outside of any section");
    IniEntry entry{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
    if (entry.key.empty()) throw ConfigError(source, lineno, "empty key");
    auto& entries = doc.sections.back().entries;
    for (const auto& e : entries)
      if (e.key == entry.key) throw ConfigError(source, lineno, "duplicate key '" + entry.key + "'");
    entries.push_back(std::move(entry));
    depth = bracket_depth(entries.back().value);
    if (depth > 0) {
      open_entry = &entries.back();
      open_line = lineno;
    }
  }
  if (open_entry) throw ConfigError(source, open_line, "unterminated value for '" + open_entry->key + "'");
  return doc;
}

IniDocument parse_ini_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse_ini(in, source);
}

IniDocument parse_ini_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open file");
  return parse_ini(in, path);
}

std::string unquote(const std::string& text) {
  const std::string t = trim(text);
  if (t.size() >= 2 && (t.front() == '\'' || t.front() == '"') && t.back() == t.front())
    return t.substr(1, t.size() - 2);
  return t;
}

std::vector<std::pair<std::string, std::string>> parse_dict(const std::string& text) {
  const std::string t = trim(text);
  if (t.size() < 2 || t.front() != '{' || t.back() != '}') throw std::invalid_argument("expected a {key: value} map");
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : split_top_level(t.substr(1, t.size() - 2))) {
    if (item.empty()) throw std::invalid_argument("empty entry in map");
    // First colon outside quotes separates key and value.
    char quote = 0;
    std::size_t colon = std::string::npos;
    for (std::size_t i = 0; i < item.size(); ++i) {
      const char c = item[i];
      if (quote) {
        if (c == quote) quote = 0;
      } else if (c == '\'' || c == '"') {
        quote = c;
      } else if (c == ':') {
        colon = i;
        break;
      }
    }
    if (colon == std::string::npos) throw std::invalid_argument("map entry '" + item + "' has no ':'");
    std::string key = unquote(item.substr(0, colon));
    std::string value = unquote(item.substr(colon + 1));
    if (key.empty()) throw std::invalid_argument("empty key in map");
    for (const auto& [k, v] : out)
      if (k == key) throw std::invalid_argument("duplicate key '" + key + "' in map");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::vector<std::string> parse_list(const std::string& text) {
  std::string t = trim(text);
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
  std::vector<std::string> out;
  for (const auto& item : split_top_level(t)) {
    if (item.empty()) throw std::invalid_argument("empty entry in list");
    out.push_back(unquote(item));
  }
  return out;
}

namespace {

std::uint64_t parse_u64(const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty())
    throw std::invalid_argument("'" + text + "' is not a non-negative integer");
  return v;
}

double parse_real(const std::string& text) {
  const std::string t = unquote(text);
  double v = 0.0;
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty() || !std::isfinite(v))
    throw std::invalid_argument("'" + text + "' is not a finite number");
  return v;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : parse_list(text)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      seeds.push_back(parse_u64(item));
      continue;
    }
    const auto lo = parse_u64(item.substr(0, dash));
    const auto hi = parse_u64(item.substr(dash + 1));
    if (hi < lo) throw std::invalid_argument("seed range '" + item + "' is empty");
    if (hi - lo > 1'000'000) throw std::invalid_argument("seed range '" + item + "' is too large");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw std::invalid_argument("no seeds given");
  return seeds;
}

const std::vector<std::pair<std::string, AgentKind>>& agent_aliases() {
  static const std::vector<std::pair<std::string, AgentKind>> aliases{
      {"BO", AgentKind::BO},
      {"RL", AgentKind::RL},
      {"RLEstimator", AgentKind::RLEstimator},
      {"RuleBased", AgentKind::RuleBased},
      {"OtterTune", AgentKind::BO},
      {"DBA-Bandit", AgentKind::BO},
      {"CDBTune", AgentKind::RL},
      {"SmartIX", AgentKind::RL},
      {"LearnedRewrite", AgentKind::RLEstimator},
      {"AutoView", AgentKind::RLEstimator},
      {"MySQLTuner", AgentKind::RuleBased},
  };
  return aliases;
}

AgentKind resolve_agent_kind(const std::string& name) {
  for (const auto& [alias, kind] : agent_aliases())
    if (alias == name) return kind;
  throw std::invalid_argument("unknown agent '" + name + "'");
}

namespace {

ComponentSpec component(std::size_t index, const std::string& role, const std::string& agent) {
  return ComponentSpec{ComponentId{index, role}, resolve_agent_kind(agent), agent};
}

}  // namespace

ScenarioPreset scenario_preset(const std::string& name) {
  ScenarioPreset p;
  p.name = name;
  if (name == "default-3c") {
    p.system.knob_dims = 12;
    p.components = {component(0, "index", "DBA-Bandit"), component(1, "knob", "CDBTune"),
                    component(2, "query", "LearnedRewrite")};
    p.tuning_budget = 24000.0;
  } else if (name == "small-grid") {
    p.system.knob_dims = 3;
    p.system.index_bits = 10;
    p.system.queries = 1;
    p.system.rewrites = 4;
    p.components = {component(0, "index", "DBA-Bandit"), component(1, "knob", "OtterTune"),
                    component(2, "query", "LearnedRewrite")};
    p.tuning_budget = 36000.0;
  } else if (name == "wide-knob") {
    p.system.component_order = {"index", "knob"};
    p.system.knob_dims = 20;
    p.system.queries = 0;
    p.components = {component(0, "index", "DBA-Bandit"), component(1, "knob", "OtterTune")};
    p.tuning_budget = 24000.0;
  } else {
    throw std::invalid_argument("unknown scenario '" + name + "'");
  }
  return p;
}

std::vector<std::string> scenario_names() { return {"default-3c", "small-grid", "wide-knob"}; }

namespace {

class SectionReader {
 public:
  SectionReader(const IniDocument& doc, const IniSection& section) : doc_(doc), section_(section) {}

  const IniEntry* get(const std::string& key) {
    seen_.insert(key);
    for (const auto& e : section_.entries)
      if (e.key == key) return &e;
    return nullptr;
  }

  const IniEntry& require(const std::string& key) {
    const IniEntry* e = get(key);
    if (!e) throw ConfigError(doc_.source, section_.line, "[" + section_.name + "] is missing '" + key + "'");
    return *e;
  }

  template <typename T, typename F>
  void read(const std::string& key, T& out, F convert) {
    if (const IniEntry* e = get(key)) out = wrap(*e, convert);
  }

  void real(const std::string& key, double& out) { read(key, out, parse_real); }
  void size(const std::string& key, std::size_t& out) {
    read(key, out, [](const std::string& v) { return static_cast<std::size_t>(parse_u64(unquote(v))); });
  }
  void integer(const std::string& key, int& out) {
    read(key, out, [](const std::string& v) {
      const auto n = parse_u64(unquote(v));
      if (n > 1'000'000) throw std::invalid_argument("value too large");
      return static_cast<int>(n);
    });
  }

  template <typename F>
  auto wrap(const IniEntry& e, F convert) -> decltype(convert(e.value)) {
    try {
      return convert(e.value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ConfigError(doc_.source, e.line, "'" + e.key + "': " + ex.what());
    }
  }

  void finish() const {
    for (const auto& e : section_.entries)
      if (!seen_.count(e.key))
        throw ConfigError(doc_.source, e.line, "unknown key '" + e.key + "' in [" + section_.name + "]");
  }

 private:
  const IniDocument& doc_;
  const IniSection& section_;
  std::set<std::string> seen_;
};

void read_system(SectionReader& r, SyntheticSystemSpec& s) {
  r.read("seed", s.seed, [](const std::string& v) { return parse_u64(unquote(v)); });
  r.size("knob_dims", s.knob_dims);
  r.size("index_bits", s.index_bits);
  r.size("queries", s.queries);
  r.size("rewrites", s.rewrites);
  r.real("capacity_fraction", s.capacity_fraction);
  r.real("diminishing", s.diminishing);
  r.size("metric_dims", s.metric_dims);
  r.real("noise_sigma", s.noise_sigma);
  r.real("eval_cost", s.eval_cost);
}

void read_agent(SectionReader& r, AgentSettings& a) {
  r.size("candidates", a.candidates);
  r.size("refit_every", a.refit_every);
  r.integer("refit_iterations", a.refit_iterations);
  r.size("buckets", a.buckets);
  r.real("epsilon", a.epsilon);
  r.real("epsilon_decay", a.epsilon_decay);
  r.real("learning_rate", a.learning_rate);
  r.real("discount", a.discount);
  r.size("episodes", a.episodes);
  r.size("episode_length", a.episode_length);
  r.size("max_rejections", a.max_rejections);
}

}  // namespace

TaskConfig task_from_preset(const ScenarioPreset& preset, std::uint64_t seed) {
  TaskConfig c;
  c.scenario = preset.name;
  c.system = preset.system;
  c.system.seed = seed;
  c.settings = preset.settings;
  c.task.components = preset.components;
  c.task.tuning_budget = preset.tuning_budget;
  c.task.sub_budget = 2.0 * c.system.eval_cost * static_cast<double>(preset.k_evals);
  c.task.seed = seed;
  return c;
}

TaskConfig parse_task(const IniDocument& doc) {
  static const std::set<std::string> known{"Tuning-Setting", "Allocator", "System", "Agent"};
  for (const auto& s : doc.sections)
    if (!known.count(s.name)) throw ConfigError(doc.source, s.line, "unknown section [" + s.name + "]");
  const IniSection* tuning = doc.find("Tuning-Setting");
  if (!tuning) throw ConfigError(doc.source, 0, "missing [Tuning-Setting] section");

  // Scenario first: it supplies the defaults every other key overrides.
  std::string scenario = "default-3c";
  const IniSection* system_section = doc.find("System");
  if (system_section)
    for (const auto& e : system_section->entries)
      if (e.key == "scenario") scenario = unquote(e.value);
  ScenarioPreset preset;
  try {
    preset = scenario_preset(scenario);
  } catch (const std::exception& ex) {
    throw ConfigError(doc.source, system_section ? system_section->line : 0, ex.what());
  }

  TaskConfig c;
  c.scenario = scenario;
  c.system = preset.system;
  c.settings = preset.settings;
  std::size_t k_evals = preset.k_evals;
  std::optional<double> sub_budget;
  bool system_seed_set = false;

  SectionReader t(doc, *tuning);
  const IniEntry& comps = t.require("components");
  const auto pairs = t.wrap(comps, parse_dict);
  if (pairs.empty()) throw ConfigError(doc.source, comps.line, "'components' is empty");
  c.system.component_order.clear();
  for (const auto& [role, agent] : pairs) {
    if (role != "index" && role != "knob" && role != "query")
      throw ConfigError(doc.source, comps.line, "unknown component '" + role + "' (expected index, knob or query)");
    c.task.components.push_back(t.wrap(comps, [&](const std::string&) {
      return component(c.task.components.size(), role, agent);
    }));
    c.system.component_order.push_back(role);
  }
  c.task.tuning_budget = t.wrap(t.require("tuning_budget"), parse_real);
  if (const IniEntry* e = t.get("performance_metric")) {
    c.task.performance_metric = unquote(e->value);
    if (c.task.performance_metric != "execution-time")
      throw ConfigError(doc.source, e->line, "only the 'execution-time' metric is supported");
  }
  if (const IniEntry* e = t.get("sub_budget")) sub_budget = t.wrap(*e, parse_real);
  t.size("k_evals", k_evals);
  t.read("seed", c.task.seed, [](const std::string& v) { return parse_u64(unquote(v)); });
  t.finish();

  if (const IniSection* s = doc.find("Allocator")) {
    SectionReader r(doc, *s);
    if (const IniEntry* e = r.get("strategy")) c.strategy = r.wrap(*e, [](const std::string& v) {
        return parse_strategy(unquote(v));
      });
    auto positive = [](const std::string& v) {
      const auto n = static_cast<std::size_t>(parse_u64(unquote(v)));
      if (n == 0) throw std::invalid_argument("must be at least 1");
      return n;
    };
    r.read("buffer_size", c.task.buffer_size, positive);
    r.read("bootstrap_rounds", c.task.bootstrap_rounds, positive);
    if (const IniEntry* e = r.get("rfactor")) c.task.rfactor = r.wrap(*e, parse_real);
    r.finish();
  }
  if (system_section) {
    SectionReader r(doc, *system_section);
    r.get("scenario");
    system_seed_set = r.get("seed") != nullptr;
    read_system(r, c.system);
    r.finish();
  }
  if (const IniSection* s = doc.find("Agent")) {
    SectionReader r(doc, *s);
    read_agent(r, c.settings);
    r.finish();
  }
  if (!system_seed_set) c.system.seed = c.task.seed;
  c.task.sub_budget = sub_budget ? *sub_budget : 2.0 * c.system.eval_cost * static_cast<double>(k_evals);
  try {
    c.task.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(doc.source, tuning->line, ex.what());
  }
  return c;
}

TaskConfig parse_task_file(const std::string& path) { return parse_task(parse_ini_file(path)); }

TaskConfig parse_task_text(const std::string& text, const std::string& source) {
  return parse_task(parse_ini_text(text, source));
}

ExperimentSpec parse_experiment(const IniDocument& doc) {
  static const std::set<std::string> known{"Experiment", "System", "Agent"};
  for (const auto& s : doc.sections)
    if (!known.count(s.name)) throw ConfigError(doc.source, s.line, "unknown section [" + s.name + "]");
  const IniSection* section = doc.find("Experiment");
  if (!section) throw ConfigError(doc.source, 0, "missing [Experiment] section");

  ExperimentSpec spec;
  SectionReader r(doc, *section);
  const IniEntry* scenario = r.get("scenario");
  if (scenario) spec.scenario = unquote(scenario->value);
  ScenarioPreset preset;
  try {
    preset = scenario_preset(spec.scenario);
  } catch (const std::exception& ex) {
    throw ConfigError(doc.source, scenario ? scenario->line : section->line, ex.what());
  }
  r.read("strategies", spec.strategies, [](const std::string& v) {
    auto list = parse_list(v);
    if (list.empty()) throw std::invalid_argument("no strategies given");
    for (const auto& s : list)
      if (s != "joint") parse_strategy(s);
    return list;
  });
  r.read("seeds", spec.seeds, parse_seed_list);
  r.read("buffer_sizes", spec.buffer_sizes, [](const std::string& v) {
    std::vector<std::size_t> sizes;
    for (const auto& item : parse_list(v)) {
      const auto n = parse_u64(item);
      if (n == 0) throw std::invalid_argument("buffer sizes must be at least 1");
      sizes.push_back(static_cast<std::size_t>(n));
    }
    return sizes;
  });
  if (const IniEntry* e = r.get("tuning_budget")) spec.tuning_budget = r.wrap(*e, parse_real);
  if (const IniEntry* e = r.get("output_dir")) spec.output_dir = unquote(e->value);
  r.size("threads", spec.threads);
  r.real("target_gap", spec.target_gap);
  r.finish();
  if (spec.threads == 0) spec.threads = 1;

  if (const IniSection* s = doc.find("System")) {
    SectionReader sr(doc, *s);
    SyntheticSystemSpec system = preset.system;
    if (sr.get("seed")) throw ConfigError(doc.source, s->line, "the system seed follows the run seed; remove 'seed'");
    read_system(sr, system);
    sr.finish();
    spec.system = system;
  }
  if (const IniSection* s = doc.find("Agent")) {
    SectionReader ar(doc, *s);
    AgentSettings settings = preset.settings;
    read_agent(ar, settings);
    ar.finish();
    spec.settings = settings;
  }
  return spec;
}

ExperimentSpec parse_experiment_file(const std::string& path) { return parse_experiment(parse_ini_file(path)); }

ExperimentSpec parse_experiment_text(const std::string& text, const std::string& source) {
  return parse_experiment(parse_ini_text(text, source));
}

std::vector<std::size_t> resolve_order(const std::vector<std::string>& order,
                                       const std::vector<std::string>& component_names) {
  std::vector<std::size_t> out;
  if (order.empty()) return out;
  for (const auto& item : order) {
    std::optional<std::size_t> hit;
    for (std::size_t i = 0; i < component_names.size(); ++i)
      if (component_names[i] == item) hit = i;
    if (!hit) {
      for (std::size_t i = 0; i < component_names.size(); ++i) {
        if (component_names[i].rfind(item, 0) != 0) continue;
        if (hit) throw std::invalid_argument("ambiguous component '" + item + "' in sequential order");
        hit = i;
      }
    }
    if (!hit && !item.empty() && std::all_of(item.begin(), item.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
      const auto n = parse_u64(item);
      if (n < component_names.size()) hit = static_cast<std::size_t>(n);
    }
    if (!hit) throw std::invalid_argument("unknown component '" + item + "' in sequential order");
    out.push_back(*hit);
  }
  auto sorted = out;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() != component_names.size() || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("sequential order must list every component exactly once");
  return out;
}

}  // namespace coordtune
