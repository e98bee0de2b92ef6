#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "crystalgym/agents/serialize.hpp"
#include "crystalgym/calc/band_gap_mock.hpp"
#include "crystalgym/calc/density.hpp"
#include "crystalgym/calc/surrogate.hpp"
#include "crystalgym/core/errors.hpp"
#include "crystalgym/core/pool.hpp"
#include "crystalgym/harness/experiment.hpp"

namespace crystalgym::harness {

using nlohmann::json;

std::string_view to_string(CalculatorKind k) noexcept {
  switch (k) {
    case CalculatorKind::surrogate: return "surrogate";
    case CalculatorKind::exact: return "exact";
    case CalculatorKind::qe: return "qe";
  }
  return "?";
}

CalculatorKind parse_calculator_kind(std::string_view name) {
  if (name == "surrogate") return CalculatorKind::surrogate;
  if (name == "exact") return CalculatorKind::exact;
  if (name == "qe") return CalculatorKind::qe;
  throw ConfigError("unknown calculator '" + std::string(name) + "' (expected exact, surrogate or qe)");
}

namespace {

std::string_view difficulty_name(Difficulty d) noexcept { return d == Difficulty::hard ? "hard" : "easy"; }

// Agent settings used by the presets: the default hyperparameters on a
// network and update rate small enough for a single CPU core.
agents::AgentConfig desk_agent(agents::Algorithm a) {
  agents::AgentConfig c = agents::default_agent_config(a);
  c.network = {2, 16, 32, 32};
  c.train_frequency = 8;
  return c;
}

const std::vector<std::string> kMixedTrain{"C1", "C2", "C3", "C4", "C5"};
const std::vector<std::string> kMixedEval{"C6", "C7"};

}  // namespace

double ExperimentSpec::resolved_target() const { return target ? *target : benchmark_targets(difficulty)[property]; }

void ExperimentSpec::validate() const {
  if (train_structures.empty() || eval_structures.empty()) throw ConfigError("structure lists must not be empty");
  for (const auto* list : {&train_structures, &eval_structures}) {
    for (const auto& n : *list) {
      try {
        benchmark_structure(n);
      } catch (const LookupError&) {
        throw ConfigError("unknown structure '" + n + "'");
      }
    }
  }
  if (train_structures != eval_structures) {
    for (const auto& n : eval_structures) {
      if (std::find(train_structures.begin(), train_structures.end(), n) != train_structures.end()) {
        throw ConfigError("structure '" + n + "' is in both the train and eval lists");
      }
    }
  }
  try {
    ActionSpace::parse(action_space);
  } catch (const Error& e) {
    throw ConfigError("bad action space '" + action_space + "': " + e.what());
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) throw ConfigError("duplicate seed");
  if (calculator == CalculatorKind::exact && property != Property::density) {
    throw ConfigError("the exact calculator exists for density only");
  }
  if (target && !(*target > 0.0)) throw ConfigError("target must be > 0");
  if (!(cutoff > 0.0) || !(rho > 0.0)) throw ConfigError("cutoff and rho must be > 0");
  agent.validate();
}

std::vector<std::string> preset_names() { return {"exp1", "exp2", "exp3", "exp4", "exp5", "exp6"}; }

ExperimentSpec preset(std::string_view name) {
  ExperimentSpec s;
  s.id = std::string(name);
  s.agent = desk_agent(agents::Algorithm::dqn);
  s.cutoff = 3.5;
  s.output = std::filesystem::path("runs") / s.id;
  auto mixed = [&] {
    s.train_structures = kMixedTrain;
    s.eval_structures = kMixedEval;
  };
  if (name == "exp1") {
  } else if (name == "exp2") {
    s.difficulty = Difficulty::hard;
  } else if (name == "exp3") {
    s.difficulty = Difficulty::hard;
    s.action_space = "medium";
  } else if (name == "exp4") {
    mixed();
  } else if (name == "exp5") {
    mixed();
    s.difficulty = Difficulty::hard;
  } else if (name == "exp6") {
    mixed();
    s.mode = EpisodeMode::substitution;
    s.agent = desk_agent(agents::Algorithm::ppo);
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (exp1..exp6)");
  }
  return s;
}

json to_json(const ExperimentSpec& s) {
  json j;
  j["id"] = s.id;
  j["mode"] = std::string(to_string(s.mode));
  if (s.mixed()) {
    j["structures"] = {{"train", s.train_structures}, {"eval", s.eval_structures}};
  } else {
    j["structures"] = {{"single", s.train_structures.front()}};
  }
  j["difficulty"] = std::string(difficulty_name(s.difficulty));
  if (s.target) j["target"] = *s.target;
  j["action_space"] = s.action_space;
  j["property"] = std::string(to_string(s.property));
  j["calculator"] = std::string(to_string(s.calculator));
  j["mock_seed"] = s.mock_seed;
  j["algorithm"] = std::string(agents::to_string(s.agent.algorithm));
  j["agent"] = agents::to_json(s.agent);
  j["seeds"] = s.seeds;
  j["episodes"] = s.episodes;
  j["eval_rollouts"] = s.eval_rollouts;
  j["threads"] = s.threads;
  j["cutoff"] = s.cutoff;
  j["rho"] = s.rho;
  j["output"] = s.output.string();
  j["cache"] = s.cache.string();
  j["qe"] = {{"k_density", s.qe.k_density},       {"prefix", s.qe.prefix},
             {"outdir", s.qe.outdir},             {"pseudo_dir", s.qe.pseudo_dir},
             {"pseudo_pattern", s.qe.pseudo_pattern}, {"command", s.qe.command},
             {"workdir", s.qe.workdir.string()},  {"timeout_seconds", s.qe.timeout_seconds}};
  return j;
}

namespace {

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError("");
    }
    return j.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("experiment key '" + key + "' has the wrong type");
  }
}

std::vector<std::string> string_list(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError("experiment key '" + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(get_as<std::string>(e, key));
  return out;
}

}  // namespace

ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  static const std::set<std::string> known{"id",        "preset",   "mode",     "structures", "difficulty",
                                           "target",    "action_space", "property", "calculator", "mock_seed",
                                           "algorithm", "agent",    "seeds",    "episodes",   "eval_rollouts",
                                           "threads",   "cutoff",   "rho",      "output",     "cache",
                                           "qe"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown experiment key '" + it.key() + "'");
  }
  const bool from_preset = j.contains("preset");
  ExperimentSpec s = from_preset ? preset(get_as<std::string>(j["preset"], "preset")) : ExperimentSpec{};

  if (j.contains("id")) s.id = get_as<std::string>(j["id"], "id");
  if (j.contains("mode")) s.mode = parse_episode_mode(get_as<std::string>(j["mode"], "mode"));
  if (j.contains("structures")) {
    const json& st = j["structures"];
    if (!st.is_object()) throw ConfigError("experiment key 'structures' must be an object");
    if (st.contains("single")) {
      if (st.size() != 1) throw ConfigError("structures: 'single' excludes other keys");
      const auto name = get_as<std::string>(st["single"], "structures.single");
      s.train_structures = s.eval_structures = {name};
    } else {
      for (auto it = st.begin(); it != st.end(); ++it) {
        if (it.key() != "train" && it.key() != "eval") {
          throw ConfigError("unknown experiment key 'structures." + it.key() + "'");
        }
      }
      if (!st.contains("train") || !st.contains("eval")) {
        throw ConfigError("structures needs 'single' or both 'train' and 'eval'");
      }
      s.train_structures = string_list(st["train"], "structures.train");
      s.eval_structures = string_list(st["eval"], "structures.eval");
    }
  }
  if (j.contains("difficulty")) s.difficulty = parse_difficulty(get_as<std::string>(j["difficulty"], "difficulty"));
  if (j.contains("target")) {
    if (j["target"].is_null()) {
      s.target.reset();
    } else {
      s.target = get_as<double>(j["target"], "target");
    }
  }
  if (j.contains("action_space")) s.action_space = get_as<std::string>(j["action_space"], "action_space");
  if (j.contains("property")) s.property = parse_property(get_as<std::string>(j["property"], "property"));
  if (j.contains("calculator")) s.calculator = parse_calculator_kind(get_as<std::string>(j["calculator"], "calculator"));
  if (j.contains("mock_seed")) s.mock_seed = get_as<std::uint64_t>(j["mock_seed"], "mock_seed");

  std::optional<agents::Algorithm> algorithm;
  if (j.contains("algorithm")) algorithm = agents::parse_algorithm(get_as<std::string>(j["algorithm"], "algorithm"));
  if (j.contains("agent") && j["agent"].is_object() && j["agent"].contains("algorithm")) {
    const auto inner = agents::parse_algorithm(get_as<std::string>(j["agent"]["algorithm"], "agent.algorithm"));
    if (algorithm && *algorithm != inner) throw ConfigError("'algorithm' and 'agent.algorithm' disagree");
    algorithm = inner;
  }
  if (algorithm && *algorithm != s.agent.algorithm) {
    s.agent = from_preset ? desk_agent(*algorithm) : agents::default_agent_config(*algorithm);
  }
  if (j.contains("agent")) s.agent = agents::agent_config_from_json(j["agent"], s.agent);

  if (j.contains("seeds")) {
    if (!j["seeds"].is_array()) throw ConfigError("experiment key 'seeds' must be a list");
    s.seeds.clear();
    for (const auto& e : j["seeds"]) s.seeds.push_back(get_as<std::uint64_t>(e, "seeds"));
  }
  if (j.contains("episodes")) s.episodes = get_as<std::size_t>(j["episodes"], "episodes");
  if (j.contains("eval_rollouts")) s.eval_rollouts = get_as<std::size_t>(j["eval_rollouts"], "eval_rollouts");
  if (j.contains("threads")) s.threads = get_as<std::size_t>(j["threads"], "threads");
  if (j.contains("cutoff")) s.cutoff = get_as<double>(j["cutoff"], "cutoff");
  if (j.contains("rho")) s.rho = get_as<double>(j["rho"], "rho");
  if (j.contains("output")) s.output = get_as<std::string>(j["output"], "output");
  if (j.contains("cache")) s.cache = get_as<std::string>(j["cache"], "cache");
  if (j.contains("qe")) {
    const json& q = j["qe"];
    if (!q.is_object()) throw ConfigError("experiment key 'qe' must be an object");
    for (auto it = q.begin(); it != q.end(); ++it) {
      const std::string key = "qe." + it.key();
      const json& v = it.value();
      if (it.key() == "k_density") s.qe.k_density = get_as<double>(v, key);
      else if (it.key() == "prefix") s.qe.prefix = get_as<std::string>(v, key);
      else if (it.key() == "outdir") s.qe.outdir = get_as<std::string>(v, key);
      else if (it.key() == "pseudo_dir") s.qe.pseudo_dir = get_as<std::string>(v, key);
      else if (it.key() == "pseudo_pattern") s.qe.pseudo_pattern = get_as<std::string>(v, key);
      else if (it.key() == "command") s.qe.command = get_as<std::string>(v, key);
      else if (it.key() == "workdir") s.qe.workdir = get_as<std::string>(v, key);
      else if (it.key() == "timeout_seconds") s.qe.timeout_seconds = get_as<double>(v, key);
      else throw ConfigError("unknown experiment key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

ExperimentSpec load_spec(const std::string& path_or_preset) {
  const std::filesystem::path p(path_or_preset);
  if (!std::filesystem::exists(p)) {
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), path_or_preset) != names.end()) {
      ExperimentSpec s = preset(path_or_preset);
      s.validate();
      return s;
    }
    throw IoError("no config file or preset named '" + path_or_preset + "'");
  }
  std::ifstream in(p);
  if (!in) throw IoError("cannot open config " + p.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("config " + p.string() + " is not valid JSON: " + e.what());
  }
  return spec_from_json(j);
}

std::shared_ptr<const PropertyCalculator> make_calculator(const ExperimentSpec& spec,
                                                          std::shared_ptr<ResultCache> cache) {
  std::shared_ptr<const PropertyCalculator> calc;
  if (spec.calculator == CalculatorKind::qe) {
    calc = std::make_shared<QeCalculator>(spec.property, spec.qe);
  } else {
    switch (spec.property) {
      case Property::density: calc = std::make_shared<DensityCalculator>(); break;
      case Property::bulk_modulus:
        if (spec.calculator == CalculatorKind::exact) throw ConfigError("the exact calculator exists for density only");
        calc = std::make_shared<BulkModulusSurrogate>();
        break;
      case Property::band_gap:
        if (spec.calculator == CalculatorKind::exact) throw ConfigError("the exact calculator exists for density only");
        calc = std::make_shared<BandGapMock>(spec.mock_seed);
        break;
    }
  }
  if (cache) calc = std::make_shared<CachedCalculator>(calc, std::move(cache));
  return calc;
}

EpisodeConfig episode_config(const ExperimentSpec& spec, bool evaluation, std::uint64_t seed) {
  EpisodeConfig c;
  c.property = spec.property;
  c.target = spec.resolved_target();
  c.mode = spec.mode;
  c.pool = make_pool(evaluation ? spec.eval_structures : spec.train_structures);
  c.traversal = evaluation ? Traversal::random : Traversal::fixed;
  c.action_space = ActionSpace::parse(spec.action_space);
  c.seed = seed;
  c.features.graph.cutoff = spec.cutoff;
  c.features.graph.rho = spec.rho;
  // One focus width for both lists so a checkpoint evaluates on either.
  std::size_t width = 0;
  for (const auto* list : {&spec.train_structures, &spec.eval_structures}) {
    for (const auto& n : *list) width = std::max(width, benchmark_structure(n).site_count());
  }
  c.features.focus_width = width;
  return c;
}

EnvSetup env_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("environment config must be a JSON object");
  static const std::set<std::string> known{"property",     "target", "difficulty", "mode",        "structures",
                                           "traversal",    "action_space", "seed",  "cutoff",     "rho",
                                           "focus_width",  "calculator",   "mock_seed", "cache"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown environment key '" + it.key() + "'");
  }
  if (!j.contains("property")) throw ConfigError("environment key 'property' is required");
  ExperimentSpec s;
  s.property = parse_property(get_as<std::string>(j["property"], "property"));
  if (j.contains("difficulty")) s.difficulty = parse_difficulty(get_as<std::string>(j["difficulty"], "difficulty"));
  if (j.contains("target")) s.target = get_as<double>(j["target"], "target");
  if (j.contains("calculator")) s.calculator = parse_calculator_kind(get_as<std::string>(j["calculator"], "calculator"));
  if (j.contains("mock_seed")) s.mock_seed = get_as<std::uint64_t>(j["mock_seed"], "mock_seed");
  if (s.calculator == CalculatorKind::exact && s.property != Property::density) {
    throw ConfigError("the exact calculator exists for density only");
  }

  EpisodeConfig c;
  c.property = s.property;
  c.target = s.resolved_target();
  if (j.contains("mode")) c.mode = parse_episode_mode(get_as<std::string>(j["mode"], "mode"));
  std::vector<std::string> names{"C1"};
  if (j.contains("structures")) {
    names = j["structures"].is_string() ? std::vector<std::string>{j["structures"].get<std::string>()}
                                        : string_list(j["structures"], "structures");
  }
  try {
    c.pool = make_pool(names);
  } catch (const LookupError& e) {
    throw ConfigError(std::string("environment key 'structures': ") + e.what());
  }
  if (j.contains("traversal")) c.traversal = parse_traversal(get_as<std::string>(j["traversal"], "traversal"));
  if (j.contains("action_space")) {
    try {
      c.action_space = ActionSpace::parse(get_as<std::string>(j["action_space"], "action_space"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("environment key 'action_space': ") + e.what());
    }
  }
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("cutoff")) c.features.graph.cutoff = get_as<double>(j["cutoff"], "cutoff");
  if (j.contains("rho")) c.features.graph.rho = get_as<double>(j["rho"], "rho");
  std::size_t width = 0;
  for (const auto& st : c.pool) width = std::max(width, st->site_count());
  c.features.focus_width = j.contains("focus_width") ? get_as<std::size_t>(j["focus_width"], "focus_width") : width;
  if (c.features.graph.cutoff <= 0.0 || c.features.graph.rho <= 0.0) {
    throw ConfigError("environment keys 'cutoff' and 'rho' must be positive");
  }
  c.validate();

  EnvSetup setup;
  if (j.contains("cache")) setup.cache = std::make_shared<ResultCache>(get_as<std::string>(j["cache"], "cache"));
  setup.calculator = make_calculator(s, setup.cache);
  setup.config = std::move(c);
  return setup;
}

}  // namespace crystalgym::harness
