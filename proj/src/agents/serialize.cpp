#include "crystalgym/agents/serialize.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "crystalgym/core/errors.hpp"

namespace crystalgym::agents {

using nlohmann::json;

namespace {

// Visits every scalar field with its key. `f(key, member&)` for double,
// std::size_t, bool and std::string members.
template <class Config, class F>
void visit_fields(Config& c, F&& f) {
  f("gamma", c.gamma);
  f("learning_rate", c.learning_rate);
  f("grad_clip", c.grad_clip);
  f("network.layers", c.network.layers);
  f("network.width", c.network.width);
  f("network.hidden", c.network.hidden);
  f("network.head_hidden", c.network.head_hidden);
  f("epsilon_start", c.epsilon_start);
  f("epsilon_end", c.epsilon_end);
  f("epsilon_decay_episodes", c.epsilon_decay_episodes);
  f("target_update", c.target_update);
  f("batch_size", c.batch_size);
  f("buffer_capacity", c.buffer_capacity);
  f("train_frequency", c.train_frequency);
  f("learning_starts", c.learning_starts);
  f("per_alpha", c.per_alpha);
  f("per_beta_start", c.per_beta_start);
  f("per_beta_end", c.per_beta_end);
  f("clip", c.clip);
  f("gae_lambda", c.gae_lambda);
  f("epochs", c.epochs);
  f("minibatches", c.minibatches);
  f("rollout_episodes", c.rollout_episodes);
  f("entropy_coef", c.entropy_coef);
  f("value_coef", c.value_coef);
  f("alpha", c.alpha);
  f("auto_alpha", c.auto_alpha);
  f("twin_q", c.twin_q);
  f("tau", c.tau);
  f("target_entropy_ratio", c.target_entropy_ratio);
  f("kl_coef", c.kl_coef);
  f("reinforce_entropy_coef", c.reinforce_entropy_coef);
  f("reference_checkpoint", c.reference_checkpoint);
}

const json* lookup(const json& j, const std::string& dotted) {
  const json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
    if (dot == std::string::npos) return node;
    start = dot + 1;
  }
}

void collect_keys(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      collect_keys(it.value(), key, out);
    } else {
      out.push_back(key);
    }
  }
}

template <class T>
void read_value(const json& v, const std::string& key, T& out) {
  try {
    if constexpr (std::is_same_v<T, std::size_t>) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("");
      out = v.get<std::size_t>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
      out = v.get<double>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
      out = v.get<bool>();
    } else {
      if (!v.is_string()) throw ConfigError("");
      out = v.get<std::string>();
    }
  } catch (const Error&) {
    throw ConfigError("agent config key '" + key + "' has the wrong type");
  }
}

}  // namespace

json to_json(const AgentConfig& config) {
  json j;
  j["algorithm"] = std::string(to_string(config.algorithm));
  visit_fields(config, [&](const std::string& key, const auto& v) {
    const std::size_t dot = key.find('.');
    if (dot == std::string::npos) {
      j[key] = v;
    } else {
      j[key.substr(0, dot)][key.substr(dot + 1)] = v;
    }
  });
  return j;
}

AgentConfig agent_config_from_json(const json& j, AgentConfig base) {
  if (!j.is_object()) throw ConfigError("agent config must be an object");
  std::set<std::string> known{"algorithm"};
  visit_fields(base, [&](const std::string& key, auto&) { known.insert(key); });
  std::vector<std::string> keys;
  collect_keys(j, "", keys);
  for (const auto& k : keys) {
    if (!known.count(k)) throw ConfigError("unknown agent config key '" + k + "'");
  }
  if (j.contains("algorithm")) {
    if (!j["algorithm"].is_string()) throw ConfigError("agent config key 'algorithm' has the wrong type");
    base.algorithm = parse_algorithm(j["algorithm"].get<std::string>());
  }
  visit_fields(base, [&](const std::string& key, auto& member) {
    if (const json* v = lookup(j, key)) read_value(*v, key, member);
  });
  base.validate();
  return base;
}

AgentConfig agent_config_from_json(const json& j) {
  Algorithm a = Algorithm::dqn;
  if (j.is_object() && j.contains("algorithm") && j["algorithm"].is_string()) {
    a = parse_algorithm(j["algorithm"].get<std::string>());
  }
  return agent_config_from_json(j, default_agent_config(a));
}

json to_json(const nn::ParameterSet& params) {
  json arr = json::array();
  for (const auto& p : params) {
    const auto& m = p.tensor.value();
    arr.push_back({{"name", p.name},
                   {"rows", m.rows()},
                   {"cols", m.cols()},
                   {"values", std::vector<double>(m.data(), m.data() + m.size())}});
  }
  return arr;
}

void load_parameters(const json& j, nn::ParameterSet& params) {
  if (!j.is_array() || j.size() != params.size()) throw CheckpointMismatchError("parameter count differs");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = j[i];
    auto& p = params[i];
    auto& m = p.tensor.mutable_value();
    try {
      if (e.at("name").get<std::string>() != p.name || e.at("rows").get<long long>() != m.rows() ||
          e.at("cols").get<long long>() != m.cols() || e.at("values").size() != static_cast<std::size_t>(m.size())) {
        throw CheckpointMismatchError("parameter '" + p.name + "' differs in name or shape");
      }
      const auto values = e.at("values").get<std::vector<double>>();
      std::copy(values.begin(), values.end(), m.data());
    } catch (const json::exception& ex) {
      throw CheckpointMismatchError(std::string("malformed parameter entry: ") + ex.what());
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, Agent& agent, const json& meta) {
  json j;
  j["format"] = "crystalgym-checkpoint";
  j["version"] = kCheckpointVersion;
  j["agent"] = to_json(agent.config());
  j["action_count"] = agent.action_count();
  j["groups"] = json::object();
  for (const auto& g : agent.parameter_groups()) j["groups"][g.name] = to_json(*g.params);
  j["meta"] = meta;
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write checkpoint " + tmp);
    out << j.dump() << '\n';
    if (!out) throw IoError("short write to checkpoint " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

json read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ParseError("checkpoint " + path.string() + " is not valid JSON: " + ex.what());
  }
  if (!j.is_object() || j.value("format", "") != "crystalgym-checkpoint") {
    throw ParseError("checkpoint " + path.string() + " has no crystalgym header");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw CheckpointMismatchError("unsupported checkpoint version");
  }
  return j;
}

void restore_checkpoint(const json& checkpoint, Agent& agent) {
  AgentConfig saved;
  try {
    saved = agent_config_from_json(checkpoint.at("agent"));
  } catch (const json::exception& ex) {
    throw CheckpointMismatchError(std::string("checkpoint lacks an agent config: ") + ex.what());
  }
  AgentConfig expected = agent.config();
  // The reference path only seeds initialisation; the stored groups win.
  saved.reference_checkpoint.clear();
  expected.reference_checkpoint.clear();
  if (!(saved == expected)) throw CheckpointMismatchError("checkpoint agent config differs from the requested one");
  if (checkpoint.value("action_count", std::size_t{0}) != agent.action_count()) {
    throw CheckpointMismatchError("checkpoint action count differs");
  }
  const json& groups = checkpoint.at("groups");
  for (const auto& g : agent.parameter_groups()) {
    if (!groups.contains(g.name)) throw CheckpointMismatchError("checkpoint lacks parameter group '" + g.name + "'");
    load_parameters(groups.at(g.name), *g.params);
  }
  agent.parameters_loaded();
}

std::unique_ptr<Agent> agent_from_checkpoint(const json& checkpoint) {
  AgentConfig c;
  std::size_t actions = 0;
  try {
    c = agent_config_from_json(checkpoint.at("agent"));
    actions = checkpoint.at("action_count").get<std::size_t>();
  } catch (const json::exception& ex) {
    throw CheckpointMismatchError(std::string("checkpoint header incomplete: ") + ex.what());
  }
  // A reference policy is already stored in the checkpoint's own groups.
  c.reference_checkpoint.clear();
  auto agent = make_agent(c, actions, 0);
  restore_checkpoint(checkpoint, *agent);
  return agent;
}

}  // namespace crystalgym::agents
