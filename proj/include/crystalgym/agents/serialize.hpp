#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "crystalgym/agents/agent.hpp"
#include "crystalgym/nn/tensor.hpp"

namespace crystalgym::agents {

nlohmann::json to_json(const AgentConfig& config);
// Keys absent from `j` keep the value in `base`; unknown keys raise
// ConfigError naming the key.
AgentConfig agent_config_from_json(const nlohmann::json& j, AgentConfig base);
AgentConfig agent_config_from_json(const nlohmann::json& j);  // base = defaults of j["algorithm"]

// Parameter names, shapes and values. Doubles round-trip exactly.
nlohmann::json to_json(const nn::ParameterSet& params);
// CheckpointMismatchError unless names and shapes match exactly.
void load_parameters(const nlohmann::json& j, nn::ParameterSet& params);

inline constexpr int kCheckpointVersion = 1;

// Checkpoint file: JSON object {format, version, agent, action_count,
// groups{name: parameters}, meta}. `meta` is free-form caller data.
void save_checkpoint(const std::filesystem::path& path, Agent& agent, const nlohmann::json& meta = nlohmann::json::object());
nlohmann::json read_checkpoint(const std::filesystem::path& path);  // IoError, ParseError
// CheckpointMismatchError when the agent config, action count or any
// parameter layout differs from the checkpoint.
void restore_checkpoint(const nlohmann::json& checkpoint, Agent& agent);
// Rebuilds and restores the agent a checkpoint was written from.
std::unique_ptr<Agent> agent_from_checkpoint(const nlohmann::json& checkpoint);

}  // namespace crystalgym::agents
