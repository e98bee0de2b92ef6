#pragma once

#include <memory>
#include <span>
#include <vector>

#include "crystalgym/agents/agent.hpp"

namespace crystalgym::agents::detail {

std::unique_ptr<Agent> make_value_agent(const AgentConfig& c, std::size_t actions, std::uint64_t seed);
std::unique_ptr<Agent> make_ppo_agent(const AgentConfig& c, std::size_t actions, std::uint64_t seed);
std::unique_ptr<Agent> make_sac_agent(const AgentConfig& c, std::size_t actions, std::uint64_t seed);
std::unique_ptr<Agent> make_reinforce_agent(const AgentConfig& c, std::size_t actions, std::uint64_t seed);

nn::Matrix forward_nograd(const nn::Megnet& net, const GraphFeatures& obs, const nn::ParameterSet* params = nullptr);
std::size_t row_argmax(const nn::Matrix& m, Eigen::Index row);
// Categorical draw from softmax(logits.row(row)) by inverse CDF.
std::size_t sample_softmax(const nn::Matrix& logits, Eigen::Index row, std::mt19937_64& rng);
double row_entropy(const nn::Matrix& logits, Eigen::Index row);
double row_log_prob(const nn::Matrix& logits, Eigen::Index row, std::size_t action);

nn::Adam make_adam(const nn::ParameterSet& params, const AgentConfig& c);

// Row i of the result is dense.row(rows[i]), or zero when rows[i] < 0.
nn::Matrix scatter_rows(const nn::Matrix& dense, std::span<const int> rows, Eigen::Index total);

}  // namespace crystalgym::agents::detail
