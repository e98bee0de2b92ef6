#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "crystalgym/features/graph.hpp"
#include "crystalgym/nn/megnet.hpp"
#include "crystalgym/nn/tensor.hpp"

namespace crystalgym::agents {

enum class Algorithm { dqn, rainbow, ppo, sac, reinforce };

std::string_view to_string(Algorithm a) noexcept;
Algorithm parse_algorithm(std::string_view name);  // ConfigError
bool is_value_based(Algorithm a) noexcept;         // dqn, rainbow

// Trunk shape shared by every network of an agent. Input and output widths
// follow from the action space.
struct NetworkShape {
  std::size_t layers = 3;
  std::size_t width = 32;
  std::size_t hidden = 64;
  std::size_t head_hidden = 64;

  bool operator==(const NetworkShape&) const = default;
};

struct AgentConfig {
  Algorithm algorithm = Algorithm::dqn;
  double gamma = 1.0;
  double learning_rate = 1e-3;
  double grad_clip = 10.0;            // global L2 norm, 0 = off
  NetworkShape network;

  // DQN and Rainbow
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_episodes = 2000;
  std::size_t target_update = 200;    // env steps between hard target copies
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 10000;
  std::size_t train_frequency = 1;    // env steps per gradient update (also SAC)
  std::size_t learning_starts = 32;   // transitions stored before the first update (also SAC)
  double per_alpha = 0.6;
  double per_beta_start = 0.4;
  double per_beta_end = 1.0;          // reached at the end of the episode budget

  // PPO
  double clip = 0.2;
  double gae_lambda = 0.95;
  std::size_t epochs = 4;
  std::size_t minibatches = 4;
  std::size_t rollout_episodes = 8;   // episodes collected per policy update
  double entropy_coef = 0.01;
  double value_coef = 0.5;

  // SAC
  double alpha = 0.2;                 // initial (or fixed) temperature
  bool auto_alpha = true;
  bool twin_q = true;
  double tau = 0.005;
  double target_entropy_ratio = 0.98; // target entropy = ratio * log|A|

  // REINFORCE
  double kl_coef = 0.05;
  double reinforce_entropy_coef = 0.01;
  std::string reference_checkpoint;   // empty: the agent's own initial parameters

  // ConfigError: gamma outside [0,1], clip <= 0, negative coefficients, zero sizes.
  void validate() const;
  bool operator==(const AgentConfig&) const = default;
};

// Conventional defaults per algorithm (learning rate differs).
AgentConfig default_agent_config(Algorithm a);

enum class ActMode {
  train,   // exploration as configured (epsilon-greedy or sampling)
  greedy,  // argmax of Q-values or logits
  sample,  // sample from the policy; argmax for value-based agents
};

// Per-episode figures for the training log. NaN when not applicable.
struct EpisodeStats {
  double exploration = 0.0;  // epsilon for value-based agents, mean policy entropy otherwise
  double loss = 0.0;         // mean training loss of updates run during the episode
  std::size_t updates = 0;
};

struct ParameterGroup {
  std::string name;
  nn::ParameterSet* params;
};

class Agent {
 public:
  virtual ~Agent() = default;

  const AgentConfig& config() const noexcept { return config_; }
  std::size_t action_count() const noexcept { return action_count_; }

  // Called by the trainer before each episode with the budget fraction done.
  virtual void begin_episode(std::size_t episode, double progress);
  virtual std::size_t act(const GraphFeatures& observation, ActMode mode) = 0;
  // Records one transition (after act in train mode).
  virtual void observe(const GraphFeatures& observation, std::size_t action, double reward,
                       const GraphFeatures& next_observation, bool done) = 0;
  virtual EpisodeStats end_episode() = 0;

  // Trainable state for checkpoints, in a fixed order.
  virtual std::vector<ParameterGroup> parameter_groups() = 0;
  // Network config of the group with this name (for layout checks).
  virtual const nn::MegnetConfig& network_config(std::string_view group) const = 0;
  // Re-synchronises target copies and references after parameters were loaded.
  virtual void parameters_loaded() {}

 protected:
  Agent(AgentConfig config, std::size_t action_count, std::uint64_t seed);

  nn::MegnetConfig make_network(std::size_t outputs, bool dueling = false) const;

  AgentConfig config_;
  std::size_t action_count_;
  std::mt19937_64 rng_;
  std::size_t episode_ = 0;
  double progress_ = 0.0;
};

// Builds an agent with freshly initialised networks. `seed` controls both
// initialisation and the agent's own sampling.
std::unique_ptr<Agent> make_agent(const AgentConfig& config, std::size_t action_count, std::uint64_t seed);

// Linear schedule from start to end over `episodes`, constant afterwards.
double linear_schedule(double start, double end, std::size_t episodes, std::size_t episode) noexcept;

}  // namespace crystalgym::agents
