#include "crystalgym/agents/agent.hpp"

#include <algorithm>
#include <cmath>

#include "crystalgym/core/errors.hpp"
#include "impl.hpp"

namespace crystalgym::agents {

std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::dqn: return "dqn";
    case Algorithm::rainbow: return "rainbow";
    case Algorithm::ppo: return "ppo";
    case Algorithm::sac: return "sac";
    case Algorithm::reinforce: return "reinforce";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::dqn, Algorithm::rainbow, Algorithm::ppo, Algorithm::sac, Algorithm::reinforce}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown algorithm '" + std::string(name) + "' (dqn, rainbow, ppo, sac, reinforce)");
}

bool is_value_based(Algorithm a) noexcept { return a == Algorithm::dqn || a == Algorithm::rainbow; }

void AgentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(clip > 0.0)) fail("clip must be > 0");
  for (double v : {grad_clip, entropy_coef, value_coef, alpha, kl_coef, reinforce_entropy_coef, target_entropy_ratio}) {
    if (!(v >= 0.0)) fail("coefficients must be >= 0");
  }
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    fail("epsilon schedule must lie in [0, 1]");
  }
  if (!(per_alpha >= 0.0 && per_beta_start >= 0.0 && per_beta_end >= 0.0)) fail("PER exponents must be >= 0");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in [0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (batch_size == 0 || buffer_capacity == 0 || train_frequency == 0 || target_update == 0 || epochs == 0 ||
      minibatches == 0 || rollout_episodes == 0) {
    fail("sizes and intervals must be >= 1");
  }
  if (network.layers == 0 || network.width == 0 || network.hidden == 0 || network.head_hidden == 0) {
    fail("network widths must be >= 1");
  }
}

AgentConfig default_agent_config(Algorithm a) {
  AgentConfig c;
  c.algorithm = a;
  if (a == Algorithm::ppo || a == Algorithm::sac || a == Algorithm::reinforce) c.learning_rate = 3e-4;
  return c;
}

double linear_schedule(double start, double end, std::size_t episodes, std::size_t episode) noexcept {
  if (episodes == 0 || episode >= episodes) return end;
  const double f = static_cast<double>(episode) / static_cast<double>(episodes);
  return start + (end - start) * f;
}

Agent::Agent(AgentConfig config, std::size_t action_count, std::uint64_t seed)
    : config_(std::move(config)), action_count_(action_count), rng_(seed) {
  config_.validate();
  if (action_count_ == 0) throw ConfigError("agent needs at least one action");
}

void Agent::begin_episode(std::size_t episode, double progress) {
  episode_ = episode;
  progress_ = std::clamp(progress, 0.0, 1.0);
}

nn::MegnetConfig Agent::make_network(std::size_t outputs, bool dueling) const {
  nn::MegnetConfig m;
  m.node_input = action_count_ + 1;
  m.layers = config_.network.layers;
  m.width = config_.network.width;
  m.hidden = config_.network.hidden;
  m.head_hidden = config_.network.head_hidden;
  m.outputs = outputs;
  m.dueling = dueling;
  return m;
}

std::unique_ptr<Agent> make_agent(const AgentConfig& config, std::size_t action_count, std::uint64_t seed) {
  switch (config.algorithm) {
    case Algorithm::dqn:
    case Algorithm::rainbow: return detail::make_value_agent(config, action_count, seed);
    case Algorithm::ppo: return detail::make_ppo_agent(config, action_count, seed);
    case Algorithm::sac: return detail::make_sac_agent(config, action_count, seed);
    case Algorithm::reinforce: return detail::make_reinforce_agent(config, action_count, seed);
  }
  throw ConfigError("unknown algorithm");
}

namespace detail {

nn::Matrix forward_nograd(const nn::Megnet& net, const GraphFeatures& obs, const nn::ParameterSet* params) {
  nn::NoGradGuard guard;
  return net.forward(nn::make_batch(obs), params).value();
}

std::size_t row_argmax(const nn::Matrix& m, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(row, c) > m(row, best)) best = c;
  }
  return static_cast<std::size_t>(best);
}

namespace {
double row_logsumexp(const nn::Matrix& m, Eigen::Index row) {
  const double mx = m.row(row).maxCoeff();
  return mx + std::log((m.row(row).array() - mx).exp().sum());
}
}  // namespace

std::size_t sample_softmax(const nn::Matrix& logits, Eigen::Index row, std::mt19937_64& rng) {
  const double lse = row_logsumexp(logits, row);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u = u01(rng);
  double cum = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    cum += std::exp(logits(row, c) - lse);
    if (u < cum) return static_cast<std::size_t>(c);
  }
  return static_cast<std::size_t>(logits.cols() - 1);
}

double row_entropy(const nn::Matrix& logits, Eigen::Index row) {
  const double lse = row_logsumexp(logits, row);
  double h = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double lp = logits(row, c) - lse;
    h -= std::exp(lp) * lp;
  }
  return h;
}

double row_log_prob(const nn::Matrix& logits, Eigen::Index row, std::size_t action) {
  return logits(row, static_cast<Eigen::Index>(action)) - row_logsumexp(logits, row);
}

nn::Adam make_adam(const nn::ParameterSet& params, const AgentConfig& c) {
  nn::Adam::Options o;
  o.learning_rate = c.learning_rate;
  o.grad_clip = c.grad_clip;
  return nn::Adam(params, o);
}

nn::Matrix scatter_rows(const nn::Matrix& dense, std::span<const int> rows, Eigen::Index total) {
  nn::Matrix out = nn::Matrix::Zero(total, dense.cols());
  for (Eigen::Index i = 0; i < total; ++i) {
    if (rows[static_cast<std::size_t>(i)] >= 0) out.row(i) = dense.row(rows[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace detail
}  // namespace crystalgym::agents
