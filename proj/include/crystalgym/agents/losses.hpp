#pragma once

#include <random>
#include <span>
#include <vector>

#include "crystalgym/nn/tensor.hpp"

namespace crystalgym::agents {

// Uniform action with probability epsilon, otherwise the first maximiser.
std::size_t epsilon_greedy(std::span<const double> q, double epsilon, std::mt19937_64& rng);
std::size_t argmax(std::span<const double> values) noexcept;  // lowest index on ties

// delta_i = r_i + gamma * (1 - done_i) * max_a next_q(i, a)
std::vector<double> dqn_targets(std::span<const double> rewards, const nn::Matrix& next_q_target,
                                std::span<const bool> dones, double gamma);
// delta_i = r_i + gamma * (1 - done_i) * next_q_target(i, argmax_a next_q_online(i, a))
std::vector<double> double_dqn_targets(std::span<const double> rewards, const nn::Matrix& next_q_online,
                                       const nn::Matrix& next_q_target, std::span<const bool> dones, double gamma);

// mean_i w_i (Q(s_i, a_i) - delta_i)^2. `td_errors` receives delta_i - Q(s_i, a_i) when given.
nn::Tensor td_loss(const nn::Tensor& q, std::span<const int> actions, std::span<const double> targets,
                   std::span<const double> weights, std::vector<double>* td_errors = nullptr);

// Generalised advantage estimates for one episode. values has one entry per
// step; the value after the last step is bootstrap_value (0 when terminal).
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values, double bootstrap_value,
                        double gamma, double lambda);
// (x - mean) / max(std, 1e-8)
std::vector<double> normalize(std::span<const double> x);

struct PpoLoss {
  nn::Tensor total;
  nn::Tensor policy;
  nn::Tensor value;
  nn::Tensor entropy;
};
// logits: B x |A| from the current policy; values: B x 1 from the value net.
PpoLoss ppo_loss(const nn::Tensor& logits, const nn::Tensor& values, std::span<const int> actions,
                 std::span<const double> old_log_probs, std::span<const double> advantages,
                 std::span<const double> returns, double clip, double value_coef, double entropy_coef);

struct SacLosses {
  nn::Tensor q1;      // mean (Q1(s,a) - y)^2
  nn::Tensor q2;
  nn::Tensor policy;  // mean_s sum_a pi (alpha log pi - min Q)
  nn::Tensor alpha;   // log_alpha * mean(H(pi) - target_entropy), alpha-gradient only
  double mean_entropy = 0.0;
};
// Soft Q target y = r + gamma (1 - done) sum_a pi'(a) (min(Q1', Q2')(a) - alpha log pi'(a)).
std::vector<double> sac_targets(std::span<const double> rewards, const nn::Matrix& next_logits,
                                const nn::Matrix& next_q1_target, const nn::Matrix& next_q2_target,
                                std::span<const bool> dones, double gamma, double alpha);
// q1, q2 and logits are at s. The policy loss treats Q as constant; the Q
// losses use the supplied targets; the alpha loss differentiates log_alpha only.
SacLosses sac_losses(const nn::Tensor& q1, const nn::Tensor& q2, const nn::Tensor& logits,
                     std::span<const int> actions, std::span<const double> targets, const nn::Tensor& log_alpha,
                     double target_entropy);

struct ReinforceLoss {
  nn::Tensor total;
  double kl = 0.0;       // sum_t KL(pi || pi_ref)
  double entropy = 0.0;  // sum_t H(pi)
};
// -A sum_t log pi(a_t|s_t) + c_kl sum_t KL(pi(.|s_t) || pi_ref(.|s_t)) - c_h sum_t H(pi(.|s_t))
ReinforceLoss reinforce_loss(const nn::Tensor& logits, const nn::Matrix& reference_logits,
                             std::span<const int> actions, double advantage, double kl_coef, double entropy_coef);

// Row-wise entropy of softmax(logits), as a plain vector.
std::vector<double> entropies(const nn::Matrix& logits);

}  // namespace crystalgym::agents
