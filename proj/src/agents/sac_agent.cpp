#include <cmath>
#include <limits>
#include <memory>
#include <optional>

#include "crystalgym/agents/losses.hpp"
#include "crystalgym/agents/replay.hpp"
#include "impl.hpp"

namespace crystalgym::agents::detail {
namespace {

// Discrete soft actor-critic with exact expectations over actions.
class SacAgent final : public Agent {
 public:
  SacAgent(const AgentConfig& c, std::size_t actions, std::uint64_t seed)
      : Agent(c, actions, seed),
        policy_(make_network(actions), rng_()),
        q1_(make_network(actions), rng_()),
        q2_(make_network(actions), rng_()),
        q1_target_(q1_.parameters().clone()),
        q2_target_(q2_.parameters().clone()),
        buffer_(c.buffer_capacity, false),
        adam_policy_(make_adam(policy_.parameters(), c)),
        adam_q1_(make_adam(q1_.parameters(), c)),
        adam_q2_(make_adam(q2_.parameters(), c)),
        target_entropy_(c.target_entropy_ratio * std::log(static_cast<double>(actions))) {
    nn::Matrix la(1, 1);
    la(0, 0) = std::log(std::max(c.alpha, 1e-12));
    log_alpha_.add("log_alpha", la);
    adam_alpha_.emplace(make_adam(log_alpha_, c));
  }

  double alpha() const { return config_.alpha == 0.0 && !config_.auto_alpha ? 0.0 : std::exp(log_alpha_[0].tensor.item()); }

  std::size_t act(const GraphFeatures& obs, ActMode mode) override {
    const nn::Matrix logits = forward_nograd(policy_, obs);
    if (mode == ActMode::greedy) return row_argmax(logits, 0);
    if (mode == ActMode::train) {
      entropy_sum_ += row_entropy(logits, 0);
      ++acts_;
    }
    return sample_softmax(logits, 0, rng_);
  }

  void observe(const GraphFeatures& obs, std::size_t action, double reward, const GraphFeatures& next,
               bool done) override {
    buffer_.add({obs, action, reward, done ? GraphFeatures{} : next, done});
    ++steps_;
    if (buffer_.size() >= std::max<std::size_t>(config_.learning_starts, 1) && steps_ % config_.train_frequency == 0) {
      update();
    }
  }

  EpisodeStats end_episode() override {
    EpisodeStats s;
    s.exploration = acts_ ? entropy_sum_ / static_cast<double>(acts_) : std::numeric_limits<double>::quiet_NaN();
    s.updates = updates_;
    s.loss = updates_ ? loss_sum_ / static_cast<double>(updates_) : std::numeric_limits<double>::quiet_NaN();
    entropy_sum_ = 0.0;
    acts_ = 0;
    updates_ = 0;
    loss_sum_ = 0.0;
    return s;
  }

  std::vector<ParameterGroup> parameter_groups() override {
    return {{"policy", &policy_.parameters()}, {"q1", &q1_.parameters()},       {"q2", &q2_.parameters()},
            {"q1_target", &q1_target_},       {"q2_target", &q2_target_},      {"log_alpha", &log_alpha_}};
  }
  const nn::MegnetConfig& network_config(std::string_view group) const override {
    if (group.starts_with("q1")) return q1_.config();
    if (group.starts_with("q2")) return q2_.config();
    return policy_.config();
  }

 private:
  void update() {
    const ReplaySample s = buffer_.sample(config_.batch_size, rng_);
    const std::size_t n = s.indices.size();
    std::vector<const GraphFeatures*> obs, next;
    std::vector<int> next_row(n, -1), actions(n);
    std::vector<double> rewards(n);
    auto dones = std::make_unique<bool[]>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const Transition& t = buffer_[s.indices[k]];
      obs.push_back(&t.observation);
      actions[k] = static_cast<int>(t.action);
      rewards[k] = t.reward;
      dones[k] = t.done;
      if (!t.done) {
        next_row[k] = static_cast<int>(next.size());
        next.push_back(&t.next_observation);
      }
    }
    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(action_count_);
    nn::Matrix next_logits = nn::Matrix::Zero(rows, cols), tq1 = next_logits, tq2 = next_logits;
    if (!next.empty()) {
      nn::NoGradGuard guard;
      const nn::GraphBatch nb = nn::make_batch(next);
      next_logits = scatter_rows(policy_.forward(nb).value(), next_row, rows);
      tq1 = scatter_rows(q1_.forward(nb, &q1_target_).value(), next_row, rows);
      tq2 = config_.twin_q ? scatter_rows(q2_.forward(nb, &q2_target_).value(), next_row, rows) : tq1;
    }
    const std::vector<double> y =
        sac_targets(rewards, next_logits, tq1, tq2, std::span<const bool>(dones.get(), n), config_.gamma, alpha());

    const nn::GraphBatch b = nn::make_batch(obs);
    const nn::Tensor q1 = q1_.forward(b);
    const nn::Tensor q2 = config_.twin_q ? q2_.forward(b) : q1;
    const nn::Tensor logits = policy_.forward(b);
    const SacLosses l = sac_losses(q1, q2, logits, actions, y, log_alpha_[0].tensor, target_entropy_);

    nn::backward(l.q1);
    adam_q1_.step(q1_.parameters());
    if (config_.twin_q) {
      nn::backward(l.q2);
      adam_q2_.step(q2_.parameters());
    }
    nn::backward(l.policy);
    adam_policy_.step(policy_.parameters());
    if (config_.auto_alpha) {
      nn::backward(l.alpha);
      adam_alpha_->step(log_alpha_);
    }
    q1_target_.soft_update(q1_.parameters(), config_.tau);
    if (config_.twin_q) q2_target_.soft_update(q2_.parameters(), config_.tau);

    loss_sum_ += l.q1.item() + l.policy.item();
    ++updates_;
  }

  nn::Megnet policy_;
  nn::Megnet q1_;
  nn::Megnet q2_;
  nn::ParameterSet q1_target_;
  nn::ParameterSet q2_target_;
  ReplayBuffer buffer_;
  nn::Adam adam_policy_;
  nn::Adam adam_q1_;
  nn::Adam adam_q2_;
  nn::ParameterSet log_alpha_;
  std::optional<nn::Adam> adam_alpha_;
  double target_entropy_;
  double entropy_sum_ = 0.0;
  std::size_t acts_ = 0;
  std::size_t steps_ = 0;
  std::size_t updates_ = 0;
  double loss_sum_ = 0.0;
};

}  // namespace

std::unique_ptr<Agent> make_sac_agent(const AgentConfig& c, std::size_t actions, std::uint64_t seed) {
  return std::make_unique<SacAgent>(c, actions, seed);
}

}  // namespace crystalgym::agents::detail
