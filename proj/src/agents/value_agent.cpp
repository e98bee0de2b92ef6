#include <cmath>
#include <limits>
#include <memory>

#include "crystalgym/agents/losses.hpp"
#include "crystalgym/agents/replay.hpp"
#include "impl.hpp"

namespace crystalgym::agents::detail {
namespace {

// DQN, or Rainbow (double targets + dueling head + prioritised replay).
class ValueAgent final : public Agent {
 public:
  ValueAgent(const AgentConfig& c, std::size_t actions, std::uint64_t seed)
      : Agent(c, actions, seed),
        rainbow_(c.algorithm == Algorithm::rainbow),
        online_(make_network(actions, rainbow_), rng_()),
        target_(online_.parameters().clone()),
        buffer_(c.buffer_capacity, rainbow_, c.per_alpha),
        adam_(make_adam(online_.parameters(), c)) {}

  double epsilon() const {
    return linear_schedule(config_.epsilon_start, config_.epsilon_end, config_.epsilon_decay_episodes, episode_);
  }

  std::size_t act(const GraphFeatures& obs, ActMode mode) override {
    if (mode == ActMode::train) {
      const double eps = epsilon();
      if (eps > 0.0 && coin_(rng_) < eps) {
        std::uniform_int_distribution<std::size_t> pick(0, action_count_ - 1);
        return pick(rng_);
      }
    }
    return row_argmax(forward_nograd(online_, obs), 0);
  }

  void observe(const GraphFeatures& obs, std::size_t action, double reward, const GraphFeatures& next,
               bool done) override {
    buffer_.add({obs, action, reward, done ? GraphFeatures{} : next, done});
    ++steps_;
    if (buffer_.size() >= std::max<std::size_t>(config_.learning_starts, 1) && steps_ % config_.train_frequency == 0) {
      update();
    }
    if (steps_ % config_.target_update == 0) target_.copy_from(online_.parameters());
  }

  EpisodeStats end_episode() override {
    EpisodeStats s;
    s.exploration = epsilon();
    s.updates = updates_;
    s.loss = updates_ ? loss_sum_ / static_cast<double>(updates_) : std::numeric_limits<double>::quiet_NaN();
    updates_ = 0;
    loss_sum_ = 0.0;
    return s;
  }

  std::vector<ParameterGroup> parameter_groups() override {
    return {{"online", &online_.parameters()}, {"target", &target_}};
  }
  const nn::MegnetConfig& network_config(std::string_view) const override { return online_.config(); }

 private:
  void update() {
    const double beta = config_.per_beta_start + (config_.per_beta_end - config_.per_beta_start) * progress_;
    const ReplaySample s = buffer_.sample(config_.batch_size, rng_, beta);
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
    nn::Matrix next_target = nn::Matrix::Zero(rows, static_cast<Eigen::Index>(action_count_));
    nn::Matrix next_online = next_target;
    if (!next.empty()) {
      nn::NoGradGuard guard;
      const nn::GraphBatch nb = nn::make_batch(next);
      next_target = scatter_rows(online_.forward(nb, &target_).value(), next_row, rows);
      if (rainbow_) next_online = scatter_rows(online_.forward(nb).value(), next_row, rows);
    }
    const std::span<const bool> done_span(dones.get(), n);
    const std::vector<double> y = rainbow_ ? double_dqn_targets(rewards, next_online, next_target, done_span, config_.gamma)
                                           : dqn_targets(rewards, next_target, done_span, config_.gamma);

    const nn::Tensor q = online_.forward(nn::make_batch(obs));
    std::vector<double> td;
    const std::vector<double> no_weights;
    const nn::Tensor loss = td_loss(q, actions, y, rainbow_ ? std::span<const double>(s.weights) : no_weights, &td);
    nn::backward(loss);
    adam_.step(online_.parameters());
    if (rainbow_) buffer_.update_priorities(s.indices, td);
    loss_sum_ += loss.item();
    ++updates_;
  }

  bool rainbow_;
  nn::Megnet online_;
  nn::ParameterSet target_;
  ReplayBuffer buffer_;
  nn::Adam adam_;
  std::uniform_real_distribution<double> coin_{0.0, 1.0};
  std::size_t steps_ = 0;
  std::size_t updates_ = 0;
  double loss_sum_ = 0.0;
};

}  // namespace

std::unique_ptr<Agent> make_value_agent(const AgentConfig& c, std::size_t actions, std::uint64_t seed) {
  return std::make_unique<ValueAgent>(c, actions, seed);
}

}  // namespace crystalgym::agents::detail
