#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crystalgym/agents/losses.hpp"
#include "impl.hpp"

namespace crystalgym::agents::detail {
namespace {

// Clipped-surrogate PPO with separate policy and value networks. Updates
// after every `rollout_episodes` complete episodes.
class PpoAgent final : public Agent {
 public:
  PpoAgent(const AgentConfig& c, std::size_t actions, std::uint64_t seed)
      : Agent(c, actions, seed),
        policy_(make_network(actions), rng_()),
        value_(make_network(1), rng_()),
        adam_policy_(make_adam(policy_.parameters(), c)),
        adam_value_(make_adam(value_.parameters(), c)) {}

  std::size_t act(const GraphFeatures& obs, ActMode mode) override {
    const nn::Matrix logits = forward_nograd(policy_, obs);
    if (mode == ActMode::greedy) return row_argmax(logits, 0);
    const std::size_t a = sample_softmax(logits, 0, rng_);
    if (mode == ActMode::train) {
      pending_ = {obs, static_cast<int>(a), row_log_prob(logits, 0, a), forward_nograd(value_, obs)(0, 0), 0.0};
      entropy_sum_ += row_entropy(logits, 0);
      ++acts_;
    }
    return a;
  }

  void observe(const GraphFeatures&, std::size_t, double reward, const GraphFeatures&, bool done) override {
    pending_.reward = reward;
    current_.push_back(std::move(pending_));
    pending_ = {};
    if (done) {
      rollout_.push_back(std::move(current_));
      current_.clear();
    }
  }

  EpisodeStats end_episode() override {
    EpisodeStats s;
    s.exploration = acts_ ? entropy_sum_ / static_cast<double>(acts_) : std::numeric_limits<double>::quiet_NaN();
    s.loss = std::numeric_limits<double>::quiet_NaN();
    entropy_sum_ = 0.0;
    acts_ = 0;
    if (rollout_.size() >= config_.rollout_episodes) {
      s.loss = update();
      s.updates = updates_;
      updates_ = 0;
    }
    return s;
  }

  std::vector<ParameterGroup> parameter_groups() override {
    return {{"policy", &policy_.parameters()}, {"value", &value_.parameters()}};
  }
  const nn::MegnetConfig& network_config(std::string_view group) const override {
    return group == "value" ? value_.config() : policy_.config();
  }

 private:
  struct Step {
    GraphFeatures observation;
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
    double reward = 0.0;
  };

  double update() {
    std::vector<const Step*> steps;
    std::vector<double> advantages, returns;
    for (const auto& episode : rollout_) {
      std::vector<double> r, v;
      for (const Step& s : episode) {
        r.push_back(s.reward);
        v.push_back(s.value);
        steps.push_back(&s);
      }
      const std::vector<double> adv = gae(r, v, 0.0, config_.gamma, config_.gae_lambda);
      for (std::size_t k = 0; k < adv.size(); ++k) {
        advantages.push_back(adv[k]);
        returns.push_back(adv[k] + v[k]);
      }
    }
    advantages = normalize(advantages);

    std::vector<std::size_t> order(steps.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t mb = (steps.size() + config_.minibatches - 1) / config_.minibatches;
    double loss_sum = 0.0;
    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng_);
      for (std::size_t begin = 0; begin < order.size(); begin += mb) {
        const std::size_t end = std::min(order.size(), begin + mb);
        std::vector<const GraphFeatures*> obs;
        std::vector<int> actions;
        std::vector<double> old_lp, adv, ret;
        for (std::size_t k = begin; k < end; ++k) {
          const Step& s = *steps[order[k]];
          obs.push_back(&s.observation);
          actions.push_back(s.action);
          old_lp.push_back(s.log_prob);
          adv.push_back(advantages[order[k]]);
          ret.push_back(returns[order[k]]);
        }
        const nn::GraphBatch b = nn::make_batch(obs);
        const PpoLoss l = ppo_loss(policy_.forward(b), value_.forward(b), actions, old_lp, adv, ret, config_.clip,
                                   config_.value_coef, config_.entropy_coef);
        nn::backward(l.total);
        adam_policy_.step(policy_.parameters());
        adam_value_.step(value_.parameters());
        loss_sum += l.total.item();
        ++updates_;
      }
    }
    rollout_.clear();
    return updates_ ? loss_sum / static_cast<double>(updates_) : std::numeric_limits<double>::quiet_NaN();
  }

  nn::Megnet policy_;
  nn::Megnet value_;
  nn::Adam adam_policy_;
  nn::Adam adam_value_;
  Step pending_;
  std::vector<Step> current_;
  std::vector<std::vector<Step>> rollout_;
  double entropy_sum_ = 0.0;
  std::size_t acts_ = 0;
  std::size_t updates_ = 0;
};

}  // namespace

std::unique_ptr<Agent> make_ppo_agent(const AgentConfig& c, std::size_t actions, std::uint64_t seed) {
  return std::make_unique<PpoAgent>(c, actions, seed);
}

}  // namespace crystalgym::agents::detail
