#include <cmath>
#include <limits>
#include <memory>

#include "crystalgym/agents/losses.hpp"
#include "crystalgym/agents/serialize.hpp"
#include "crystalgym/core/errors.hpp"
#include "impl.hpp"

namespace crystalgym::agents::detail {
namespace {

// Episode-level REINFORCE with the terminal reward as advantage and KL and
// entropy regularisers against a frozen reference policy.
class ReinforceAgent final : public Agent {
 public:
  ReinforceAgent(const AgentConfig& c, std::size_t actions, std::uint64_t seed)
      : Agent(c, actions, seed),
        policy_(make_network(actions), rng_()),
        reference_(policy_.parameters().clone()),
        adam_(make_adam(policy_.parameters(), c)) {
    if (!c.reference_checkpoint.empty()) {
      const nlohmann::json ckpt = read_checkpoint(c.reference_checkpoint);
      const auto& groups = ckpt.at("groups");
      if (!groups.contains("policy")) throw CheckpointMismatchError("reference checkpoint has no policy group");
      load_parameters(groups.at("policy"), reference_);
    }
  }

  std::size_t act(const GraphFeatures& obs, ActMode mode) override {
    const nn::Matrix logits = forward_nograd(policy_, obs);
    if (mode == ActMode::greedy) return row_argmax(logits, 0);
    if (mode == ActMode::train) {
      entropy_sum_ += row_entropy(logits, 0);
      ++acts_;
    }
    return sample_softmax(logits, 0, rng_);
  }

  void observe(const GraphFeatures& obs, std::size_t action, double reward, const GraphFeatures&, bool done) override {
    observations_.push_back(obs);
    actions_.push_back(static_cast<int>(action));
    if (done) terminal_reward_ = reward;
  }

  EpisodeStats end_episode() override {
    EpisodeStats s;
    s.exploration = acts_ ? entropy_sum_ / static_cast<double>(acts_) : std::numeric_limits<double>::quiet_NaN();
    s.loss = std::numeric_limits<double>::quiet_NaN();
    entropy_sum_ = 0.0;
    acts_ = 0;
    if (!observations_.empty()) {
      std::vector<const GraphFeatures*> obs;
      for (const auto& o : observations_) obs.push_back(&o);
      const nn::GraphBatch b = nn::make_batch(obs);
      nn::Matrix ref;
      {
        nn::NoGradGuard guard;
        ref = policy_.forward(b, &reference_).value();
      }
      const ReinforceLoss l = reinforce_loss(policy_.forward(b), ref, actions_, terminal_reward_, config_.kl_coef,
                                             config_.reinforce_entropy_coef);
      nn::backward(l.total);
      adam_.step(policy_.parameters());
      s.loss = l.total.item();
      s.updates = 1;
    }
    observations_.clear();
    actions_.clear();
    terminal_reward_ = 0.0;
    return s;
  }

  std::vector<ParameterGroup> parameter_groups() override {
    return {{"policy", &policy_.parameters()}, {"reference", &reference_}};
  }
  const nn::MegnetConfig& network_config(std::string_view) const override { return policy_.config(); }

 private:
  nn::Megnet policy_;
  nn::ParameterSet reference_;
  nn::Adam adam_;
  std::vector<GraphFeatures> observations_;
  std::vector<int> actions_;
  double terminal_reward_ = 0.0;
  double entropy_sum_ = 0.0;
  std::size_t acts_ = 0;
};

}  // namespace

std::unique_ptr<Agent> make_reinforce_agent(const AgentConfig& c, std::size_t actions, std::uint64_t seed) {
  return std::make_unique<ReinforceAgent>(c, actions, seed);
}

}  // namespace crystalgym::agents::detail
