#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "crystalgym/agents/agent.hpp"
#include "crystalgym/agents/losses.hpp"
#include "crystalgym/agents/replay.hpp"
#include "crystalgym/agents/serialize.hpp"
#include "crystalgym/agents/train.hpp"
#include "crystalgym/calc/density.hpp"
#include "crystalgym/core/errors.hpp"
#include "support.hpp"

using namespace crystalgym;
using namespace crystalgym::agents;
using namespace crystalgym::test;
using nn::constant;
using nn::parameter;

namespace {

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("crystalgym_agents_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

AgentConfig tiny_agent(Algorithm a) {
  AgentConfig c = default_agent_config(a);
  c.network = {1, 4, 6, 6};
  c.batch_size = 4;
  c.learning_starts = 4;
  c.target_update = 10;
  c.rollout_episodes = 2;
  c.epsilon_decay_episodes = 5;
  return c;
}

EpisodeConfig small_env(std::uint64_t seed = 3) {
  EpisodeConfig c;
  c.property = Property::density;
  c.target = 3.0;
  c.pool = make_pool({"C3"});
  c.seed = seed;
  c.features.graph.cutoff = 3.0;
  return c;
}

std::vector<Tensor> tensors_of(const nn::ParameterSet& p) {
  std::vector<Tensor> out;
  for (const auto& e : p) out.push_back(e.tensor);
  return out;
}

struct MiniBatch {
  std::vector<GraphFeatures> obs;
  nn::GraphBatch batch;
};

MiniBatch mini_batch() {
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  MiniBatch m;
  m.obs = {sample_observation(2, 2, space), sample_observation(5, 5, space), sample_observation(7, 7, space)};
  std::vector<const GraphFeatures*> ptr;
  for (const auto& o : m.obs) ptr.push_back(&o);
  m.batch = nn::make_batch(ptr);
  return m;
}

}  // namespace

// --- targets ----------------------------------------------------------------

TEST(DqnTarget, TerminalCutsBootstrap) {
  const double r[] = {1.0};
  const bool done[] = {true};
  EXPECT_EQ(dqn_targets(r, row({50.0, 7.0}), done, 0.9)[0], 1.0);
}

TEST(DqnTarget, Arithmetic) {
  const double r[] = {1.0};
  const bool done[] = {false};
  EXPECT_DOUBLE_EQ(dqn_targets(r, row({0.5, 2.0, -1.0}), done, 0.9)[0], 2.8);
}

TEST(DqnTarget, ZeroDiscountGivesReward) {
  std::mt19937_64 rng(5);
  const Matrix next = random_matrix(6, 4, rng, -3, 3);
  const double r[] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const bool done[] = {false, true, false, false, true, false};
  const auto y = dqn_targets(r, next, done, 0.0);
  const auto yd = double_dqn_targets(r, next, next, done, 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(y[i], r[i]);
    EXPECT_EQ(yd[i], r[i]);
  }
}

TEST(DqnTarget, DoubleReducesToVanillaWhenNetworksCoincide) {
  std::mt19937_64 rng(6);
  const Matrix next = random_matrix(20, 18, rng, -2, 2);
  std::vector<double> r(20);
  auto done = std::make_unique<bool[]>(20);
  for (std::size_t i = 0; i < 20; ++i) {
    r[i] = std::uniform_real_distribution<double>(0, 1)(rng);
    done[i] = i % 3 == 0;
  }
  const std::span<const bool> d(done.get(), 20);
  EXPECT_EQ(dqn_targets(r, next, d, 0.97), double_dqn_targets(r, next, next, d, 0.97));
}

TEST(DqnTarget, DoubleUsesOnlineArgmax) {
  const double r[] = {0.0};
  const bool done[] = {false};
  // online prefers action 0, target would prefer action 1
  EXPECT_DOUBLE_EQ(double_dqn_targets(r, row({5.0, 1.0}), row({2.0, 9.0}), done, 1.0)[0], 2.0);
}

TEST(DqnTarget, DuelingNetworkMatchesVanillaWithIdenticalCopies) {
  const MiniBatch m = mini_batch();
  nn::Megnet net(tiny_config(19, 18, true), 3);
  const Matrix q = net.forward(m.batch).value();
  const double r[] = {0.2, 0.5, 0.9};
  const bool done[] = {false, false, true};
  EXPECT_EQ(dqn_targets(r, q, done, 1.0), double_dqn_targets(r, q, q, done, 1.0));
}

TEST(TdLoss, ValueAndErrors) {
  auto q = parameter(Matrix{{1.0, 2.0}, {3.0, 4.0}});
  const int a[] = {1, 0};
  const double y[] = {2.5, 1.0};
  const double w[] = {1.0, 0.5};
  std::vector<double> td;
  const Tensor l = td_loss(q, a, y, w, &td);
  EXPECT_DOUBLE_EQ(l.item(), (0.25 + 0.5 * 4.0) / 2.0);
  EXPECT_EQ(td, (std::vector<double>{0.5, -2.0}));
  nn::backward(l);
  const Matrix expect{{0.0, -0.5}, {1.0, 0.0}};
  EXPECT_TRUE(q.grad().isApprox(expect));
}

// --- replay -----------------------------------------------------------------

TEST(Replay, SumTreeFind) {
  SumTree t(5);
  const double p[] = {1.0, 0.0, 2.0, 3.0, 4.0};
  for (std::size_t i = 0; i < 5; ++i) t.set(i, p[i]);
  EXPECT_DOUBLE_EQ(t.total(), 10.0);
  EXPECT_EQ(t.find(0.0), 0u);
  EXPECT_EQ(t.find(0.999), 0u);
  EXPECT_EQ(t.find(1.0), 2u);
  EXPECT_EQ(t.find(2.999), 2u);
  EXPECT_EQ(t.find(3.0), 3u);
  EXPECT_EQ(t.find(9.999), 4u);
  t.set(4, 0.0);
  EXPECT_DOUBLE_EQ(t.total(), 6.0);
}

TEST(Replay, PrioritiesNormalise) {
  ReplayBuffer b(4, true, 1.0);
  b.add({});
  b.add({});
  b.set_priority(0, 1.0);
  b.set_priority(1, 3.0);
  EXPECT_DOUBLE_EQ(b.probability(0), 0.25);
  EXPECT_DOUBLE_EQ(b.probability(1), 0.75);
}

TEST(Replay, UniformPrioritiesGiveUnitWeights) {
  ReplayBuffer b(16, true, 0.6);
  for (int i = 0; i < 10; ++i) b.add({});
  std::mt19937_64 rng(4);
  const auto s = b.sample(64, rng, 0.4);
  for (double w : s.weights) EXPECT_DOUBLE_EQ(w, 1.0);
  ReplayBuffer u(16, false);
  for (int i = 0; i < 10; ++i) u.add({});
  for (double w : u.sample(64, rng).weights) EXPECT_EQ(w, 1.0);
}

TEST(Replay, ImportanceWeightsClosedForm) {
  const double p[] = {0.25, 0.75};
  const auto w = importance_weights(p, 2, 0.5);
  // (2 * 0.25)^-0.5 = sqrt(2) is the max; (2 * 0.75)^-0.5 / sqrt(2) = 1/sqrt(3)
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_NEAR(w[1], 1.0 / std::sqrt(3.0), 1e-15);
}

TEST(Replay, SamplingFrequenciesMatchPriorities) {
  const double alpha = 0.6;
  ReplayBuffer b(8, true, alpha);
  const double raw[] = {0.5, 1.0, 2.0, 4.0, 0.1, 3.0, 1.5, 0.7};
  double z = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    b.add({});
    b.set_priority(i, raw[i]);
    z += std::pow(raw[i], alpha);
  }
  std::mt19937_64 rng(77);
  std::vector<double> count(8, 0.0);
  const std::size_t draws = 100000;
  for (std::size_t k = 0; k < draws / 100; ++k) {
    for (std::size_t i : b.sample(100, rng, 1.0).indices) count[i] += 1.0;
  }
  for (std::size_t i = 0; i < 8; ++i) {
    const double expected = std::pow(raw[i], alpha) / z;
    EXPECT_NEAR(b.probability(i), expected, 1e-12);
    EXPECT_NEAR(count[i] / draws, expected, 0.01) << "item " << i;
  }
}

TEST(Replay, NewTransitionsGetMaxPriority) {
  ReplayBuffer b(8, true, 1.0);
  b.add({});
  const std::size_t idx[] = {0};
  const double td[] = {5.0};
  b.update_priorities(idx, td);
  b.add({});
  EXPECT_NEAR(b.probability(1), 0.5, 1e-6);
}

TEST(Replay, RingOverwritesOldest) {
  ReplayBuffer b(3);
  for (int i = 0; i < 5; ++i) {
    Transition t;
    t.reward = i;
    b.add(t);
  }
  EXPECT_EQ(b.size(), 3u);
  std::multiset<double> rewards{b[0].reward, b[1].reward, b[2].reward};
  EXPECT_EQ(rewards, (std::multiset<double>{2.0, 3.0, 4.0}));
}

TEST(Replay, EmptyBufferThrows) {
  ReplayBuffer b(3);
  std::mt19937_64 rng(1);
  EXPECT_THROW(b.sample(2, rng), IndexError);
}

// --- epsilon-greedy ---------------------------------------------------------

TEST(EpsilonGreedy, ZeroIsArgmax) {
  std::mt19937_64 rng(1);
  const double q[] = {0.1, 0.7, 0.3};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(epsilon_greedy(q, 0.0, rng), 1u);
}

TEST(EpsilonGreedy, TiesGoToLowestIndex) {
  std::mt19937_64 rng(1);
  const double q[] = {1.0, 1.0, 0.0};
  EXPECT_EQ(epsilon_greedy(q, 0.0, rng), 0u);
}

TEST(EpsilonGreedy, OneIsUniform) {
  std::mt19937_64 rng(9);
  std::vector<double> q(18, 0.0);
  q[4] = 10.0;
  std::vector<double> count(18, 0.0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) count[epsilon_greedy(q, 1.0, rng)] += 1.0;
  double chi2 = 0.0;
  const double e = draws / 18.0;
  for (double c : count) chi2 += (c - e) * (c - e) / e;
  EXPECT_LT(chi2, 33.41);  // chi-square 0.99 quantile, 17 dof
}

TEST(EpsilonGreedy, ArgmaxInvariantUnderShift) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> q(18);
    for (auto& v : q) v = std::round(u(rng) * 4) / 4;  // frequent ties
    const double c = std::round(u(rng) * 4) / 4;
    std::vector<double> shifted = q;
    for (auto& v : shifted) v += c;
    EXPECT_EQ(epsilon_greedy(q, 0.0, rng), epsilon_greedy(shifted, 0.0, rng));
  }
}

TEST(EpsilonGreedy, RejectsBadEpsilon) {
  std::mt19937_64 rng(1);
  const double q[] = {1.0};
  EXPECT_THROW(epsilon_greedy(q, 1.5, rng), DomainError);
  EXPECT_THROW(epsilon_greedy(q, -0.1, rng), DomainError);
}

TEST(Schedule, Linear) {
  EXPECT_DOUBLE_EQ(linear_schedule(1.0, 0.05, 2000, 0), 1.0);
  EXPECT_DOUBLE_EQ(linear_schedule(1.0, 0.05, 2000, 1000), 0.525);
  EXPECT_DOUBLE_EQ(linear_schedule(1.0, 0.05, 2000, 2000), 0.05);
  EXPECT_DOUBLE_EQ(linear_schedule(1.0, 0.05, 2000, 9000), 0.05);
}

// --- PPO --------------------------------------------------------------------

TEST(Ppo, UnitRatioGivesMinusMeanAdvantage) {
  std::mt19937_64 rng(2);
  const Matrix logits = random_matrix(4, 3, rng);
  const int a[] = {0, 2, 1, 1};
  const auto logp = nn::log_softmax(constant(logits)).value();
  std::vector<double> old(4);
  for (int i = 0; i < 4; ++i) old[i] = logp(i, a[i]);
  const double adv[] = {0.5, -1.0, 2.0, 0.1};
  const double ret[] = {0, 0, 0, 0};
  const auto l = ppo_loss(constant(logits), constant(Matrix::Zero(4, 1)), a, old, adv, ret, 0.2, 0.5, 0.0);
  EXPECT_NEAR(l.policy.item(), -(0.5 - 1.0 + 2.0 + 0.1) / 4.0, 1e-15);
  const auto normalized = normalize(adv);
  const auto ln = ppo_loss(constant(logits), constant(Matrix::Zero(4, 1)), a, old, normalized, ret, 0.2, 0.5, 0.0);
  EXPECT_NEAR(ln.policy.item(), 0.0, 1e-15);
}

TEST(Ppo, ClippedSurrogate) {
  const Matrix logits = row({0.3, -0.2});
  const int a[] = {0};
  const double old[] = {nn::log_softmax(constant(logits)).value()(0, 0) - std::log(1.5)};
  const double adv[] = {1.0};
  const double ret[] = {0.0};
  const auto l = ppo_loss(constant(logits), constant(Matrix::Zero(1, 1)), a, old, adv, ret, 0.2, 0.0, 0.0);
  EXPECT_NEAR(l.policy.item(), -1.2, 1e-12);
}

TEST(Ppo, BindingClipIsFlat) {
  // Item 0: rho = 1.5 with A > 0, item 1: rho = 0.5 with A < 0. Clipping binds
  // on both, so the policy term has no gradient.
  auto logits = parameter(Matrix{{0.3, -0.2, 0.1}, {0.0, 0.4, -0.3}});
  const int a[] = {0, 2};
  const auto logp = nn::log_softmax(constant(logits.value())).value();
  const double old[] = {logp(0, 0) - std::log(1.5), logp(1, 2) - std::log(0.5)};
  const double adv[] = {1.0, -2.0};
  const double ret[] = {0.0, 0.0};
  const auto l = ppo_loss(logits, constant(Matrix::Zero(2, 1)), a, old, adv, ret, 0.2, 0.0, 0.0);
  nn::backward(l.policy);
  EXPECT_TRUE(logits.grad().isZero(0.0));

  // Inside the trust region the gradient is non-zero.
  logits.zero_grad();
  const double near[] = {logp(0, 0) - std::log(1.1), logp(1, 2) - std::log(0.9)};
  nn::backward(ppo_loss(logits, constant(Matrix::Zero(2, 1)), a, near, adv, ret, 0.2, 0.0, 0.0).policy);
  EXPECT_GT(logits.grad().norm(), 1e-3);
}

TEST(Ppo, SingleStepGae) {
  const double r[] = {0.7};
  const double v[] = {0.2};
  for (double lambda : {0.0, 0.5, 0.95, 1.0}) {
    EXPECT_DOUBLE_EQ(gae(r, v, 0.4, 0.9, lambda)[0], 0.7 + 0.9 * 0.4 - 0.2);
  }
}

TEST(Ppo, GaeRecursion) {
  const double r[] = {0.0, 0.0, 1.0};
  const double v[] = {0.1, 0.3, 0.6};
  const auto a = gae(r, v, 0.0, 1.0, 0.5);
  const double d2 = 1.0 - 0.6, d1 = 0.6 - 0.3, d0 = 0.3 - 0.1;
  EXPECT_DOUBLE_EQ(a[2], d2);
  EXPECT_DOUBLE_EQ(a[1], d1 + 0.5 * d2);
  EXPECT_DOUBLE_EQ(a[0], d0 + 0.5 * (d1 + 0.5 * d2));
  // lambda = 1, gamma = 1: advantage = return - value
  const auto mc = gae(r, v, 0.0, 1.0, 1.0);
  EXPECT_NEAR(mc[0], 1.0 - 0.1, 1e-15);
}

TEST(Ppo, NormalizeGuardsZeroSpread) {
  const double x[] = {2.0, 2.0, 2.0};
  for (double v : normalize(x)) EXPECT_EQ(v, 0.0);
  const double y[] = {1.0, 3.0};
  const auto n = normalize(y);
  EXPECT_DOUBLE_EQ(n[0], -1.0);
  EXPECT_DOUBLE_EQ(n[1], 1.0);
}

// --- SAC --------------------------------------------------------------------

TEST(Sac, UniformEntropy) {
  EXPECT_NEAR(entropies(Matrix::Zero(1, 18))[0], std::log(18.0), 1e-14);
  EXPECT_NEAR(std::log(18.0), 2.890, 5e-4);
}

TEST(Sac, TerminalTargetIsReward) {
  std::mt19937_64 rng(3);
  const double r[] = {0.4};
  const bool done[] = {true};
  EXPECT_EQ(sac_targets(r, random_matrix(1, 5, rng), random_matrix(1, 5, rng), random_matrix(1, 5, rng), done, 1.0,
                        0.3)[0],
            0.4);
}

TEST(Sac, SoftTargetClosedForm) {
  const double r[] = {0.5};
  const bool done[] = {false};
  const Matrix logits = row({0.0, std::log(3.0)});  // pi = [0.25, 0.75]
  const Matrix q1 = row({1.0, 4.0}), q2 = row({2.0, 3.0});
  const double alpha = 0.1;
  const double soft = 0.25 * (1.0 - alpha * std::log(0.25)) + 0.75 * (3.0 - alpha * std::log(0.75));
  EXPECT_NEAR(sac_targets(r, logits, q1, q2, done, 0.9, alpha)[0], 0.5 + 0.9 * soft, 1e-14);
}

TEST(Sac, ZeroTemperaturePolicyLoss) {
  std::mt19937_64 rng(8);
  const Matrix logits = random_matrix(3, 4, rng), q1 = random_matrix(3, 4, rng), q2 = random_matrix(3, 4, rng);
  const int a[] = {0, 1, 2};
  const double y[] = {0, 0, 0};
  auto log_alpha = parameter(Matrix::Constant(1, 1, -1e9));  // alpha = 0
  const auto l = sac_losses(constant(q1), constant(q2), constant(logits), a, y, log_alpha, 1.0);
  const Matrix pi = nn::softmax(constant(logits)).value();
  const double expected = -(pi.cwiseProduct(Matrix(q1.cwiseMin(q2)))).rowwise().sum().mean();
  EXPECT_NEAR(l.policy.item(), expected, 1e-14);
}

TEST(Sac, AlphaLossSign) {
  auto log_alpha = parameter(Matrix::Zero(1, 1));
  const int a[] = {0};
  const double y[] = {0};
  // uniform policy over 4 actions has entropy log 4 > target, so alpha should fall
  const auto l = sac_losses(constant(Matrix::Zero(1, 4)), constant(Matrix::Zero(1, 4)), constant(Matrix::Zero(1, 4)),
                            a, y, log_alpha, 0.5);
  nn::backward(l.alpha);
  EXPECT_NEAR(log_alpha.grad()(0, 0), std::log(4.0) - 0.5, 1e-14);
  EXPECT_NEAR(l.mean_entropy, std::log(4.0), 1e-14);
}

// --- REINFORCE --------------------------------------------------------------

TEST(Reinforce, SamePolicyHasZeroKl) {
  std::mt19937_64 rng(4);
  const Matrix logits = random_matrix(5, 6, rng);
  const int a[] = {0, 1, 2, 3, 4};
  const auto l = reinforce_loss(constant(logits), logits, a, 0.7, 0.05, 0.01);
  EXPECT_NEAR(l.kl, 0.0, 1e-15);
}

TEST(Reinforce, ZeroAdvantageLeavesOnlyRegularisers) {
  std::mt19937_64 rng(5);
  const Matrix logits = random_matrix(3, 4, rng), ref = random_matrix(3, 4, rng);
  const int a[] = {1, 3, 0};
  const auto l = reinforce_loss(constant(logits), ref, a, 0.0, 0.05, 0.01);
  EXPECT_NEAR(l.total.item(), 0.05 * l.kl - 0.01 * l.entropy, 1e-15);
  // With no regularisers the gradient vanishes.
  auto p = parameter(logits);
  nn::backward(reinforce_loss(p, ref, a, 0.0, 0.0, 0.0).total);
  EXPECT_TRUE(p.grad().isZero(0.0));
}

TEST(Reinforce, DeterministicPolicyHasZeroEntropy) {
  Matrix logits = Matrix::Constant(2, 5, -800.0);
  logits(0, 2) = 0.0;
  logits(1, 4) = 0.0;
  const int a[] = {2, 4};
  const auto l = reinforce_loss(constant(logits), logits, a, 1.0, 0.05, 0.01);
  EXPECT_NEAR(l.entropy, 0.0, 1e-300);
  EXPECT_NEAR(l.total.item(), 0.0, 1e-12);  // log pi(a) = 0 for the chosen actions
}

TEST(Reinforce, ClosedFormValue) {
  const Matrix logits = row({0.0, std::log(3.0)});  // pi = [0.25, 0.75]
  const Matrix ref = row({0.0, 0.0});               // uniform
  const int a[] = {1};
  const auto l = reinforce_loss(constant(logits), ref, a, 0.8, 0.05, 0.01);
  const double kl = 0.25 * std::log(0.25 / 0.5) + 0.75 * std::log(0.75 / 0.5);
  const double h = -(0.25 * std::log(0.25) + 0.75 * std::log(0.75));
  EXPECT_NEAR(l.kl, kl, 1e-15);
  EXPECT_NEAR(l.entropy, h, 1e-15);
  EXPECT_NEAR(l.total.item(), -0.8 * std::log(0.75) + 0.05 * kl - 0.01 * h, 1e-15);
}

// --- finite-difference checks through the network ------------------------------

TEST(Gradients, TdLossThroughMegnet) {
  const MiniBatch m = mini_batch();
  for (bool dueling : {false, true}) {
    nn::Megnet net(tiny_config(19, 18, dueling), 31);
    std::vector<Tensor> params = tensors_of(net.parameters());
    const int a[] = {3, 0, 17};
    const double y[] = {0.4, -0.2, 1.1};
    const double w[] = {1.0, 0.3, 0.7};
    const auto loss = [&] { return td_loss(net.forward(m.batch), a, y, w); };
    EXPECT_LT(gradient_check(params, loss, 10), 1e-4);
  }
}

TEST(Gradients, PpoLossThroughMegnet) {
  const MiniBatch m = mini_batch();
  nn::Megnet policy(tiny_config(19, 18, false), 41), value(tiny_config(19, 1, false), 42);
  const int a[] = {1, 5, 9};
  const Matrix logp = nn::log_softmax(policy.forward(m.batch)).value();
  // one ratio inside the clip range, one clipped above, one clipped below
  const double old[] = {logp(0, 1) - 0.05, logp(1, 5) - 0.6, logp(2, 9) + 0.6};
  const double adv[] = {0.8, 1.3, 0.4};
  const double ret[] = {0.5, 0.9, -0.1};
  std::vector<Tensor> params = tensors_of(policy.parameters());
  for (const auto& t : tensors_of(value.parameters())) params.push_back(t);
  const auto loss = [&] {
    return ppo_loss(policy.forward(m.batch), value.forward(m.batch), a, old, adv, ret, 0.2, 0.5, 0.01).total;
  };
  EXPECT_LT(gradient_check(params, loss, 10), 1e-4);
}

TEST(Gradients, SacLossesThroughMegnet) {
  const MiniBatch m = mini_batch();
  nn::Megnet policy(tiny_config(19, 18, false), 51), q1(tiny_config(19, 18, false), 52),
      q2(tiny_config(19, 18, false), 53);
  const int a[] = {2, 4, 6};
  const double y[] = {0.3, 0.6, 0.9};
  auto log_alpha = parameter(Matrix::Constant(1, 1, std::log(0.2)));

  std::vector<Tensor> pq = tensors_of(q1.parameters());
  EXPECT_LT(gradient_check(pq, [&] {
              return sac_losses(q1.forward(m.batch), q2.forward(m.batch), policy.forward(m.batch), a, y, log_alpha, 2.0).q1;
            }, 10), 1e-4);
  std::vector<Tensor> pp = tensors_of(policy.parameters());
  EXPECT_LT(gradient_check(pp, [&] {
              return sac_losses(q1.forward(m.batch), q2.forward(m.batch), policy.forward(m.batch), a, y, log_alpha, 2.0)
                  .policy;
            }, 10), 1e-4);
  std::vector<Tensor> pa{log_alpha};
  EXPECT_LT(gradient_check(pa, [&] {
              return sac_losses(q1.forward(m.batch), q2.forward(m.batch), policy.forward(m.batch), a, y, log_alpha, 2.0)
                  .alpha;
            }), 1e-4);
}

TEST(Gradients, ReinforceLossThroughMegnet) {
  const MiniBatch m = mini_batch();
  nn::Megnet policy(tiny_config(19, 18, false), 61), reference(tiny_config(19, 18, false), 62);
  const Matrix ref = reference.forward(m.batch).value();
  const int a[] = {0, 8, 16};
  std::vector<Tensor> params = tensors_of(policy.parameters());
  const auto loss = [&] { return reinforce_loss(policy.forward(m.batch), ref, a, 0.6, 0.05, 0.01).total; };
  EXPECT_LT(gradient_check(params, loss, 10), 1e-4);
}

// --- config and checkpoints ---------------------------------------------------

TEST(AgentConfigTest, Validation) {
  AgentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 1.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AgentConfig{};
  c.clip = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AgentConfig{};
  c.kl_coef = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AgentConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_algorithm("a2c"), ConfigError);
}

TEST(AgentConfigTest, Defaults) {
  const AgentConfig d = default_agent_config(Algorithm::dqn);
  EXPECT_EQ(d.gamma, 1.0);
  EXPECT_EQ(d.learning_rate, 1e-3);
  EXPECT_EQ(d.buffer_capacity, 10000u);
  EXPECT_EQ(d.batch_size, 32u);
  EXPECT_EQ(d.target_update, 200u);
  EXPECT_EQ(d.epsilon_start, 1.0);
  EXPECT_EQ(d.epsilon_end, 0.05);
  EXPECT_EQ(d.epsilon_decay_episodes, 2000u);
  EXPECT_EQ(d.per_alpha, 0.6);
  EXPECT_EQ(d.per_beta_start, 0.4);
  EXPECT_EQ(d.per_beta_end, 1.0);
  const AgentConfig p = default_agent_config(Algorithm::ppo);
  EXPECT_EQ(p.learning_rate, 3e-4);
  EXPECT_EQ(p.clip, 0.2);
  EXPECT_EQ(p.gae_lambda, 0.95);
  EXPECT_EQ(p.epochs, 4u);
  EXPECT_EQ(p.entropy_coef, 0.01);
  const AgentConfig s = default_agent_config(Algorithm::sac);
  EXPECT_EQ(s.tau, 0.005);
  EXPECT_TRUE(s.auto_alpha);
  const AgentConfig r = default_agent_config(Algorithm::reinforce);
  EXPECT_EQ(r.kl_coef, 0.05);
  EXPECT_EQ(r.reinforce_entropy_coef, 0.01);
}

TEST(AgentConfigTest, JsonRoundTrip) {
  AgentConfig c = default_agent_config(Algorithm::rainbow);
  c.learning_rate = 0.1 + 0.2;  // not representable in a short decimal
  c.network.width = 7;
  c.twin_q = false;
  c.reference_checkpoint = "x.json";
  EXPECT_EQ(agent_config_from_json(to_json(c)), c);
  EXPECT_THROW(agent_config_from_json(nlohmann::json{{"algorithm", "dqn"}, {"gama", 0.9}}), ConfigError);
  EXPECT_THROW(agent_config_from_json(nlohmann::json{{"network", {{"depth", 2}}}}), ConfigError);
  EXPECT_THROW(agent_config_from_json(nlohmann::json{{"batch_size", -1}}), ConfigError);
  EXPECT_THROW(agent_config_from_json(nlohmann::json{{"gamma", 2.0}}), ConfigError);
  const auto partial = agent_config_from_json(nlohmann::json{{"algorithm", "ppo"}, {"epochs", 2}});
  EXPECT_EQ(partial.epochs, 2u);
  EXPECT_EQ(partial.learning_rate, 3e-4);
}

TEST(Checkpoint, RoundTripAndMismatch) {
  const auto dir = temp_dir("ckpt");
  for (Algorithm alg : {Algorithm::dqn, Algorithm::rainbow, Algorithm::ppo, Algorithm::sac, Algorithm::reinforce}) {
    const AgentConfig c = tiny_agent(alg);
    auto a = make_agent(c, 18, 1);
    const auto path = dir / (std::string(to_string(alg)) + ".json");
    save_checkpoint(path, *a, {{"note", "x"}});
    const auto ckpt = read_checkpoint(path);
    EXPECT_EQ(ckpt["meta"]["note"], "x");

    auto b = make_agent(c, 18, 2);
    restore_checkpoint(ckpt, *b);
    auto ga = a->parameter_groups(), gb = b->parameter_groups();
    ASSERT_EQ(ga.size(), gb.size());
    for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_EQ(ga[i].params->flatten(), gb[i].params->flatten());

    auto rebuilt = agent_from_checkpoint(ckpt);
    EXPECT_EQ(rebuilt->parameter_groups()[0].params->flatten(), ga[0].params->flatten());

    AgentConfig other = c;
    other.network.width = 5;
    auto wrong = make_agent(other, 18, 1);
    EXPECT_THROW(restore_checkpoint(ckpt, *wrong), CheckpointMismatchError);
    auto fewer = make_agent(c, 30, 1);
    EXPECT_THROW(restore_checkpoint(ckpt, *fewer), CheckpointMismatchError);
    AgentConfig lr = c;
    lr.learning_rate *= 2;
    auto lr_agent = make_agent(lr, 18, 1);
    EXPECT_THROW(restore_checkpoint(ckpt, *lr_agent), CheckpointMismatchError);
  }
  std::ofstream(dir / "bad.json") << "{\"format\": \"other\"}";
  EXPECT_THROW(read_checkpoint(dir / "bad.json"), ParseError);
  EXPECT_THROW(read_checkpoint(dir / "missing.json"), IoError);
}

TEST(Checkpoint, ReinforceReferenceFromFile) {
  const auto dir = temp_dir("reference");
  AgentConfig c = tiny_agent(Algorithm::reinforce);
  auto base = make_agent(c, 18, 11);
  save_checkpoint(dir / "ref.json", *base);
  c.reference_checkpoint = (dir / "ref.json").string();
  auto a = make_agent(c, 18, 12);
  const auto groups = a->parameter_groups();
  EXPECT_EQ(groups[1].params->flatten(), base->parameter_groups()[0].params->flatten());
  EXPECT_NE(groups[0].params->flatten(), groups[1].params->flatten());
}

// --- training loop ----------------------------------------------------------

TEST(Train, ZeroBudget) {
  CrystalEnv env(small_env(), std::make_shared<DensityCalculator>());
  auto a = make_agent(tiny_agent(Algorithm::dqn), env.action_count(), 5);
  const auto before = a->parameter_groups()[0].params->flatten();
  std::ostringstream log;
  TrainOptions o;
  o.log = &log;
  EXPECT_TRUE(train(*a, env, o).empty());
  EXPECT_EQ(log.str(), std::string(train_log_header()) + "\n");
  EXPECT_EQ(a->parameter_groups()[0].params->flatten(), before);
  EXPECT_EQ(env.episode_index(), 0u);
}

TEST(Train, EveryAlgorithmIsReproducible) {
  for (Algorithm alg : {Algorithm::dqn, Algorithm::rainbow, Algorithm::ppo, Algorithm::sac, Algorithm::reinforce}) {
    std::string logs[2];
    std::vector<double> params[2];
    for (int run = 0; run < 2; ++run) {
      CrystalEnv env(small_env(), std::make_shared<DensityCalculator>());
      auto a = make_agent(tiny_agent(alg), env.action_count(), 9);
      std::ostringstream out;
      TrainOptions o;
      o.budget = 6;
      o.log = &out;
      const auto records = train(*a, env, o);
      ASSERT_EQ(records.size(), 6u);
      std::size_t updates = 0;
      for (const auto& r : records) {
        EXPECT_GT(r.reward, 0.0);
        EXPECT_LE(r.reward, 1.0);
        EXPECT_FALSE(r.failed);
        updates += r.updates;
      }
      EXPECT_GT(updates, 0u) << to_string(alg);
      logs[run] = out.str();
      params[run] = a->parameter_groups()[0].params->flatten();
    }
    EXPECT_EQ(logs[0], logs[1]) << to_string(alg);
    EXPECT_EQ(params[0], params[1]) << to_string(alg);
  }
}

TEST(Train, UpdatesChangeParameters) {
  CrystalEnv env(small_env(), std::make_shared<DensityCalculator>());
  auto a = make_agent(tiny_agent(Algorithm::dqn), env.action_count(), 5);
  const auto before = a->parameter_groups()[0].params->flatten();
  TrainOptions o;
  o.budget = 3;
  train(*a, env, o);
  EXPECT_NE(a->parameter_groups()[0].params->flatten(), before);
}

TEST(Train, StopCallbackEndsEarly) {
  CrystalEnv env(small_env(), std::make_shared<DensityCalculator>());
  auto a = make_agent(tiny_agent(Algorithm::dqn), env.action_count(), 5);
  TrainOptions o;
  o.budget = 50;
  o.stop = [](std::span<const EpisodeRecord> log) { return log.size() == 4; };
  EXPECT_EQ(train(*a, env, o).size(), 4u);
}

TEST(Train, LogRoundTrip) {
  CrystalEnv env(small_env(), std::make_shared<DensityCalculator>());
  auto a = make_agent(tiny_agent(Algorithm::ppo), env.action_count(), 5);
  std::stringstream out;
  TrainOptions o;
  o.budget = 5;
  o.log = &out;
  const auto records = train(*a, env, o);
  EXPECT_TRUE(std::isnan(records[0].loss));  // PPO waits for two episodes
  const auto back = read_train_log(out);
  EXPECT_EQ(back, records);

  std::istringstream bad("episode\tnope\n");
  EXPECT_THROW(read_train_log(bad), ParseError);
  std::istringstream short_row(std::string(train_log_header()) + "\n0\tC1\n");
  EXPECT_THROW(read_train_log(short_row), ParseError);
}

namespace {
class ThrowingCalculator final : public PropertyCalculator {
 public:
  std::string_view id() const noexcept override { return "throwing"; }
  Property property() const noexcept override { return Property::density; }
  CalculatorResult compute(const Structure&, const Composition&) const override { throw FitError("boom"); }
};
}  // namespace

TEST(Train, ErrorsCarryEpisodeContext) {
  CrystalEnv env(small_env(), std::make_shared<ThrowingCalculator>());
  auto a = make_agent(tiny_agent(Algorithm::dqn), env.action_count(), 5);
  TrainOptions o;
  o.budget = 2;
  try {
    train(*a, env, o);
    FAIL() << "expected FitError";
  } catch (const FitError& e) {
    EXPECT_NE(std::string(e.what()).find("episode 0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}

TEST(Train, RandomBaselineIsDeterministic) {
  CrystalEnv e1(small_env(), std::make_shared<DensityCalculator>());
  CrystalEnv e2(small_env(), std::make_shared<DensityCalculator>());
  const auto a = run_random(e1, 30, 4), b = run_random(e2, 30, 4);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(mean_reward(a), trailing_mean(a, 100), 0.0);
  EXPECT_DOUBLE_EQ(trailing_mean(a, 1), a.back().reward);
}

TEST(Train, GreedyEvaluationDoesNotLearn) {
  CrystalEnv env(small_env(), std::make_shared<DensityCalculator>());
  auto a = make_agent(tiny_agent(Algorithm::sac), env.action_count(), 5);
  const auto before = a->parameter_groups()[0].params->flatten();
  for (int i = 0; i < 3; ++i) {
    run_episode(*a, env, ActMode::greedy);
    run_episode(*a, env, ActMode::sample);
  }
  EXPECT_EQ(a->parameter_groups()[0].params->flatten(), before);
}
