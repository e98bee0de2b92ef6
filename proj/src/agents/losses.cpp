#include "crystalgym/agents/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crystalgym/core/errors.hpp"

namespace crystalgym::agents {

using nn::Matrix;
using nn::Tensor;

namespace {

Tensor column(std::span<const double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return nn::constant(std::move(m));
}

void require_rows(const Matrix& m, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(m.rows()) != n) throw ShapeError(std::string(what) + ": batch size mismatch");
}

}  // namespace

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t epsilon_greedy(std::span<const double> q, double epsilon, std::mt19937_64& rng) {
  if (q.empty()) throw ShapeError("epsilon_greedy over an empty action set");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in [0, 1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<std::size_t> pick(0, q.size() - 1);
      return pick(rng);
    }
  }
  return argmax(q);
}

std::vector<double> dqn_targets(std::span<const double> rewards, const Matrix& next_q_target,
                                std::span<const bool> dones, double gamma) {
  require_rows(next_q_target, rewards.size(), "dqn_targets");
  std::vector<double> y(rewards.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = rewards[i];
    if (!dones[i]) y[i] += gamma * next_q_target.row(static_cast<Eigen::Index>(i)).maxCoeff();
  }
  return y;
}

std::vector<double> double_dqn_targets(std::span<const double> rewards, const Matrix& next_q_online,
                                       const Matrix& next_q_target, std::span<const bool> dones, double gamma) {
  require_rows(next_q_online, rewards.size(), "double_dqn_targets");
  require_rows(next_q_target, rewards.size(), "double_dqn_targets");
  std::vector<double> y(rewards.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = rewards[i];
    if (dones[i]) continue;
    const auto r = static_cast<Eigen::Index>(i);
    const auto row = next_q_online.row(r);
    const std::size_t a = argmax(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    y[i] += gamma * next_q_target(r, static_cast<Eigen::Index>(a));
  }
  return y;
}

Tensor td_loss(const Tensor& q, std::span<const int> actions, std::span<const double> targets,
               std::span<const double> weights, std::vector<double>* td_errors) {
  const Tensor picked = nn::pick(q, actions);
  const Tensor diff = nn::sub(picked, column(targets));
  if (td_errors) {
    td_errors->resize(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) (*td_errors)[i] = -diff.value()(static_cast<Eigen::Index>(i), 0);
  }
  Tensor sq = nn::square(diff);
  if (!weights.empty()) sq = nn::mul(sq, column(weights));
  return nn::mean(sq);
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values, double bootstrap_value,
                        double gamma, double lambda) {
  if (rewards.size() != values.size()) throw ShapeError("gae: one value per reward required");
  std::vector<double> adv(rewards.size());
  double running = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    const double next_v = k + 1 < values.size() ? values[k + 1] : bootstrap_value;
    const double delta = rewards[k] + gamma * next_v - values[k];
    running = delta + gamma * lambda * running;
    adv[k] = running;
  }
  return adv;
}

std::vector<double> normalize(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  if (out.empty()) return out;
  const double m = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  double var = 0.0;
  for (double v : out) var += (v - m) * (v - m);
  const double sd = std::max(std::sqrt(var / static_cast<double>(out.size())), 1e-8);
  for (double& v : out) v = (v - m) / sd;
  return out;
}

PpoLoss ppo_loss(const Tensor& logits, const Tensor& values, std::span<const int> actions,
                 std::span<const double> old_log_probs, std::span<const double> advantages,
                 std::span<const double> returns, double clip, double value_coef, double entropy_coef) {
  const std::size_t n = actions.size();
  if (old_log_probs.size() != n || advantages.size() != n || returns.size() != n ||
      static_cast<std::size_t>(logits.rows()) != n || static_cast<std::size_t>(values.rows()) != n) {
    throw ShapeError("ppo_loss: batch size mismatch");
  }
  const Tensor logp_all = nn::log_softmax(logits);
  const Tensor logp = nn::pick(logp_all, actions);
  const Tensor ratio = nn::exp(nn::sub(logp, column(old_log_probs)));
  const Tensor adv = column(advantages);
  const Tensor unclipped = nn::mul(ratio, adv);
  const Tensor clipped = nn::mul(nn::clamp(ratio, 1.0 - clip, 1.0 + clip), adv);
  PpoLoss out;
  out.policy = nn::scale(nn::mean(nn::minimum(unclipped, clipped)), -1.0);
  out.value = nn::mean(nn::square(nn::sub(values, column(returns))));
  const Tensor p = nn::exp(logp_all);
  out.entropy = nn::scale(nn::mean(nn::row_sum(nn::mul(p, logp_all))), -1.0);
  out.total = nn::sub(nn::add(out.policy, nn::scale(out.value, value_coef)), nn::scale(out.entropy, entropy_coef));
  return out;
}

std::vector<double> sac_targets(std::span<const double> rewards, const Matrix& next_logits,
                                const Matrix& next_q1_target, const Matrix& next_q2_target,
                                std::span<const bool> dones, double gamma, double alpha) {
  require_rows(next_logits, rewards.size(), "sac_targets");
  require_rows(next_q1_target, rewards.size(), "sac_targets");
  require_rows(next_q2_target, rewards.size(), "sac_targets");
  const Matrix logp = nn::log_softmax(nn::constant(next_logits)).value();
  std::vector<double> y(rewards.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = rewards[i];
    if (dones[i]) continue;
    const auto r = static_cast<Eigen::Index>(i);
    double soft_v = 0.0;
    for (Eigen::Index a = 0; a < logp.cols(); ++a) {
      const double q = std::min(next_q1_target(r, a), next_q2_target(r, a));
      soft_v += std::exp(logp(r, a)) * (q - alpha * logp(r, a));
    }
    y[i] += gamma * soft_v;
  }
  return y;
}

SacLosses sac_losses(const Tensor& q1, const Tensor& q2, const Tensor& logits, std::span<const int> actions,
                     std::span<const double> targets, const Tensor& log_alpha, double target_entropy) {
  SacLosses out;
  const std::vector<double> ones;
  out.q1 = td_loss(q1, actions, targets, ones);
  out.q2 = td_loss(q2, actions, targets, ones);

  const double alpha = std::exp(log_alpha.item());
  const Tensor logp = nn::log_softmax(logits);
  const Tensor p = nn::exp(logp);
  const Tensor min_q = nn::constant(q1.value().cwiseMin(q2.value()));
  const Tensor inner = nn::sub(nn::scale(logp, alpha), min_q);
  out.policy = nn::mean(nn::row_sum(nn::mul(p, inner)));

  const Matrix h = -(p.value().cwiseProduct(logp.value())).rowwise().sum();
  out.mean_entropy = h.mean();
  Matrix gap(1, 1);
  gap(0, 0) = out.mean_entropy - target_entropy;
  out.alpha = nn::mul(log_alpha, nn::constant(gap));
  return out;
}

ReinforceLoss reinforce_loss(const Tensor& logits, const Matrix& reference_logits, std::span<const int> actions,
                             double advantage, double kl_coef, double entropy_coef) {
  if (reference_logits.rows() != logits.rows() || reference_logits.cols() != logits.cols()) {
    throw ShapeError("reinforce_loss: reference logits shape mismatch");
  }
  const Tensor logp = nn::log_softmax(logits);
  const Tensor p = nn::exp(logp);
  const Tensor ref_logp = nn::log_softmax(nn::constant(reference_logits));
  const Tensor pg = nn::scale(nn::sum(nn::pick(logp, actions)), -advantage);
  const Tensor kl = nn::sum(nn::mul(p, nn::sub(logp, ref_logp)));
  const Tensor ent = nn::scale(nn::sum(nn::mul(p, logp)), -1.0);
  ReinforceLoss out;
  out.total = nn::sub(nn::add(pg, nn::scale(kl, kl_coef)), nn::scale(ent, entropy_coef));
  out.kl = kl.item();
  out.entropy = ent.item();
  return out;
}

std::vector<double> entropies(const Matrix& logits) {
  const Matrix logp = nn::log_softmax(nn::constant(logits)).value();
  std::vector<double> h(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) h[r] = -(logp.row(r).array().exp() * logp.row(r).array()).sum();
  return h;
}

}  // namespace crystalgym::agents
