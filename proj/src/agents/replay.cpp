#include "crystalgym/agents/replay.hpp"

#include <algorithm>
#include <cmath>

#include "crystalgym/core/errors.hpp"

namespace crystalgym::agents {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity), base_(1) {
  while (base_ < std::max<std::size_t>(capacity, 1)) base_ <<= 1;
  nodes_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double priority) {
  if (leaf >= capacity_) throw IndexError("sum tree leaf out of range");
  std::size_t i = base_ + leaf;
  nodes_[i] = priority;
  for (i >>= 1; i >= 1; i >>= 1) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

std::size_t SumTree::find(double mass) const {
  std::size_t i = 1;
  while (i < base_) {
    const double left = nodes_[2 * i];
    if (mass < left || nodes_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      mass -= left;
      i = 2 * i + 1;
    }
  }
  return std::min(i - base_, capacity_ - 1);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, bool prioritized, double alpha, double priority_epsilon)
    : capacity_(capacity), prioritized_(prioritized), alpha_(alpha), epsilon_(priority_epsilon), tree_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
  if (alpha < 0.0) throw ConfigError("priority exponent must be >= 0");
  data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::add(Transition t) {
  const std::size_t slot = next_;
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[slot] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
  if (prioritized_) tree_.set(slot, std::pow(max_priority_, alpha_));
}

double ReplayBuffer::probability(std::size_t index) const {
  if (index >= data_.size()) throw IndexError("replay index out of range");
  if (!prioritized_) return 1.0 / static_cast<double>(data_.size());
  return tree_.get(index) / tree_.total();
}

ReplaySample ReplayBuffer::sample(std::size_t batch, std::mt19937_64& rng, double beta) const {
  if (data_.empty()) throw IndexError("sampling from an empty replay buffer");
  ReplaySample s;
  s.indices.reserve(batch);
  s.probabilities.reserve(batch);
  if (!prioritized_) {
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    for (std::size_t i = 0; i < batch; ++i) s.indices.push_back(pick(rng));
    s.probabilities.assign(batch, 1.0 / static_cast<double>(data_.size()));
    s.weights.assign(batch, 1.0);
    return s;
  }
  std::uniform_real_distribution<double> u(0.0, tree_.total());
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t idx = std::min(tree_.find(u(rng)), data_.size() - 1);
    s.indices.push_back(idx);
    s.probabilities.push_back(tree_.get(idx) / tree_.total());
  }
  s.weights = importance_weights(s.probabilities, data_.size(), beta);
  return s;
}

void ReplayBuffer::set_priority(std::size_t index, double priority) {
  if (index >= data_.size()) throw IndexError("replay index out of range");
  if (!(priority > 0.0)) throw DomainError("priorities must be positive");
  max_priority_ = std::max(max_priority_, priority);
  if (prioritized_) tree_.set(index, std::pow(priority, alpha_));
}

void ReplayBuffer::update_priorities(std::span<const std::size_t> indices, std::span<const double> td_errors) {
  if (indices.size() != td_errors.size()) throw ShapeError("one TD error per sampled index required");
  for (std::size_t i = 0; i < indices.size(); ++i) set_priority(indices[i], std::abs(td_errors[i]) + epsilon_);
}

std::vector<double> importance_weights(std::span<const double> probabilities, std::size_t population, double beta) {
  std::vector<double> w(probabilities.size());
  double max_w = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::pow(static_cast<double>(population) * probabilities[i], -beta);
    max_w = std::max(max_w, w[i]);
  }
  if (max_w > 0.0) {
    for (auto& x : w) x /= max_w;
  }
  return w;
}

}  // namespace crystalgym::agents
