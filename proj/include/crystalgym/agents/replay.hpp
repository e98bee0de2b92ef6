#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "crystalgym/features/graph.hpp"

namespace crystalgym::agents {

struct Transition {
  GraphFeatures observation;
  std::size_t action = 0;
  double reward = 0.0;
  GraphFeatures next_observation;  // terminal when done; never bootstrapped from
  bool done = false;
};

// Binary sum tree over a fixed number of leaves.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);
  void set(std::size_t leaf, double priority);
  double get(std::size_t leaf) const { return nodes_[base_ + leaf]; }
  double total() const noexcept { return nodes_[1]; }
  // Leaf whose cumulative interval contains `mass`, for 0 <= mass < total().
  std::size_t find(double mass) const;
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t base_;
  std::vector<double> nodes_;
};

struct ReplaySample {
  std::vector<std::size_t> indices;
  std::vector<double> weights;        // importance weights normalised by their max; all 1 when uniform
  std::vector<double> probabilities;  // P(i) of each draw
};

// Ring buffer with optional proportional prioritisation. New transitions get
// the largest priority seen so far so each is replayed at least once.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, bool prioritized = false, double alpha = 0.6, double priority_epsilon = 1e-6);

  void add(Transition t);
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool prioritized() const noexcept { return prioritized_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  // Draws with replacement. Throws IndexError when empty.
  ReplaySample sample(std::size_t batch, std::mt19937_64& rng, double beta = 1.0) const;
  // Priority becomes (|td| + epsilon)^alpha.
  void update_priorities(std::span<const std::size_t> indices, std::span<const double> td_errors);
  void set_priority(std::size_t index, double priority);  // raw priority, before the alpha exponent
  double probability(std::size_t index) const;

 private:
  std::size_t capacity_;
  bool prioritized_;
  double alpha_;
  double epsilon_;
  double max_priority_ = 1.0;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
  SumTree tree_;
};

// w_i = (N * P(i))^-beta, divided by the largest weight in the batch.
std::vector<double> importance_weights(std::span<const double> probabilities, std::size_t population, double beta);

}  // namespace crystalgym::agents
