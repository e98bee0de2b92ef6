#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "crystalgym/core/pool.hpp"
#include "crystalgym/features/graph.hpp"
#include "crystalgym/nn/megnet.hpp"

namespace crystalgym::test {

using nn::Matrix;
using nn::MegnetConfig;
using nn::Tensor;

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Central differences on every entry of every input (or `probes` random
// entries when given). Returns the worst relative error.
inline double gradient_check(std::vector<Tensor>& inputs, const std::function<Tensor()>& loss_fn, int probes = 0,
                      std::uint64_t seed = 1) {
  for (auto& t : inputs) t.zero_grad();
  nn::backward(loss_fn());
  std::vector<Matrix> analytic;
  for (auto& t : inputs) analytic.push_back(t.grad());
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Matrix& v = inputs[k].mutable_value();
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(v.size()));
    std::iota(entries.begin(), entries.end(), 0);
    if (probes > 0 && static_cast<int>(entries.size()) > probes) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(static_cast<std::size_t>(probes));
    }
    for (Eigen::Index i : entries) {
      const double x0 = v.data()[i];
      v.data()[i] = x0 + h;
      const double fp = loss_fn().item();
      v.data()[i] = x0 - h;
      const double fm = loss_fn().item();
      v.data()[i] = x0;
      worst = std::max(worst, rel_error(analytic[k].data()[i], (fp - fm) / (2 * h)));
    }
  }
  return worst;
}

inline GraphFeatures sample_observation(std::size_t filled, std::optional<std::size_t> focus, const ActionSpace& space,
                                 double cutoff = 4.5) {
  CrystalState st;
  st.structure = std::make_shared<Structure>(benchmark_structure("C1"));
  st.occupancy.assign(8, nullptr);
  for (std::size_t i = 0; i < filled; ++i) st.occupancy[i] = &space.at((i * 5 + 1) % space.size());
  st.focus = focus;
  FeaturizeOptions opts;
  opts.graph.cutoff = cutoff;
  return featurize(st, space, Property::density, 3.0, opts);
}

inline MegnetConfig tiny_config(std::size_t node_input, std::size_t outputs, bool dueling) {
  MegnetConfig c;
  c.node_input = node_input;
  c.layers = 2;
  c.width = 4;
  c.hidden = 5;
  c.head_hidden = 6;
  c.outputs = outputs;
  c.dueling = dueling;
  return c;
}

}  // namespace crystalgym::test
