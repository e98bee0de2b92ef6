#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crystalgym/features/graph.hpp"
#include "crystalgym/nn/tensor.hpp"

namespace crystalgym::nn {

struct MegnetConfig {
  std::size_t node_input = 0;    // |action space| + 1 (the focus flag is appended internally)
  std::size_t global_input = kGlobalScalarCount;
  std::size_t layers = 3;        // K
  std::size_t width = 32;        // node, edge and global state width
  std::size_t hidden = 64;       // hidden width of the three update MLPs
  std::size_t head_hidden = 64;
  std::size_t outputs = 1;       // |A| for Q-values or logits, 1 for a value head
  bool dueling = false;          // Q = V + A - mean(A)

  void validate() const;         // ConfigError
  bool operator==(const MegnetConfig&) const = default;
};

// Disjoint union of several graphs, laid out for batched evaluation.
struct GraphBatch {
  std::size_t graphs = 0;
  Matrix nodes;                  // total nodes x (node_input + 1), last column = focus flag
  Matrix edges;                  // total edges x 1, gaussian distance feature
  Matrix globals;                // graphs x global_input
  std::vector<int> src, dst;     // edge endpoints as global node rows
  std::vector<int> node_graph;   // graph id per node
  std::vector<int> edge_graph;   // graph id per edge
  std::vector<int> focus_row;    // global node row of the focus site, -1 when terminal
};

// Throws ShapeError when the observations disagree on node width.
GraphBatch make_batch(std::span<const GraphFeatures* const> observations);
GraphBatch make_batch(const GraphFeatures& observation);

// MEGNet-style encoder with a dense head. Node state h, edge state e and
// global state u are embedded linearly, then K residual layers update
//   e <- e + MLP_e([h_src, h_dst, e, u]),
//   h <- h + MLP_v([h, mean of outgoing e, u]),
//   u <- u + MLP_u([mean h, mean e, u]).
// The readout [mean h, mean e, u, h_focus] feeds the head.
class Megnet {
 public:
  Megnet(MegnetConfig config, std::uint64_t seed);

  const MegnetConfig& config() const noexcept { return config_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  // graphs x outputs. Uses `params` when given (same layout, e.g. a target
  // copy), otherwise this network's own parameters.
  Tensor forward(const GraphBatch& batch, const ParameterSet* params = nullptr) const;
  // Readout only (graphs x 4*width), exposed for tests.
  Tensor encode(const GraphBatch& batch, const ParameterSet* params = nullptr) const;

  // Raises ShapeError when `params` does not have this network's layout.
  void check_layout(const ParameterSet& params) const;

 private:
  MegnetConfig config_;
  ParameterSet params_;
};

}  // namespace crystalgym::nn
