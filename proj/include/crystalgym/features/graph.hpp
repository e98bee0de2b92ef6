#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "crystalgym/core/property.hpp"
#include "crystalgym/core/structure.hpp"
#include "crystalgym/env/state.hpp"

namespace crystalgym {

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  Shift shift;
  double distance = 0.0;
};

struct GraphOptions {
  double cutoff = 6.0;   // Angstrom
  // 0 selects the smallest range that still reaches every image within the
  // cutoff; a fixed range of 1 misses images whenever cutoff > cell spacing.
  int shift_range = 0;
  double rho = 4.0;      // Angstrom^2
};

// Smallest shift range containing every periodic image within `cutoff`.
int required_shift_range(const Structure& structure, double cutoff);

// Topology of a skeleton. Occupancy never changes edges, so one EdgeSet is
// shared by every observation of the same structure.
struct EdgeSet {
  std::vector<Edge> edges;
  std::vector<double> features;  // gaussian distance t per edge
};

// All ordered pairs (u, v, shift) with |shift_i| <= shift_range and
// 0 < d <= cutoff, sorted by u, then v, then shift.
std::vector<Edge> build_graph(const Structure& structure, double cutoff, int shift_range);
std::vector<Edge> build_graph(const CrystalState& state, double cutoff, int shift_range);

// t = exp(-d^2 / rho). Throws DomainError for rho <= 0 or d < 0.
double gaussian_edge_feature(double distance, double rho);

std::shared_ptr<const EdgeSet> build_edge_set(const Structure& structure, const GraphOptions& options);

inline constexpr std::size_t kGlobalScalarCount = 8;  // a b c phi1 phi2 phi3 S target

// Network input for one state.
//  node_features: node_count x node_width row-major one-hot, node_width =
//    |action space| + 1 with the last column flagging an empty site.
//  global_features: [a, b, c, phi1/180, phi2/180, phi3/180, S/230,
//    target/scale(property), focus one-hot (focus_width entries)].
struct GraphFeatures {
  std::size_t node_count = 0;
  std::size_t node_width = 0;
  std::vector<double> node_features;
  std::shared_ptr<const EdgeSet> edges;
  std::vector<double> global_features;
  std::size_t focus_width = 0;
  std::optional<std::size_t> focus;

  double node(std::size_t row, std::size_t col) const { return node_features[row * node_width + col]; }
  std::size_t edge_count() const noexcept { return edges ? edges->edges.size() : 0; }
  std::size_t empty_column() const noexcept { return node_width - 1; }
};

struct FeaturizeOptions {
  GraphOptions graph;
  std::size_t focus_width = kDefaultMaxSites;  // padded to the pool's max site count
};

// Throws ActionSpaceError if a filled element is outside the action space.
// `edges` may carry a precomputed EdgeSet for state.structure.
GraphFeatures featurize(const CrystalState& state, const ActionSpace& action_space, Property property,
                        double target, const FeaturizeOptions& options = {},
                        std::shared_ptr<const EdgeSet> edges = nullptr);

}  // namespace crystalgym
