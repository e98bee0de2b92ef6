#include "crystalgym/features/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crystalgym/core/errors.hpp"

namespace crystalgym {

std::vector<Edge> build_graph(const Structure& s, double cutoff, int shift_range) {
  if (!(cutoff > 0.0)) throw DomainError("graph cutoff must be positive");
  if (shift_range < 1) throw DomainError("shift_range must be >= 1");
  std::vector<Edge> edges;
  const std::size_t n = s.site_count();
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      for (int c1 = -shift_range; c1 <= shift_range; ++c1) {
        for (int c2 = -shift_range; c2 <= shift_range; ++c2) {
          for (int c3 = -shift_range; c3 <= shift_range; ++c3) {
            const Shift shift{c1, c2, c3};
            const double d = periodic_distance(u, v, shift, s);
            if (d > 0.0 && d <= cutoff) edges.push_back({u, v, shift, d});
          }
        }
      }
    }
  }
  // loops already emit (u, v, shift) in lexicographic order
  return edges;
}

std::vector<Edge> build_graph(const CrystalState& state, double cutoff, int shift_range) {
  return build_graph(*state.structure, cutoff, shift_range);
}

double gaussian_edge_feature(double d, double rho) {
  if (!(rho > 0.0)) throw DomainError("rho must be positive, got " + std::to_string(rho));
  if (d < 0.0) throw DomainError("distance must be non-negative");
  return std::exp(-d * d / rho);
}

int required_shift_range(const Structure& s, double cutoff) {
  int range = 1;
  for (int i = 0; i < 3; ++i) {
    // |df + c| * spacing <= cutoff with |df| < 1 bounds |c| below cutoff/spacing + 1
    range = std::max(range, static_cast<int>(std::floor(cutoff / s.lattice().plane_spacing(i))) + 1);
  }
  return range;
}

std::shared_ptr<const EdgeSet> build_edge_set(const Structure& s, const GraphOptions& o) {
  auto set = std::make_shared<EdgeSet>();
  const int range = o.shift_range > 0 ? o.shift_range : required_shift_range(s, o.cutoff);
  set->edges = build_graph(s, o.cutoff, range);
  set->features.reserve(set->edges.size());
  for (const auto& e : set->edges) set->features.push_back(gaussian_edge_feature(e.distance, o.rho));
  return set;
}

GraphFeatures featurize(const CrystalState& state, const ActionSpace& space, Property property, double target,
                        const FeaturizeOptions& options, std::shared_ptr<const EdgeSet> edges) {
  const Structure& s = *state.structure;
  if (state.occupancy.size() != s.site_count()) {
    throw ValidationError("occupancy length does not match the structure's site count");
  }
  GraphFeatures g;
  g.node_count = s.site_count();
  g.node_width = space.size() + 1;
  g.node_features.assign(g.node_count * g.node_width, 0.0);
  for (std::size_t i = 0; i < g.node_count; ++i) {
    const Element* e = state.occupancy[i];
    std::size_t col = g.empty_column();
    if (e) {
      const auto idx = space.index_of(*e);
      if (!idx) {
        throw ActionSpaceError("element '" + std::string(e->symbol) + "' at site " + std::to_string(i) +
                               " is not in the " + std::string(space.name()) + " action space");
      }
      col = *idx;
    }
    g.node_features[i * g.node_width + col] = 1.0;
  }

  g.edges = edges ? std::move(edges) : build_edge_set(s, options.graph);

  const auto& p = s.lattice().parameters();
  g.focus_width = std::max(options.focus_width, g.node_count);
  g.global_features = {p.a,
                       p.b,
                       p.c,
                       p.alpha / 180.0,
                       p.beta / 180.0,
                       p.gamma / 180.0,
                       static_cast<double>(s.space_group()) / 230.0,
                       target / target_scale(property)};
  g.global_features.resize(kGlobalScalarCount + g.focus_width, 0.0);
  g.focus = state.focus;
  if (state.focus) {
    if (*state.focus >= g.node_count) throw IndexError("focus index out of range");
    g.global_features[kGlobalScalarCount + *state.focus] = 1.0;
  }
  return g;
}

}  // namespace crystalgym
