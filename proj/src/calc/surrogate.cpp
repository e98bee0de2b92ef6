#include "crystalgym/calc/surrogate.hpp"

#include <cmath>

#include "crystalgym/features/graph.hpp"

namespace crystalgym {
namespace {

bool in(int z, std::initializer_list<int> zs) {
  for (int x : zs)
    if (x == z) return true;
  return false;
}

}  // namespace

double well_depth(const Element& e) noexcept {
  const int z = e.atomic_number;
  if (z == 1) return 0.60;
  if (in(z, {2, 10, 18, 36, 54, 86, 118})) return 0.05;              // noble gases
  if (in(z, {3, 11, 19, 37, 55, 87})) return 0.75;                  // alkali metals
  if (in(z, {4, 12, 20, 38, 56, 88})) return 1.35;                  // alkaline earths
  if (in(z, {9, 17, 35, 53, 85, 117})) return 0.90;                 // halogens
  if (in(z, {5, 6, 7, 14, 15, 32, 33})) return 3.00;                // covalent formers
  if (in(z, {8, 16, 34, 52, 84})) return 2.10;                      // chalcogens
  if (in(z, {13, 31, 49, 50, 51, 81, 82, 83, 113, 114, 115, 116})) return 1.65;  // p-block metals
  if ((z >= 57 && z <= 71) || (z >= 89 && z <= 103)) return 1.80;   // f-block
  return 2.50;                                                      // transition metals
}

double pair_potential_energy(const Structure& s, const Composition& composition, const PairPotentialOptions& o) {
  require_filled(s, composition);
  const double rc = o.cutoff;
  const int range = required_shift_range(s, rc);
  const double sixth_root_two = std::pow(2.0, 1.0 / 6.0);
  const std::size_t n = s.site_count();
  double energy = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      const Element& a = *composition[u];
      const Element& b = *composition[v];
      const double sigma = (a.covalent_radius + b.covalent_radius) / sixth_root_two;
      const double eps = std::sqrt(well_depth(a) * well_depth(b));
      auto phi = [&](double r) {
        const double sr6 = std::pow(sigma / r, 6);
        return 4.0 * eps * (sr6 * sr6 - sr6);
      };
      auto dphi = [&](double r) {
        const double sr6 = std::pow(sigma / r, 6);
        return 4.0 * eps * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r;
      };
      const double phi_c = phi(rc), dphi_c = dphi(rc);
      for (int c1 = -range; c1 <= range; ++c1)
        for (int c2 = -range; c2 <= range; ++c2)
          for (int c3 = -range; c3 <= range; ++c3) {
            const double r = periodic_distance(u, v, {c1, c2, c3}, s);
            if (r <= 0.0 || r >= rc) continue;
            energy += 0.5 * (phi(r) - phi_c - (r - rc) * dphi_c);
          }
    }
  }
  return energy;
}

CalculatorResult compute_bulk_modulus_surrogate(const Structure& s, const Composition& c,
                                                const PairPotentialOptions& o) {
  return bulk_modulus_from_scan(s, c, [&o](const Structure& strained, const Composition& comp) {
    return pair_potential_energy(strained, comp, o);
  });
}

}  // namespace crystalgym
