#pragma once

#include "crystalgym/calc/calculator.hpp"
#include "crystalgym/calc/eos.hpp"

namespace crystalgym {

struct PairPotentialOptions {
  double cutoff = 8.0;  // Angstrom
};

// Lennard-Jones well depth assigned to an element, eV. Derived from a fixed
// per-block table.
double well_depth(const Element& e) noexcept;

// Shifted-force Lennard-Jones energy of the cell in eV. For each pair,
// r_min = r_cov(i) + r_cov(j) (so sigma = r_min / 2^(1/6)) and
// epsilon = sqrt(eps_i * eps_j). Sums over every periodic image within the cutoff.
double pair_potential_energy(const Structure& structure, const Composition& composition,
                             const PairPotentialOptions& options = {});

// Nine-point volume scan of the pair-potential energy, Murnaghan fit, B0 in GPa.
CalculatorResult compute_bulk_modulus_surrogate(const Structure& structure, const Composition& composition,
                                                const PairPotentialOptions& options = {});

class BulkModulusSurrogate final : public PropertyCalculator {
 public:
  explicit BulkModulusSurrogate(PairPotentialOptions options = {}) : options_(options) {}
  std::string_view id() const noexcept override { return "lj-bulk-modulus"; }
  Property property() const noexcept override { return Property::bulk_modulus; }
  CalculatorResult compute(const Structure& s, const Composition& c) const override {
    return compute_bulk_modulus_surrogate(s, c, options_);
  }

 private:
  PairPotentialOptions options_;
};

}  // namespace crystalgym
