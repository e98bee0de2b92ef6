#pragma once

#include "crystalgym/calc/calculator.hpp"

namespace crystalgym {

// rho = sum(site masses) / (N_A * V), in g/cm^3. Never fails.
CalculatorResult compute_density(const Structure& structure, const Composition& composition);

class DensityCalculator final : public PropertyCalculator {
 public:
  std::string_view id() const noexcept override { return "exact-density"; }
  Property property() const noexcept override { return Property::density; }
  CalculatorResult compute(const Structure& s, const Composition& c) const override { return compute_density(s, c); }
};

}  // namespace crystalgym
