#include "crystalgym/calc/density.hpp"

#include "crystalgym/calc/constants.hpp"

namespace crystalgym {

CalculatorResult compute_density(const Structure& structure, const Composition& composition) {
  require_filled(structure, composition);
  double mass = 0.0;
  for (const auto* e : composition) mass += e->atomic_mass;
  const double volume_cm3 = structure.volume() * units::kA3ToCm3;
  return CalculatorResult::ok(mass / (units::kAvogadro * volume_cm3));
}

}  // namespace crystalgym
