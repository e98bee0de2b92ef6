#include "crystalgym/core/property.hpp"

#include <string>

#include "crystalgym/core/errors.hpp"

namespace crystalgym {

std::string_view to_string(Property p) noexcept {
  switch (p) {
    case Property::bulk_modulus: return "bulk_modulus";
    case Property::density: return "density";
    case Property::band_gap: return "band_gap";
  }
  return "unknown";
}

Property parse_property(std::string_view name) {
  if (name == "bulk_modulus") return Property::bulk_modulus;
  if (name == "density") return Property::density;
  if (name == "band_gap") return Property::band_gap;
  throw ConfigError("unknown property '" + std::string(name) + "' (expected bulk_modulus, density or band_gap)");
}

std::string_view unit(Property p) noexcept {
  switch (p) {
    case Property::bulk_modulus: return "GPa";
    case Property::density: return "g/cm3";
    case Property::band_gap: return "eV";
  }
  return "";
}

double target_scale(Property p) noexcept {
  switch (p) {
    case Property::bulk_modulus: return 1000.0;
    case Property::density: return 30.0;
    case Property::band_gap: return 5.0;
  }
  return 1.0;
}

}  // namespace crystalgym
