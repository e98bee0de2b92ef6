#pragma once

#include <string_view>

namespace crystalgym {

enum class Property { bulk_modulus, density, band_gap };

std::string_view to_string(Property p) noexcept;
// Accepts "bulk_modulus", "density", "band_gap". Throws ConfigError.
Property parse_property(std::string_view name);
// Unit string used in logs: GPa, g/cm3, eV.
std::string_view unit(Property p) noexcept;
// Divisor that maps a target value onto an O(1) network input.
double target_scale(Property p) noexcept;

}  // namespace crystalgym
