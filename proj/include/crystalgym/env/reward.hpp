#pragma once

#include <utility>

#include "crystalgym/calc/calculator.hpp"
#include "crystalgym/core/property.hpp"

namespace crystalgym {

// Terminal rewards. The calculator's success flag selects between the distance
// term and the failure penalty. Targets must be positive (DomainError).
double reward_bulk_modulus(double value, double target, bool success);  // [-5, 0]
double reward_density(double value, double target, bool success);       // {-1} u (0, 1]
double reward_band_gap(double value, double target, bool success);      // {-1} u (0, 1]

double reward(Property property, double value, double target, bool success);
double reward(Property property, const CalculatorResult& result, double target);
double failure_penalty(Property property) noexcept;

// Closed interval containing every reward of the property.
std::pair<double, double> reward_bounds(Property property) noexcept;

enum class Difficulty { easy, hard };

struct TargetTable {
  double bulk_modulus;  // GPa
  double density;       // g/cm^3
  double band_gap;      // eV
  double operator[](Property p) const noexcept;
};

TargetTable benchmark_targets(Difficulty difficulty) noexcept;
Difficulty parse_difficulty(std::string_view name);  // ConfigError

}  // namespace crystalgym
