#include "crystalgym/env/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "crystalgym/core/errors.hpp"

namespace crystalgym {

namespace {

// exp(-x) underflows to 0 for x > ~745; the success range is (0, 1], so floor it.
double positive(double r) { return std::max(r, std::numeric_limits<double>::min()); }

void check_target(double target) {
  if (!(target > 0.0) || !std::isfinite(target)) throw DomainError("reward target must be positive");
}

}  // namespace

double reward_bulk_modulus(double value, double target, bool success) {
  check_target(target);
  if (!success) return -5.0;
  return std::max(-std::abs(value - target) / target, -5.0);
}

double reward_density(double value, double target, bool success) {
  check_target(target);
  if (!success) return -1.0;
  const double d = value - target;
  return positive(std::exp(-d * d / target));
}

double reward_band_gap(double value, double target, bool success) {
  check_target(target);
  if (!success) return -1.0;
  const double d = value - target;
  return positive(std::exp(-d * d));
}

double reward(Property property, double value, double target, bool success) {
  switch (property) {
    case Property::bulk_modulus: return reward_bulk_modulus(value, target, success);
    case Property::density: return reward_density(value, target, success);
    case Property::band_gap: return reward_band_gap(value, target, success);
  }
  throw DomainError("unknown property");
}

double reward(Property property, const CalculatorResult& result, double target) {
  return reward(property, result.value.value_or(0.0), target, result.success && result.value.has_value());
}

double failure_penalty(Property property) noexcept { return property == Property::bulk_modulus ? -5.0 : -1.0; }

std::pair<double, double> reward_bounds(Property property) noexcept {
  return property == Property::bulk_modulus ? std::pair{-5.0, 0.0} : std::pair{-1.0, 1.0};
}

double TargetTable::operator[](Property p) const noexcept {
  switch (p) {
    case Property::bulk_modulus: return bulk_modulus;
    case Property::density: return density;
    case Property::band_gap: return band_gap;
  }
  return 0.0;
}

TargetTable benchmark_targets(Difficulty difficulty) noexcept {
  if (difficulty == Difficulty::hard) return {500.0, 5.0, 2.0};
  return {300.0, 3.0, 1.12};
}

Difficulty parse_difficulty(std::string_view name) {
  if (name == "easy") return Difficulty::easy;
  if (name == "hard") return Difficulty::hard;
  throw ConfigError("unknown difficulty '" + std::string(name) + "' (expected easy or hard)");
}

}  // namespace crystalgym
