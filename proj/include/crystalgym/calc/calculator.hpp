#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "crystalgym/core/property.hpp"
#include "crystalgym/core/structure.hpp"
#include "crystalgym/env/state.hpp"

namespace crystalgym {

enum class FailureReason { convergence, charge, timeout, parse, simulated };

std::string_view to_string(FailureReason reason) noexcept;
std::optional<FailureReason> parse_failure_reason(std::string_view name) noexcept;

// Raw reward input. `value` is present iff `success`.
struct CalculatorResult {
  bool success = false;
  std::optional<double> value;
  double wall_time = 0.0;  // seconds
  std::optional<FailureReason> failure_reason;

  static CalculatorResult ok(double value, double wall_time = 0.0) { return {true, value, wall_time, std::nullopt}; }
  static CalculatorResult failed(FailureReason reason, double wall_time = 0.0) {
    return {false, std::nullopt, wall_time, reason};
  }

  bool operator==(const CalculatorResult&) const = default;
};

// Evaluates one property of a fully occupied structure. Implementations are
// stateless and safe to call from several threads.
class PropertyCalculator {
 public:
  virtual ~PropertyCalculator() = default;

  virtual std::string_view id() const noexcept = 0;
  virtual int version() const noexcept { return 1; }
  virtual Property property() const noexcept = 0;
  // Throws ValidationError when a site is empty.
  virtual CalculatorResult compute(const Structure& structure, const Composition& composition) const = 0;
};

// Throws ValidationError if the composition does not fill every site.
void require_filled(const Structure& structure, const Composition& composition);

}  // namespace crystalgym
