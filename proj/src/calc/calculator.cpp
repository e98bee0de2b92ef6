#include "crystalgym/calc/calculator.hpp"

#include "crystalgym/core/errors.hpp"

namespace crystalgym {

std::string_view to_string(FailureReason reason) noexcept {
  switch (reason) {
    case FailureReason::convergence: return "convergence";
    case FailureReason::charge: return "charge";
    case FailureReason::timeout: return "timeout";
    case FailureReason::parse: return "parse";
    case FailureReason::simulated: return "simulated";
  }
  return "unknown";
}

std::optional<FailureReason> parse_failure_reason(std::string_view name) noexcept {
  for (auto r : {FailureReason::convergence, FailureReason::charge, FailureReason::timeout, FailureReason::parse,
                 FailureReason::simulated}) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

void require_filled(const Structure& structure, const Composition& composition) {
  if (composition.size() != structure.site_count()) {
    throw ValidationError("composition has " + std::to_string(composition.size()) + " entries for " +
                          std::to_string(structure.site_count()) + " sites");
  }
  for (std::size_t i = 0; i < composition.size(); ++i) {
    if (composition[i] == nullptr) throw ValidationError("site " + std::to_string(i) + " is not filled");
  }
}

}  // namespace crystalgym
