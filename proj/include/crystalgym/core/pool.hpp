#pragma once

#include <span>
#include <string_view>

#include "crystalgym/core/structure.hpp"

namespace crystalgym {

// The seven cubic benchmark skeletons C1..C7 (4-8 sites, five space groups).
std::span<const Structure> benchmark_pool();

// Looks up a pool structure by name ("C1".."C7"). Throws LookupError.
const Structure& benchmark_structure(std::string_view name);

// Source text of a pool structure in the structure file format.
std::string_view benchmark_structure_text(std::string_view name);

}  // namespace crystalgym
