#include "crystalgym/core/pool.hpp"

#include <array>
#include <string>
#include <vector>

#include "crystalgym/core/errors.hpp"

namespace crystalgym {
namespace {

struct PoolEntry {
  std::string_view name;
  std::string_view text;
};

constexpr std::array<PoolEntry, 7> kPool{{
    {"C1", R"(# rocksalt (NaCl-type), 4 cation + 4 anion sites
lattice 5.6402 5.6402 5.6402 90 90 90
spacegroup 225
name C1
site 0 0 0
site 0 0.5 0.5
site 0.5 0 0.5
site 0.5 0.5 0
site 0.5 0.5 0.5
site 0.5 0 0
site 0 0.5 0
site 0 0 0.5
)"},
    {"C2", R"(# zincblende (ZnS-type)
lattice 5.41 5.41 5.41 90 90 90
spacegroup 216
name C2
site 0 0 0
site 0 0.5 0.5
site 0.5 0 0.5
site 0.5 0.5 0
site 0.25 0.25 0.25
site 0.25 0.75 0.75
site 0.75 0.25 0.75
site 0.75 0.75 0.25
)"},
    {"C3", R"(# cubic perovskite (SrTiO3-type)
lattice 3.905 3.905 3.905 90 90 90
spacegroup 221
name C3
site 0 0 0
site 0.5 0.5 0.5
site 0.5 0.5 0
site 0.5 0 0.5
site 0 0.5 0.5
)"},
    {"C4", R"(# cuprite (Cu2O-type)
lattice 4.27 4.27 4.27 90 90 90
spacegroup 224
name C4
site 0 0 0
site 0.5 0.5 0
site 0.5 0 0.5
site 0 0.5 0.5
site 0.25 0.25 0.25
site 0.75 0.75 0.75
)"},
    {"C5", R"(# A15 (Cr3Si-type)
lattice 4.56 4.56 4.56 90 90 90
spacegroup 223
name C5
site 0 0 0
site 0.5 0.5 0.5
site 0.25 0 0.5
site 0.75 0 0.5
site 0.5 0.25 0
site 0.5 0.75 0
site 0 0.5 0.25
site 0 0.5 0.75
)"},
    {"C6", R"(# L1_2 (Cu3Au-type)
lattice 3.75 3.75 3.75 90 90 90
spacegroup 221
name C6
site 0 0 0
site 0 0.5 0.5
site 0.5 0 0.5
site 0.5 0.5 0
)"},
    {"C7", R"(# ReO3-type
lattice 3.75 3.75 3.75 90 90 90
spacegroup 221
name C7
site 0 0 0
site 0.5 0 0
site 0 0.5 0
site 0 0 0.5
)"},
}};

const std::vector<Structure>& parsed_pool() {
  static const std::vector<Structure> pool = [] {
    std::vector<Structure> out;
    for (const auto& entry : kPool) out.push_back(parse_structure(entry.text, entry.name));
    return out;
  }();
  return pool;
}

}  // namespace

std::span<const Structure> benchmark_pool() { return parsed_pool(); }

const Structure& benchmark_structure(std::string_view name) {
  for (const auto& s : parsed_pool()) {
    if (s.name() == name) return s;
  }
  throw LookupError("unknown benchmark structure '" + std::string(name) + "'");
}

std::string_view benchmark_structure_text(std::string_view name) {
  for (const auto& entry : kPool) {
    if (entry.name == name) return entry.text;
  }
  throw LookupError("unknown benchmark structure '" + std::string(name) + "'");
}

}  // namespace crystalgym
