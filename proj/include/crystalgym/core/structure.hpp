#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "crystalgym/core/lattice.hpp"

namespace crystalgym {

inline constexpr std::size_t kDefaultMaxSites = 8;

// Integer lattice translation (c1, c2, c3).
struct Shift {
  int c1 = 0, c2 = 0, c3 = 0;

  Shift operator-() const { return {-c1, -c2, -c3}; }
  auto operator<=>(const Shift&) const = default;
};

// Immutable crystal skeleton: lattice, fractional sites, declared space group.
class Structure {
 public:
  // Wraps every coordinate into [0, 1). Throws ValidationError when the site
  // count is outside [1, max_sites] or the space group is outside [1, 230].
  Structure(std::string name, Lattice lattice, std::vector<Vec3> sites, int space_group,
            std::size_t max_sites = kDefaultMaxSites);

  const std::string& name() const noexcept { return name_; }
  const Lattice& lattice() const noexcept { return lattice_; }
  const std::vector<Vec3>& sites() const noexcept { return sites_; }
  std::size_t site_count() const noexcept { return sites_.size(); }
  int space_group() const noexcept { return space_group_; }
  double volume() const noexcept { return lattice_.volume(); }

  Vec3 cartesian(std::size_t site) const;
  // Same sites and space group on an isotropically scaled lattice.
  Structure scaled(double linear_factor) const;

  // FNV-1a over the serialized text; stable across runs and platforms.
  std::uint64_t content_hash() const;

  bool operator==(const Structure& other) const;

 private:
  std::string name_;
  Lattice lattice_;
  std::vector<Vec3> sites_;
  int space_group_;
};

// Distance in Angstrom between site u in the reference cell and site v in the
// cell translated by `shift`. Throws IndexError for invalid site indices.
double periodic_distance(std::size_t u, std::size_t v, const Shift& shift, const Structure& structure);

// Line-oriented structure text:
//   lattice a b c phi1 phi2 phi3
//   spacegroup S
//   name <string>
//   site fx fy fz        (one per site)
// '#' starts a comment. Parsed numbers are canonicalised to 10 significant
// digits so that parse -> serialize -> parse is exact.
Structure parse_structure(std::string_view text, std::string_view source = "<string>",
                          std::size_t max_sites = kDefaultMaxSites);
Structure parse_structure_file(const std::filesystem::path& path, std::size_t max_sites = kDefaultMaxSites);
std::string serialize_structure(const Structure& structure);

}  // namespace crystalgym
