#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crystalgym/core/element.hpp"
#include "crystalgym/core/structure.hpp"

namespace crystalgym {

// One element per site; nullptr marks an empty site.
using Composition = std::vector<const Element*>;

enum class ActionSpaceId { small, medium, large, custom };

class ActionSpace {
 public:
  // Throws ActionSpaceError on an empty list or duplicate elements.
  ActionSpace(ActionSpaceId id, std::vector<const Element*> elements);

  static ActionSpace preset(ActionSpaceId id);
  // "small" | "medium" | "large", or a comma separated symbol list for custom.
  static ActionSpace parse(std::string_view spec);

  ActionSpaceId id() const noexcept { return id_; }
  std::string_view name() const noexcept;
  std::size_t size() const noexcept { return elements_.size(); }
  const std::vector<const Element*>& elements() const noexcept { return elements_; }
  const Element& at(std::size_t action) const;
  std::optional<std::size_t> index_of(const Element& e) const noexcept;

 private:
  ActionSpaceId id_;
  std::vector<const Element*> elements_;
};

// MDP state: a skeleton plus per-site occupancy and the site to act on next.
struct CrystalState {
  std::shared_ptr<const Structure> structure;
  Composition occupancy;
  std::optional<std::size_t> focus;  // nullopt once terminal
  std::size_t step_count = 0;

  std::size_t filled_count() const noexcept;
  bool complete() const noexcept { return filled_count() == occupancy.size(); }
};

// Element symbols joined per site, "-" for empty sites: "Na Cl Na ...".
std::string composition_string(const Composition& composition);
// Reduced formula, elements sorted by symbol, counts divided by their gcd
// (count 1 is omitted): {Na,Na,Cl,Cl} -> "ClNa".
std::string reduced_composition(const Composition& composition);

}  // namespace crystalgym
