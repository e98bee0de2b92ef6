#pragma once

#include <span>
#include <string_view>

namespace crystalgym {

struct Element {
  std::string_view symbol;
  int atomic_number;
  double atomic_mass;        // g/mol, IUPAC abridged standard weight
  double covalent_radius;    // Angstrom, single-bond covalent radius
};

// Every element from H to Og, ordered by atomic number.
std::span<const Element> element_table() noexcept;

// Throws LookupError for unknown symbols / out-of-range numbers.
const Element& element(std::string_view symbol);
const Element& element(int atomic_number);

}  // namespace crystalgym
