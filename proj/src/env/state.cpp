#include "crystalgym/env/state.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "crystalgym/core/errors.hpp"

namespace crystalgym {
namespace {

constexpr std::string_view kSmall[] = {"Li", "Na", "K", "Rb", "Be", "Ca", "Mg", "Sr", "H",
                                       "C",  "N",  "O", "P",  "S",  "Se", "F",  "Cl", "Br"};
constexpr std::string_view kMediumExtra[] = {"B", "Si", "Ge", "Fe", "Cu", "Co", "Ni", "Mn", "Al", "Zn", "Sn", "Cr"};
constexpr std::string_view kLargeExtra[] = {"In", "Sb", "V",  "Mo", "Ga", "Ag", "Ti", "Ba", "Y", "Te",
                                            "I",  "Pd", "Rh", "As", "Pt", "Cs", "Au", "Bi", "Zr", "La"};

}  // namespace

ActionSpace::ActionSpace(ActionSpaceId id, std::vector<const Element*> elements)
    : id_(id), elements_(std::move(elements)) {
  if (elements_.empty()) throw ActionSpaceError("action space must contain at least one element");
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    if (elements_[i] == nullptr) throw ActionSpaceError("action space contains a null element");
    for (std::size_t j = 0; j < i; ++j) {
      if (elements_[j]->atomic_number == elements_[i]->atomic_number) {
        throw ActionSpaceError("duplicate element '" + std::string(elements_[i]->symbol) + "' in action space");
      }
    }
  }
}

ActionSpace ActionSpace::preset(ActionSpaceId id) {
  std::vector<const Element*> els;
  for (auto s : kSmall) els.push_back(&element(s));
  if (id == ActionSpaceId::medium || id == ActionSpaceId::large) {
    for (auto s : kMediumExtra) els.push_back(&element(s));
  }
  if (id == ActionSpaceId::large) {
    for (auto s : kLargeExtra) els.push_back(&element(s));
  }
  if (id == ActionSpaceId::custom) throw ActionSpaceError("custom action spaces need an explicit element list");
  return ActionSpace(id, std::move(els));
}

ActionSpace ActionSpace::parse(std::string_view spec) {
  if (spec == "small") return preset(ActionSpaceId::small);
  if (spec == "medium") return preset(ActionSpaceId::medium);
  if (spec == "large") return preset(ActionSpaceId::large);
  std::vector<const Element*> els;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    auto comma = spec.find(',', pos);
    auto token = spec.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (!token.empty()) {
      try {
        els.push_back(&element(token));
      } catch (const LookupError& e) {
        throw ActionSpaceError(std::string("action space: ") + e.what());
      }
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return ActionSpace(ActionSpaceId::custom, std::move(els));
}

std::string_view ActionSpace::name() const noexcept {
  switch (id_) {
    case ActionSpaceId::small: return "small";
    case ActionSpaceId::medium: return "medium";
    case ActionSpaceId::large: return "large";
    case ActionSpaceId::custom: return "custom";
  }
  return "custom";
}

const Element& ActionSpace::at(std::size_t action) const {
  if (action >= elements_.size()) {
    throw ActionError("action " + std::to_string(action) + " out of range for " + std::to_string(size()) +
                      "-element action space");
  }
  return *elements_[action];
}

std::optional<std::size_t> ActionSpace::index_of(const Element& e) const noexcept {
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    if (elements_[i]->atomic_number == e.atomic_number) return i;
  }
  return std::nullopt;
}

std::size_t CrystalState::filled_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(occupancy.begin(), occupancy.end(), [](auto* e) { return e != nullptr; }));
}

std::string composition_string(const Composition& composition) {
  std::string out;
  for (std::size_t i = 0; i < composition.size(); ++i) {
    if (i) out += ' ';
    out += composition[i] ? std::string(composition[i]->symbol) : std::string("-");
  }
  return out;
}

std::string reduced_composition(const Composition& composition) {
  std::map<std::string_view, int> counts;
  for (const auto* e : composition) {
    if (e) ++counts[e->symbol];
  }
  int g = 0;
  for (const auto& [symbol, n] : counts) g = std::gcd(g, n);
  std::ostringstream os;
  for (const auto& [symbol, n] : counts) {
    os << symbol;
    if (n / g != 1) os << n / g;
  }
  return os.str();
}

}  // namespace crystalgym
