#include "crystalgym/calc/band_gap_mock.hpp"

#include <algorithm>
#include <cmath>

namespace crystalgym {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [0, 1) from the top 53 bits.
double unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

}  // namespace

CalculatorResult compute_band_gap_mock(const Structure& structure, const Composition& composition,
                                       std::uint64_t seed, const BandGapMockOptions& o) {
  require_filled(structure, composition);
  std::uint64_t h = splitmix64(structure.content_hash() ^ splitmix64(seed));
  for (const auto* e : composition) h = splitmix64(h ^ static_cast<std::uint64_t>(e->atomic_number));

  const double u_fail = unit(splitmix64(h ^ 1));
  if (u_fail < o.failure_rate) return CalculatorResult::failed(FailureReason::simulated);
  const double u_zero = unit(splitmix64(h ^ 2));
  if (u_zero < o.zero_fraction) return CalculatorResult::ok(0.0);
  const double u_gap = unit(splitmix64(h ^ 3));
  const double gap = -o.mean_gap * std::log1p(-u_gap);
  return CalculatorResult::ok(std::clamp(gap, 0.0, o.max_gap));
}

}  // namespace crystalgym
