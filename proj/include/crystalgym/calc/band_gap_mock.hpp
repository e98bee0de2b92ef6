#pragma once

#include <cstdint>

#include "crystalgym/calc/calculator.hpp"

namespace crystalgym {

// Imitates a DFT band-gap workflow: frequent failures and a pile-up at 0 eV.
struct BandGapMockOptions {
  double failure_rate = 0.2;
  double zero_fraction = 0.5;  // P(gap = 0 | success)
  double mean_gap = 1.0;       // eV, exponential tail
  double max_gap = 5.0;        // eV, clip
};

// Pure function of (structure hash, per-site composition, seed).
CalculatorResult compute_band_gap_mock(const Structure& structure, const Composition& composition,
                                       std::uint64_t seed, const BandGapMockOptions& options = {});

class BandGapMock final : public PropertyCalculator {
 public:
  explicit BandGapMock(std::uint64_t seed = 0, BandGapMockOptions options = {}) : seed_(seed), options_(options) {}
  std::string_view id() const noexcept override { return "mock-band-gap"; }
  Property property() const noexcept override { return Property::band_gap; }
  CalculatorResult compute(const Structure& s, const Composition& c) const override {
    return compute_band_gap_mock(s, c, seed_, options_);
  }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  BandGapMockOptions options_;
};

}  // namespace crystalgym
