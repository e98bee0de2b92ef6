#pragma once

#include <functional>
#include <span>
#include <vector>

#include "crystalgym/calc/calculator.hpp"

namespace crystalgym {

// Murnaghan parameters. bulk_modulus is in GPa.
struct EOSFit {
  double e0 = 0.0;            // eV
  double v0 = 0.0;            // A^3
  double bulk_modulus = 0.0;  // GPa
  double b0_prime = 4.0;      // dimensionless, > 1
  double residual = 0.0;      // RMS energy residual, eV
};

struct EnergyVolume {
  double volume;  // A^3
  double energy;  // eV
};

// E(V) = E0 + B0 V / B0' [ (V0/V)^B0' / (B0' - 1) + 1 ] - B0 V0 / (B0' - 1)
// Throws DomainError for V <= 0 or an invalid fit.
double murnaghan_energy(double volume, const EOSFit& fit);

// Least-squares Murnaghan fit (Levenberg-Marquardt seeded by a parabola).
// Needs >= 5 points with distinct volumes; throws FitError when the data has
// no minimum, the optimiser does not converge, or B0 <= 0.
EOSFit fit_murnaghan(std::span<const EnergyVolume> points);

// Linear strains applied in the bulk-modulus scan: -4%..+4% in 1% steps.
std::vector<double> volume_scan_strains();

// Energy of a composition on a (possibly strained) structure, in eV.
using EnergyFunction = std::function<double(const Structure&, const Composition&)>;

// Evaluates `energy` once per scan strain, fits Murnaghan and returns B0 in
// GPa. Fails with FailureReason::simulated when the scanned curve has no
// interior minimum, the fit fails, or the fitted parameters are unphysical.
CalculatorResult bulk_modulus_from_scan(const Structure& structure, const Composition& composition,
                                        const EnergyFunction& energy);

}  // namespace crystalgym
