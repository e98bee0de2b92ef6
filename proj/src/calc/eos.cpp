#include "crystalgym/calc/eos.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "crystalgym/calc/constants.hpp"
#include "crystalgym/core/errors.hpp"

namespace crystalgym {
namespace {

// Parameter vector used internally: E0, V0, B0 (eV/A^3), B0'.
using Params = std::array<double, 4>;

double energy_at(double v, const Params& p) {
  const double x = std::pow(p[1] / v, p[3]);
  return p[0] + p[2] * v / p[3] * (x / (p[3] - 1.0) + 1.0) - p[2] * p[1] / (p[3] - 1.0);
}

Params gradient_at(double v, const Params& p) {
  const double e0 = p[0], v0 = p[1], b = p[2], bp = p[3];
  (void)e0;
  const double x = std::pow(v0 / v, bp);
  const double inv = 1.0 / (bp - 1.0);
  Params g;
  g[0] = 1.0;
  g[1] = b * inv * (v * x / v0 - 1.0);
  g[2] = v / bp * (x * inv + 1.0) - v0 * inv;
  const double inner = x * inv + 1.0;
  const double d_inner = x * std::log(v0 / v) * inv - x * inv * inv;
  g[3] = b * v * (d_inner * bp - inner) / (bp * bp) + b * v0 * inv * inv;
  return g;
}

bool physical(const Params& p) { return p[1] > 0.0 && p[2] > 0.0 && p[3] > 1.0 && std::isfinite(p[3]); }

double cost(std::span<const EnergyVolume> pts, const Params& p) {
  double c = 0.0;
  for (const auto& pt : pts) {
    const double r = energy_at(pt.volume, p) - pt.energy;
    c += r * r;
  }
  return c;
}

// Solves the 4x4 system in place with partial pivoting; false when singular.
bool solve4(std::array<std::array<double, 4>, 4> a, Params b, Params& x) {
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0 || !std::isfinite(a[piv][col])) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int r = 3; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 4; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return true;
}

Params parabolic_seed(std::span<const EnergyVolume> pts) {
  // fit E = c2 t^2 + c1 t + c0 with t = V - mean(V) for conditioning
  double mean_v = 0.0;
  for (const auto& p : pts) mean_v += p.volume;
  mean_v /= static_cast<double>(pts.size());
  double s[5] = {0, 0, 0, 0, 0}, r[3] = {0, 0, 0};
  for (const auto& p : pts) {
    const double t = p.volume - mean_v;
    double tk = 1.0;
    for (int k = 0; k < 5; ++k) {
      s[k] += tk;
      if (k < 3) r[k] += tk * p.energy;
      tk *= t;
    }
  }
  // normal equations [s0 s1 s2; s1 s2 s3; s2 s3 s4] [c0 c1 c2] = r
  const double m[3][3] = {{s[0], s[1], s[2]}, {s[1], s[2], s[3]}, {s[2], s[3], s[4]}};
  auto det3 = [](const double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double d = det3(m);
  if (d == 0.0) throw FitError("parabolic pre-fit is singular");
  double c[3];
  for (int k = 0; k < 3; ++k) {
    double mk[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) mk[i][j] = j == k ? r[i] : m[i][j];
    c[k] = det3(mk) / d;
  }
  if (!(c[2] > 0.0)) throw FitError("energy-volume data has no minimum (non-convex parabola)");
  const double t0 = -c[1] / (2.0 * c[2]);
  const double v0 = mean_v + t0;
  if (!(v0 > 0.0)) throw FitError("parabolic pre-fit gives a non-positive equilibrium volume");
  const double e0 = c[0] + c[1] * t0 + c[2] * t0 * t0;
  return {e0, v0, 2.0 * c[2] * v0, 4.0};
}

}  // namespace

double murnaghan_energy(double volume, const EOSFit& fit) {
  if (!(volume > 0.0)) throw DomainError("volume must be positive");
  if (!(fit.v0 > 0.0) || !(fit.bulk_modulus > 0.0) || !(fit.b0_prime > 1.0)) {
    throw DomainError("invalid Murnaghan parameters");
  }
  return energy_at(volume, {fit.e0, fit.v0, fit.bulk_modulus / units::kGPaPerEvPerA3, fit.b0_prime});
}

EOSFit fit_murnaghan(std::span<const EnergyVolume> points) {
  if (points.size() < 5) {
    throw FitError("Murnaghan fit needs at least 5 points, got " + std::to_string(points.size()));
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].volume > 0.0) || !std::isfinite(points[i].energy)) throw FitError("invalid energy-volume point");
    for (std::size_t j = 0; j < i; ++j) {
      if (points[i].volume == points[j].volume) throw FitError("Murnaghan fit needs distinct volumes");
    }
  }

  Params p = parabolic_seed(points);
  double c = cost(points, p);
  double lambda = 1e-3;
  bool converged = false;
  for (int iter = 0; iter < 500 && !converged; ++iter) {
    std::array<std::array<double, 4>, 4> jtj{};
    Params jtr{};
    for (const auto& pt : points) {
      const Params g = gradient_at(pt.volume, p);
      const double r = energy_at(pt.volume, p) - pt.energy;
      for (int i = 0; i < 4; ++i) {
        jtr[i] += g[i] * r;
        for (int j = 0; j < 4; ++j) jtj[i][j] += g[i] * g[j];
      }
    }
    bool improved = false;
    while (lambda < 1e16) {
      auto a = jtj;
      for (int i = 0; i < 4; ++i) a[i][i] += lambda * std::max(jtj[i][i], 1e-300);
      Params step{}, neg;
      for (int i = 0; i < 4; ++i) neg[i] = -jtr[i];
      if (!solve4(a, neg, step)) {
        lambda *= 10.0;
        continue;
      }
      Params trial;
      for (int i = 0; i < 4; ++i) trial[i] = p[i] + step[i];
      const double tc = physical(trial) ? cost(points, trial) : std::numeric_limits<double>::infinity();
      if (tc <= c) {
        double rel = 0.0;
        for (int i = 0; i < 4; ++i) rel = std::max(rel, std::abs(step[i]) / (std::abs(p[i]) + 1e-12));
        const double dc = c - tc;
        p = trial;
        c = tc;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (rel < 1e-13 || dc <= 1e-30 + 1e-15 * c) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) {
      // no descent direction left: at a minimum to working precision
      converged = true;
    }
  }
  if (!converged) throw FitError("Murnaghan fit did not converge");
  if (!physical(p)) throw FitError("Murnaghan fit produced unphysical parameters");

  EOSFit fit;
  fit.e0 = p[0];
  fit.v0 = p[1];
  fit.bulk_modulus = p[2] * units::kGPaPerEvPerA3;
  fit.b0_prime = p[3];
  fit.residual = std::sqrt(c / static_cast<double>(points.size()));
  if (!(fit.bulk_modulus > 0.0)) throw FitError("Murnaghan fit produced B0 <= 0");
  return fit;
}

std::vector<double> volume_scan_strains() {
  std::vector<double> s;
  for (int k = -4; k <= 4; ++k) s.push_back(0.01 * k);
  return s;
}

CalculatorResult bulk_modulus_from_scan(const Structure& structure, const Composition& composition,
                                        const EnergyFunction& energy) {
  require_filled(structure, composition);
  std::vector<EnergyVolume> points;
  for (double strain : volume_scan_strains()) {
    const Structure strained = structure.scaled(1.0 + strain);
    points.push_back({strained.volume(), energy(strained, composition)});
  }
  for (const auto& p : points) {
    if (!std::isfinite(p.energy)) return CalculatorResult::failed(FailureReason::simulated);
  }
  const auto lowest = std::min_element(points.begin(), points.end(),
                                       [](const auto& a, const auto& b) { return a.energy < b.energy; });
  if (lowest == points.begin() || lowest == points.end() - 1) {
    return CalculatorResult::failed(FailureReason::simulated);
  }
  try {
    const EOSFit fit = fit_murnaghan(points);
    if (fit.v0 < points.front().volume || fit.v0 > points.back().volume) {
      return CalculatorResult::failed(FailureReason::simulated);
    }
    return CalculatorResult::ok(fit.bulk_modulus);
  } catch (const FitError&) {
    return CalculatorResult::failed(FailureReason::simulated);
  }
}

}  // namespace crystalgym
