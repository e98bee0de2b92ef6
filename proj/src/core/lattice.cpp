#include "crystalgym/core/lattice.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "crystalgym/core/errors.hpp"

namespace crystalgym {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

namespace {

double cos_deg(double deg) {
  // Exact zero for right angles so cubic cells have exactly orthogonal vectors.
  if (deg == 90.0) return 0.0;
  return std::cos(deg * std::numbers::pi / 180.0);
}

double sin_deg(double deg) {
  if (deg == 90.0) return 1.0;
  return std::sin(deg * std::numbers::pi / 180.0);
}

}  // namespace

Lattice::Lattice(const LatticeParameters& p) : params_(p) {
  if (!(p.a > 0.0) || !(p.b > 0.0) || !(p.c > 0.0)) {
    throw ValidationError("lattice lengths must be positive (a=" + std::to_string(p.a) +
                          ", b=" + std::to_string(p.b) + ", c=" + std::to_string(p.c) + ")");
  }
  for (double angle : {p.alpha, p.beta, p.gamma}) {
    if (!(angle > 0.0 && angle < 180.0)) {
      throw ValidationError("lattice angle out of (0, 180): " + std::to_string(angle));
    }
  }
  const double ca = cos_deg(p.alpha), cb = cos_deg(p.beta), cg = cos_deg(p.gamma);
  const double sg = sin_deg(p.gamma);
  const double cx = p.c * cb;
  const double cy = p.c * (ca - cb * cg) / sg;
  const double cz2 = p.c * p.c - cx * cx - cy * cy;
  if (!(cz2 > 0.0)) throw ValidationError("lattice angles do not span a positive volume");
  vectors_ = {Vec3{p.a, 0.0, 0.0}, Vec3{p.b * cg, p.b * sg, 0.0}, Vec3{cx, cy, std::sqrt(cz2)}};
  if (!(volume() > 0.0)) throw ValidationError("lattice volume must be positive");
}

double Lattice::volume() const noexcept {
  return std::abs(dot(vectors_[0], cross(vectors_[1], vectors_[2])));
}

double Lattice::plane_spacing(int i) const {
  const auto& u = vectors_.at(static_cast<std::size_t>((i + 1) % 3));
  const auto& w = vectors_.at(static_cast<std::size_t>((i + 2) % 3));
  return volume() / norm(cross(u, w));
}

Vec3 Lattice::to_cartesian(const Vec3& f) const noexcept {
  return f[0] * vectors_[0] + f[1] * vectors_[1] + f[2] * vectors_[2];
}

Lattice Lattice::scaled(double s) const {
  LatticeParameters p = params_;
  p.a *= s;
  p.b *= s;
  p.c *= s;
  return Lattice(p);
}

}  // namespace crystalgym
