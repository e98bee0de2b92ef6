#pragma once

#include <array>

namespace crystalgym {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);

// Cell lengths in Angstrom and angles in degrees. alpha is the angle between
// l2 and l3, beta between l1 and l3, gamma between l1 and l2.
struct LatticeParameters {
  double a = 0.0, b = 0.0, c = 0.0;
  double alpha = 90.0, beta = 90.0, gamma = 90.0;

  bool operator==(const LatticeParameters&) const = default;
};

class Lattice {
 public:
  // Throws ValidationError when the parameters do not span a positive volume.
  explicit Lattice(const LatticeParameters& parameters);

  const LatticeParameters& parameters() const noexcept { return params_; }
  const std::array<Vec3, 3>& vectors() const noexcept { return vectors_; }
  const Vec3& vector(int i) const { return vectors_.at(static_cast<std::size_t>(i)); }

  double a() const noexcept { return params_.a; }
  double b() const noexcept { return params_.b; }
  double c() const noexcept { return params_.c; }
  double alpha() const noexcept { return params_.alpha; }
  double beta() const noexcept { return params_.beta; }
  double gamma() const noexcept { return params_.gamma; }

  double volume() const noexcept;
  // Perpendicular distance between the lattice planes spanned by the other two vectors.
  double plane_spacing(int i) const;

  Vec3 to_cartesian(const Vec3& fractional) const noexcept;
  Lattice scaled(double linear_factor) const;

  bool operator==(const Lattice& other) const { return params_ == other.params_; }

 private:
  LatticeParameters params_;
  std::array<Vec3, 3> vectors_{};
};

}  // namespace crystalgym
