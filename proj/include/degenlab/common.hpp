#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace degenlab {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSqrt2 = std::numbers::sqrt2;

// Error taxonomy shared by every stage. The CLI maps DomainError and
// ConstructionError to exit code 1 and anything else to 2.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Selects the serial reference path or the OpenMP kernel.
enum class Exec { kSerial, kParallel };

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double a) const { return {a * x, a * y}; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double a, Vec2 v) { return v * a; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;
};

constexpr Vec2 apply(const Sym2& m, Vec2 v) {
  return {m.xx * v.x + m.xy * v.y, m.xy * v.x + m.yy * v.y};
}

/// Element of the order-8 dihedral group acting on the plane, stored as an
/// exact signed permutation: (x, y) -> (sx * first, sy * second) where
/// first/second pick x or y.
struct Dihedral {
  bool swap = false;
  double sx = 1.0;
  double sy = 1.0;

  constexpr Vec2 apply(Vec2 v) const {
    Vec2 w = swap ? Vec2{v.y, v.x} : v;
    return {sx * w.x, sy * w.y};
  }
  // Inverse action (the transpose of the signed permutation).
  constexpr Vec2 apply_inverse(Vec2 v) const {
    Vec2 w{sx * v.x, sy * v.y};
    return swap ? Vec2{w.y, w.x} : w;
  }
  constexpr Sym2 conjugate_inverse(const Sym2& m) const {
    // returns P^T m P where P is this map.
    Sym2 a{m.xx, sx * sy * m.xy, m.yy};
    if (swap) return {a.yy, a.xy, a.xx};
    return a;
  }
};

/// Rotation by -m*pi/2, m in {0,1,2,3}; maps the top arc onto arc m.
constexpr Vec2 rotate_quarter(Vec2 v, int m) {
  switch (m & 3) {
    case 0: return v;
    case 1: return {v.y, -v.x};
    case 2: return {-v.x, -v.y};
    default: return {-v.y, v.x};
  }
}

}  // namespace degenlab
