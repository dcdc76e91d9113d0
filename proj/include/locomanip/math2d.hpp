#pragma once

#include <cmath>

namespace locomanip {

struct Vec2 {
  double x = 0.0;
  double z = 0.0;

  Vec2() = default;
  Vec2(double x_, double z_) : x(x_), z(z_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, z + o.z}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, z - o.z}; }
  Vec2 operator-() const { return {-x, -z}; }
  Vec2 operator*(double s) const { return {x * s, z * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    z += o.z;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    z -= o.z;
    return *this;
  }
  Vec2& operator*=(double s) {
    x *= s;
    z *= s;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + z * o.z; }
  double norm() const { return std::sqrt(x * x + z * z); }
  double norm2() const { return x * x + z * z; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.z}; }

// Scalar cross product in the x-z plane (positive = counter-clockwise).
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.z - a.z * b.x; }

// Rotate v by +90 degrees; d/dt R(th) p = thdot * perp(R(th) p).
inline Vec2 perp(const Vec2& v) { return {-v.z, v.x}; }

inline Vec2 rotate(double th, const Vec2& v) {
  const double c = std::cos(th), s = std::sin(th);
  return {c * v.x - s * v.z, s * v.x + c * v.z};
}

inline Vec2 rotate_inv(double th, const Vec2& v) {
  const double c = std::cos(th), s = std::sin(th);
  return {c * v.x + s * v.z, -s * v.x + c * v.z};
}

// Wrap to (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a + M_PI, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - M_PI;
}

inline double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

inline double sqr(double v) { return v * v; }

}  // namespace locomanip
