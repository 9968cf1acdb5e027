#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "renergy/error.hpp"

namespace renergy {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

using Complex = std::complex<double>;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Basis of a planar lattice Zu + Zv, oriented so that cross(u, v) > 0.
class LatticeBasis {
 public:
  LatticeBasis(Vec2 u, Vec2 v) : u_(u), v_(v) {
    const double c = cross(u, v);
    const double scale = norm(u) * norm(v);
    if (!std::isfinite(c) || scale == 0.0 || std::abs(c) <= 1e-14 * scale) {
      throw Error(ErrorKind::DegenerateBasis, "basis vectors are (nearly) parallel");
    }
    if (c < 0.0) v_ = -v_;
  }

  Vec2 u() const { return u_; }
  Vec2 v() const { return v_; }
  double covolume() const { return cross(u_, v_); }

  Vec2 to_cartesian(Vec2 frac) const { return frac.x * u_ + frac.y * v_; }
  Vec2 to_fractional(Vec2 p) const {
    const double det = covolume();
    return {cross(p, v_) / det, cross(u_, p) / det};
  }

  /// Basis of the dual lattice {q : p.q in Z for all p}.
  LatticeBasis dual() const {
    const double det = covolume();
    return LatticeBasis(Vec2{v_.y / det, -v_.x / det}, Vec2{-u_.y / det, u_.x / det});
  }

  LatticeBasis scaled(double s) const { return LatticeBasis(s * u_, s * v_); }

  /// Lagrange-Gauss reduced basis of the same lattice: |u| <= |v|, |u.v| <= |u|^2/2.
  LatticeBasis reduced() const {
    Vec2 a = u_, b = v_;
    for (int it = 0; it < 10000; ++it) {
      if (dot(b, b) < dot(a, a)) std::swap(a, b);
      const double mu = std::round(dot(a, b) / dot(a, a));
      if (mu == 0.0) break;
      b = b - mu * a;
    }
    return LatticeBasis(a, b);
  }

 private:
  Vec2 u_;
  Vec2 v_;
};

/// Square basis scaled to the requested cell area.
inline LatticeBasis square_basis(double area = two_pi) {
  const double s = std::sqrt(area);
  return LatticeBasis({s, 0.0}, {0.0, s});
}

/// Triangular (hexagonal) basis scaled to the requested cell area.
inline LatticeBasis triangular_basis(double area = two_pi) {
  const double s = std::sqrt(2.0 * area / std::sqrt(3.0));
  return LatticeBasis({s, 0.0}, {0.5 * s, 0.5 * std::sqrt(3.0) * s});
}

/// Truncation policy shared by every series evaluation.
struct SeriesControl {
  int truncation_order = 1;  // minimum number of terms / shells
  double abs_tol = 1e-15;
  int max_terms = 20000;

  void validate() const {
    if (!(abs_tol > 0.0) || truncation_order < 1 || max_terms < truncation_order) {
      throw Error(ErrorKind::InvalidArgument, "SeriesControl requires abs_tol > 0 and 1 <= truncation_order <= max_terms");
    }
  }
};

/// A real result with its a-posteriori error bound and the number of terms used.
struct SeriesValue {
  double value = 0.0;
  double error = 0.0;
  int terms = 0;
};

}  // namespace renergy
