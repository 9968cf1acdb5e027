#pragma once

// Constant-obstacle problem on a convex planar domain:
//   minimize  int |grad H|^2 + |H|^2   subject to  H >= m,  H = 1 on the boundary,
// equivalently  min(H - m, -Delta H + H) = 0.  Node-centered grid, Shortley-Weller
// treatment of the curved boundary, projected SOR.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "renergy/parallel.hpp"
#include "renergy/types.hpp"

namespace renergy {

enum class Shape { UnitDisk, Ellipse, ConvexPolygon };

inline const char* to_string(Shape s) {
  switch (s) {
    case Shape::UnitDisk: return "disk";
    case Shape::Ellipse: return "ellipse";
    case Shape::ConvexPolygon: return "polygon";
  }
  return "?";
}

class Domain {
 public:
  static Domain unit_disk() { return Domain(Shape::UnitDisk, 1.0, 1.0, {}); }

  static Domain ellipse(double ax, double ay) {
    if (!(ax > 0.0) || !(ay > 0.0) || !std::isfinite(ax) || !std::isfinite(ay)) {
      throw Error(ErrorKind::InvalidGrid, "ellipse semi-axes must be positive");
    }
    return Domain(Shape::Ellipse, ax, ay, {});
  }

  /// Vertices in either orientation; stored counter-clockwise.
  static Domain polygon(std::vector<Vec2> v) {
    if (v.size() < 3) throw Error(ErrorKind::InvalidGrid, "polygon needs at least 3 vertices");
    double area2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) area2 += cross(v[i], v[(i + 1) % v.size()]);
    if (!(std::abs(area2) > 0.0)) throw Error(ErrorKind::InvalidGrid, "degenerate polygon");
    if (area2 < 0.0) std::reverse(v.begin(), v.end());
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 e1 = v[(i + 1) % n] - v[i];
      const Vec2 e2 = v[(i + 2) % n] - v[(i + 1) % n];
      if (!(cross(e1, e2) > 1e-14 * norm(e1) * norm(e2))) {
        throw Error(ErrorKind::InvalidGrid, "polygon is not strictly convex");
      }
    }
    // A strictly convex turn at every vertex still allows a star; the turning must total 2 pi.
    double turning = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 e1 = v[(i + 1) % n] - v[i];
      const Vec2 e2 = v[(i + 2) % n] - v[(i + 1) % n];
      turning += std::atan2(cross(e1, e2), dot(e1, e2));
    }
    if (std::abs(turning - two_pi) > 1e-9) throw Error(ErrorKind::InvalidGrid, "polygon is self-intersecting");
    return Domain(Shape::ConvexPolygon, 1.0, 1.0, std::move(v));
  }

  Shape shape() const { return shape_; }
  double ax() const { return ax_; }
  double ay() const { return ay_; }
  const std::vector<Vec2>& vertices() const { return vertices_; }

  double area() const {
    if (shape_ != Shape::ConvexPolygon) return pi * ax_ * ay_;
    double a = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) a += cross(vertices_[i], vertices_[(i + 1) % vertices_.size()]);
    return 0.5 * a;
  }

  std::pair<Vec2, Vec2> bounding_box() const {
    if (shape_ != Shape::ConvexPolygon) return {{-ax_, -ay_}, {ax_, ay_}};
    Vec2 lo = vertices_.front(), hi = vertices_.front();
    for (const auto& p : vertices_) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    return {lo, hi};
  }

  /// Strict interior test.
  bool inside(Vec2 p) const {
    if (shape_ != Shape::ConvexPolygon) return (p.x * p.x) / (ax_ * ax_) + (p.y * p.y) / (ay_ * ay_) < 1.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (!(cross(vertices_[(i + 1) % n] - vertices_[i], p - vertices_[i]) > 0.0)) return false;
    }
    return true;
  }

  /// Distance from an interior point along the unit direction d to the boundary.
  double ray_exit(Vec2 p, Vec2 d) const {
    if (shape_ != Shape::ConvexPolygon) {
      const double ia = 1.0 / (ax_ * ax_), ib = 1.0 / (ay_ * ay_);
      const double a = d.x * d.x * ia + d.y * d.y * ib;
      const double b = 2.0 * (p.x * d.x * ia + p.y * d.y * ib);
      const double c = p.x * p.x * ia + p.y * p.y * ib - 1.0;
      const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
      // c < 0 for interior points; this form avoids cancellation.
      return b >= 0.0 ? -2.0 * c / (b + disc) : (disc - b) / (2.0 * a);
    }
    double t = std::numeric_limits<double>::infinity();
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 e = vertices_[(i + 1) % n] - vertices_[i];
      const Vec2 normal{e.y, -e.x};  // outward for counter-clockwise order
      const double rate = dot(normal, d);
      if (rate > 0.0) t = std::min(t, dot(normal, vertices_[i] - p) / rate);
    }
    return t;
  }

 private:
  Domain(Shape s, double ax, double ay, std::vector<Vec2> v) : shape_(s), ax_(ax), ay_(ay), vertices_(std::move(v)) {}

  Shape shape_;
  double ax_;
  double ay_;
  std::vector<Vec2> vertices_;
};

enum class NodeKind : std::uint8_t { Exterior, Interior, NearBoundary };

/// Discrete operator row of -Delta_h + 1 at one unknown. Arms are ordered
/// +x, -x, +y, -y; an arm cut by the boundary has nb = -1 and length theta h.
struct Stencil {
  std::array<int, 4> nb{};
  std::array<double, 4> coef{};
  std::array<double, 4> arm{};
  double diag = 0.0;
  double boundary_coef = 0.0;  // sum of coefficients of cut arms
};

class DomainGrid {
 public:
  DomainGrid(Domain domain, double h) : domain_(std::move(domain)), h_(h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::InvalidGrid, "grid spacing must be positive");
    const auto [lo, hi] = domain_.bounding_box();
    center_ = 0.5 * (lo + hi);
    half_x_ = static_cast<int>(std::ceil(0.5 * (hi.x - lo.x) / h)) + 1;
    half_y_ = static_cast<int>(std::ceil(0.5 * (hi.y - lo.y) / h)) + 1;
    if (double(2 * half_x_ + 1) * double(2 * half_y_ + 1) > 5e7) {
      throw Error(ErrorKind::InvalidGrid, "grid too fine for the domain");
    }
    nx_ = 2 * half_x_ + 1;
    ny_ = 2 * half_y_ + 1;
    index_.assign(static_cast<std::size_t>(nx_) * ny_, -1);
    kind_.assign(index_.size(), NodeKind::Exterior);
    for (int j = 0; j < ny_; ++j) {
      for (int i = 0; i < nx_; ++i) {
        if (domain_.inside(node_position(i, j))) {
          index_[flat(i, j)] = static_cast<int>(nodes_.size());
          nodes_.push_back({i, j});
        }
      }
    }
    if (nodes_.empty()) throw Error(ErrorKind::InvalidGrid, "grid has no interior node");
    constexpr std::array<int, 4> di{1, -1, 0, 0};
    constexpr std::array<int, 4> dj{0, 0, 1, -1};
    stencils_.resize(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const auto [i, j] = nodes_[k];
      const Vec2 p = node_position(i, j);
      Stencil& s = stencils_[k];
      bool cut = false;
      for (int a = 0; a < 4; ++a) {
        const int ni = i + di[a], nj = j + dj[a];
        const int nb = index_[flat(ni, nj)];
        if (nb >= 0) {
          s.nb[a] = nb;
          s.arm[a] = h_;
        } else {
          s.nb[a] = -1;
          const double t = domain_.ray_exit(p, {double(di[a]), double(dj[a])});
          s.arm[a] = std::clamp(t, 1e-6 * h_, h_);
          cut = true;
        }
      }
      for (int a = 0; a < 4; a += 2) {
        const double hr = s.arm[a], hl = s.arm[a + 1];
        s.coef[a] = 2.0 / (hr * (hr + hl));
        s.coef[a + 1] = 2.0 / (hl * (hr + hl));
      }
      s.diag = 1.0;
      for (int a = 0; a < 4; ++a) {
        s.diag += s.coef[a];
        if (s.nb[a] < 0) s.boundary_coef += s.coef[a];
      }
      kind_[flat(i, j)] = cut ? NodeKind::NearBoundary : NodeKind::Interior;
    }
  }

  const Domain& domain() const { return domain_; }
  double h() const { return h_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t unknowns() const { return nodes_.size(); }

  Vec2 node_position(int i, int j) const {
    return {center_.x + (i - half_x_) * h_, center_.y + (j - half_y_) * h_};
  }
  Vec2 position(std::size_t k) const { return node_position(nodes_[k].first, nodes_[k].second); }
  std::pair<int, int> node(std::size_t k) const { return nodes_[k]; }
  int unknown_index(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return -1;
    return index_[flat(i, j)];
  }
  NodeKind kind(int i, int j) const { return kind_[flat(i, j)]; }
  const Stencil& stencil(std::size_t k) const { return stencils_[k]; }

  /// Diagonal of a row with four full arms; residuals are reported in these units.
  double regular_diag() const { return 4.0 / (h_ * h_) + 1.0; }

  /// (-Delta_h v + v) at unknown k, scaled by regular_diag / diag (identity away
  /// from the boundary), with boundary data `boundary_value`.
  double scaled_residual(std::span<const double> v, double boundary_value, std::size_t k) const {
    const Stencil& s = stencils_[k];
    double r = s.diag * v[k] - s.boundary_coef * boundary_value;
    for (int a = 0; a < 4; ++a) {
      if (s.nb[a] >= 0) r -= s.coef[a] * v[static_cast<std::size_t>(s.nb[a])];
    }
    return r * regular_diag() / s.diag;
  }

 private:
  std::size_t flat(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

  Domain domain_;
  double h_;
  Vec2 center_;
  int half_x_ = 0;
  int half_y_ = 0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<int> index_;
  std::vector<NodeKind> kind_;
  std::vector<std::pair<int, int>> nodes_;
  std::vector<Stencil> stencils_;
};

using GridPtr = std::shared_ptr<const DomainGrid>;

inline GridPtr make_grid(Domain domain, double h) { return std::make_shared<const DomainGrid>(std::move(domain), h); }

/// Values at the unknowns of a grid together with their boundary data.
struct GridFunction {
  GridPtr grid;
  std::vector<double> values;
  double boundary_value = 1.0;
};

struct SolverControl {
  double tol = 1e-7;
  int max_sweeps = 200000;

  void validate() const {
    if (!(tol > 0.0) || max_sweeps < 1) throw Error(ErrorKind::InvalidArgument, "solver tolerance must be positive");
  }
};

struct H0Solution {
  GridPtr grid;
  std::vector<double> values;
  double hbar0 = 0.0;  // min h0
  Vec2 x0;             // argmin node
  double residual = 0.0;
  int iters = 0;
};

struct ObstacleField {
  GridPtr grid;
  double m = 0.0;
  std::vector<double> values;
  std::vector<std::uint8_t> active;
  double residual = 0.0;
  int iters = 0;
  double tol = 0.0;

  std::size_t active_count() const { return static_cast<std::size_t>(std::count(active.begin(), active.end(), 1)); }
};

namespace detail {

inline double relaxation_factor(const DomainGrid& g) {
  // Over-relaxation tuned to the slowest mode, with the first Dirichlet
  // eigenvalue estimated by the disk of equal area (a lower bound).
  const double lambda = pi * 5.783185962946784 / g.domain().area() + 1.0;
  return 2.0 / (1.0 + g.h() * std::sqrt(0.5 * lambda));
}

inline double natural_residual(const DomainGrid& g, std::span<const double> v, double floor) {
  double res = 0.0;
  for (std::size_t k = 0; k < g.unknowns(); ++k) {
    const double r = g.scaled_residual(v, 1.0, k);
    res = std::max(res, std::abs(std::min(v[k] - floor, r)));
  }
  return res;
}

// Projected SOR in lexicographic order; floor = -inf gives the unconstrained solve.
inline int relax(const DomainGrid& g, std::vector<double>& v, double floor, const SolverControl& ctl, double& residual) {
  const double omega = relaxation_factor(g);
  const std::size_t n = g.unknowns();
  for (int sweep = 1; sweep <= ctl.max_sweeps; ++sweep) {
    for (std::size_t k = 0; k < n; ++k) {
      const Stencil& s = g.stencil(k);
      double sum = s.boundary_coef;
      for (int a = 0; a < 4; ++a) {
        if (s.nb[a] >= 0) sum += s.coef[a] * v[static_cast<std::size_t>(s.nb[a])];
      }
      const double x = v[k] + omega * (sum / s.diag - v[k]);
      v[k] = x < floor ? floor : x;
    }
    if (sweep % 10 == 0) {
      residual = natural_residual(g, v, floor);
      if (residual < ctl.tol) return sweep;
    }
  }
  residual = natural_residual(g, v, floor);
  if (residual < ctl.tol) return ctl.max_sweeps;
  std::ostringstream msg;
  msg << "relaxation did not reach tolerance " << ctl.tol << " within " << ctl.max_sweeps
      << " sweeps (residual " << residual << ", " << n << " unknowns, h = " << g.h() << ")";
  throw Error(ErrorKind::NoConvergence, msg.str());
}

}  // namespace detail

/// -Delta h0 + h0 = 0 in the domain, h0 = 1 on its boundary.
inline H0Solution solve_h0(GridPtr grid, const SolverControl& ctl = {}) {
  ctl.validate();
  H0Solution out;
  out.grid = grid;
  out.values.assign(grid->unknowns(), 1.0);
  out.iters = detail::relax(*grid, out.values, -std::numeric_limits<double>::infinity(), ctl, out.residual);
  const auto it = std::min_element(out.values.begin(), out.values.end());
  out.hbar0 = *it;
  out.x0 = grid->position(static_cast<std::size_t>(it - out.values.begin()));
  return out;
}

/// H_m by projected relaxation. A warm start (e.g. h0) must lie on the same grid.
inline ObstacleField solve_obstacle(GridPtr grid, double m, const SolverControl& ctl = {},
                                    const std::vector<double>* start = nullptr) {
  ctl.validate();
  if (!std::isfinite(m) || m > 1.0) throw Error(ErrorKind::InvalidArgument, "obstacle level must satisfy m <= 1");
  ObstacleField f;
  f.grid = grid;
  f.m = m;
  f.tol = ctl.tol;
  if (start) {
    if (start->size() != grid->unknowns()) throw Error(ErrorKind::GridMismatch, "warm start on a different grid");
    f.values = *start;
    for (auto& x : f.values) x = std::max(x, m);
  } else {
    f.values.assign(grid->unknowns(), 1.0);
  }
  f.iters = detail::relax(*grid, f.values, m, ctl, f.residual);
  f.active.resize(f.values.size());
  for (std::size_t k = 0; k < f.values.size(); ++k) f.active[k] = f.values[k] - m <= 10.0 * ctl.tol ? 1 : 0;
  return f;
}

// ---------------------------------------------------------------------------
// Measurements

struct CoincidenceMetrics {
  bool empty = true;
  std::size_t cells = 0;
  double area = 0.0;
  Vec2 centroid;
  double major = 0.0;  // semi-axis lengths of the moment-equivalent ellipse
  double minor = 0.0;
  double axis_ratio = 0.0;
  double angle = 0.0;  // major axis direction
};

inline CoincidenceMetrics coincidence_metrics(const ObstacleField& f) {
  CoincidenceMetrics out;
  const DomainGrid& g = *f.grid;
  double sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < f.active.size(); ++k) {
    if (!f.active[k]) continue;
    const Vec2 p = g.position(k);
    sx += p.x;
    sy += p.y;
    ++out.cells;
  }
  if (out.cells == 0) return out;
  out.empty = false;
  const double n = static_cast<double>(out.cells);
  const double h = g.h();
  out.area = n * h * h;
  out.centroid = {sx / n, sy / n};
  double cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (std::size_t k = 0; k < f.active.size(); ++k) {
    if (!f.active[k]) continue;
    const Vec2 d = g.position(k) - out.centroid;
    cxx += d.x * d.x;
    cyy += d.y * d.y;
    cxy += d.x * d.y;
  }
  // Each node stands for an h x h cell, whose own second moment is h^2/12.
  cxx = cxx / n + h * h / 12.0;
  cyy = cyy / n + h * h / 12.0;
  cxy /= n;
  const double mean = 0.5 * (cxx + cyy);
  const double dev = std::hypot(0.5 * (cxx - cyy), cxy);
  out.major = 2.0 * std::sqrt(std::max(0.0, mean + dev));
  out.minor = 2.0 * std::sqrt(std::max(0.0, mean - dev));
  out.axis_ratio = out.minor > 0.0 ? out.major / out.minor : std::numeric_limits<double>::infinity();
  out.angle = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
  return out;
}

/// Sup norm of the discrete gradient (three-point differences, using the
/// boundary value on cut arms).
inline double gradient_sup(const GridFunction& f) {
  const DomainGrid& g = *f.grid;
  double best = 0.0;
  for (std::size_t k = 0; k < g.unknowns(); ++k) {
    const Stencil& s = g.stencil(k);
    auto val = [&](int a) { return s.nb[a] >= 0 ? f.values[static_cast<std::size_t>(s.nb[a])] : f.boundary_value; };
    const double c = f.values[k];
    std::array<double, 2> d{};
    for (int axis = 0; axis < 2; ++axis) {
      const int ar = 2 * axis, al = 2 * axis + 1;
      const double hr = s.arm[ar], hl = s.arm[al];
      d[axis] = (hl * hl * (val(ar) - c) + hr * hr * (c - val(al))) / (hl * hr * (hl + hr));
    }
    best = std::max(best, std::hypot(d[0], d[1]));
  }
  return best;
}

inline GridFunction as_grid_function(const ObstacleField& f) { return {f.grid, f.values, 1.0}; }
inline GridFunction as_grid_function(const H0Solution& s) { return {s.grid, s.values, 1.0}; }

// ---------------------------------------------------------------------------
// Verification suite

struct GradientBoundRow {
  double m = 0.0;
  double grad_sup = 0.0;
  double ratio = 0.0;          // grad_sup / sqrt(1 - m)
  double area_deficit = 0.0;   // |Omega| - |omega_m|
  double deficit_ratio = 0.0;  // area_deficit / sqrt(1 - m)
};

struct GradientBoundReport {
  std::vector<GradientBoundRow> rows;
  double ratio_spread = 0.0;    // max/min - 1 over rows with m < 1
  double deficit_spread = 0.0;
  bool bounded = false;         // ratio_spread < 0.5
  bool deficit_bounded = false; // deficit_spread < 0.5
};

inline GradientBoundReport verify_gradient_bound(std::span<const ObstacleField> fields) {
  GradientBoundReport rep;
  double rlo = std::numeric_limits<double>::infinity(), rhi = 0.0;
  double dlo = rlo, dhi = 0.0;
  for (const auto& f : fields) {
    GradientBoundRow row;
    row.m = f.m;
    row.grad_sup = gradient_sup(as_grid_function(f));
    row.area_deficit = f.grid->domain().area() - coincidence_metrics(f).area;
    if (f.m < 1.0) {
      const double s = std::sqrt(1.0 - f.m);
      row.ratio = row.grad_sup / s;
      row.deficit_ratio = row.area_deficit / s;
      rlo = std::min(rlo, row.ratio);
      rhi = std::max(rhi, row.ratio);
      dlo = std::min(dlo, row.deficit_ratio);
      dhi = std::max(dhi, row.deficit_ratio);
    } else {
      row.ratio = row.deficit_ratio = std::numeric_limits<double>::quiet_NaN();
    }
    rep.rows.push_back(row);
  }
  if (rhi > 0.0) {
    rep.ratio_spread = rhi / rlo - 1.0;
    rep.deficit_spread = dhi / dlo - 1.0;
    rep.bounded = rep.ratio_spread < 0.5;
    rep.deficit_bounded = rep.deficit_spread < 0.5;
  }
  return rep;
}

enum class ScaleStatus { Ok, EmptySet, UnderResolved };

inline const char* to_string(ScaleStatus s) {
  switch (s) {
    case ScaleStatus::Ok: return "ok";
    case ScaleStatus::EmptySet: return "empty";
    case ScaleStatus::UnderResolved: return "under-resolved";
  }
  return "?";
}

struct ScaleLawRow {
  double m = 0.0;
  double offset = 0.0;  // m - hbar0
  ScaleStatus status = ScaleStatus::EmptySet;
  std::size_t cells = 0;
  double area = 0.0;
  double length = 0.0;      // L_m = sqrt(area)
  double prediction = 0.0;  // 2 pi (m - hbar0) / hbar0
  double ratio = 0.0;       // L^2 |log L| / prediction
  double axis_ratio = 0.0;
  bool in_band = false;
};

struct AsymptoticsReport {
  double hbar0 = 0.0;
  std::vector<ScaleLawRow> rows;
  double band_low = 0.5;
  double band_high = 2.0;
  bool all_in_band = false;
  bool trend_toward_one = false;  // |ratio - 1| non-increasing as m decreases to hbar0
  double max_axis_ratio = 0.0;
};

inline constexpr std::size_t min_resolved_cells = 30;

inline AsymptoticsReport verify_scale_law(std::span<const ObstacleField> fields, double hbar0,
                                          double band_low = 0.5, double band_high = 2.0) {
  AsymptoticsReport rep;
  rep.hbar0 = hbar0;
  rep.band_low = band_low;
  rep.band_high = band_high;
  for (const auto& f : fields) {
    ScaleLawRow row;
    row.m = f.m;
    row.offset = f.m - hbar0;
    const CoincidenceMetrics cm = coincidence_metrics(f);
    row.cells = cm.cells;
    if (row.offset <= 0.0 || cm.empty) {
      row.status = ScaleStatus::EmptySet;
    } else if (cm.cells < min_resolved_cells) {
      row.status = ScaleStatus::UnderResolved;
    } else {
      row.status = ScaleStatus::Ok;
      row.area = cm.area;
      row.length = std::sqrt(cm.area);
      row.prediction = two_pi * row.offset / hbar0;
      row.ratio = row.length * row.length * std::abs(std::log(row.length)) / row.prediction;
      row.axis_ratio = cm.axis_ratio;
      row.in_band = row.ratio >= band_low && row.ratio <= band_high;
    }
    rep.rows.push_back(row);
  }
  std::vector<const ScaleLawRow*> ok;
  for (const auto& r : rep.rows) {
    if (r.status == ScaleStatus::Ok) ok.push_back(&r);
  }
  if (ok.empty()) throw Error(ErrorKind::UnderResolved, "no coincidence set in the m-grid is resolved");
  std::sort(ok.begin(), ok.end(), [](const ScaleLawRow* a, const ScaleLawRow* b) { return a->offset > b->offset; });
  rep.all_in_band = std::all_of(ok.begin(), ok.end(), [](const ScaleLawRow* r) { return r->in_band; });
  rep.trend_toward_one = true;
  for (std::size_t i = 1; i < ok.size(); ++i) {
    if (std::abs(ok[i]->ratio - 1.0) > std::abs(ok[i - 1]->ratio - 1.0) + 1e-12) rep.trend_toward_one = false;
  }
  for (const auto* r : ok) rep.max_axis_ratio = std::max(rep.max_axis_ratio, r->axis_ratio);
  return rep;
}

/// Radial potential of an isotropic quadratic form: Delta U = (laplacian_q / 2)
/// outside the disk E of area 1 (radius r0 = 1/sqrt(pi)), U = 0 on E, C^1 across.
inline double ellipse_potential(double r, double laplacian_q) {
  const double r0 = 1.0 / std::sqrt(pi);
  if (r <= r0) return 0.0;
  return laplacian_q / 8.0 * (r * r - r0 * r0) - laplacian_q / 4.0 * r0 * r0 * std::log(r / r0);
}

struct EllipseReport {
  double length = 0.0;      // L_m
  Vec2 center;              // x0
  double axis_ratio = 0.0;
  double delta = 0.0;
  std::size_t missing_inner = 0;  // nodes with d(y, E^c) > delta not in omega_m
  std::size_t stray_outer = 0;    // nodes of omega_m with d(y, E) >= delta
  double max_outside = 0.0;       // sup over omega_m of (|y| - r0)+
  double max_hole = 0.0;          // sup over the complement inside E of (r0 - |y|)+
  bool inclusions_hold = false;
  bool round = false;             // axis_ratio <= 1.2
};

/// Compares (omega_m - x0) / L_m with the area-1 disk (isotropic Hessian at x0).
inline EllipseReport verify_ellipse_limit(const ObstacleField& f, Vec2 x0, double delta = 0.25) {
  const CoincidenceMetrics cm = coincidence_metrics(f);
  if (cm.cells < min_resolved_cells) throw Error(ErrorKind::UnderResolved, "coincidence set too small to compare");
  EllipseReport rep;
  rep.length = std::sqrt(cm.area);
  rep.center = x0;
  rep.axis_ratio = cm.axis_ratio;
  rep.delta = delta;
  const double r0 = 1.0 / std::sqrt(pi);
  const DomainGrid& g = *f.grid;
  for (std::size_t k = 0; k < g.unknowns(); ++k) {
    const double r = norm(g.position(k) - x0) / rep.length;
    if (f.active[k]) {
      rep.max_outside = std::max(rep.max_outside, r - r0);
      if (r - r0 >= delta) ++rep.stray_outer;
    } else {
      rep.max_hole = std::max(rep.max_hole, r0 - r);
      if (r0 - r > delta) ++rep.missing_inner;
    }
  }
  rep.inclusions_hold = rep.missing_inner == 0 && rep.stray_outer == 0;
  rep.round = rep.axis_ratio <= 1.2;
  return rep;
}

enum class BarrierKind { Interior, Exterior };

struct BarrierResult {
  bool boundary_ok = false;   // h >= H_m (Interior) or h <= H_m (Exterior) on the boundary
  bool above_obstacle = false;
  bool operator_ok = false;   // -Delta_h h + h >= 0, or <= m 1_{h = m}
  bool hypotheses_hold = false;
  bool conclusion_holds = false;  // h >= H_m, or h <= H_m, cellwise
  double worst_conclusion = 0.0;  // largest violation of the conclusion
};

/// Discrete check of the comparison principle for a candidate barrier. The
/// conclusion is evaluated regardless of the hypotheses.
inline BarrierResult barrier_check(const ObstacleField& f, const GridFunction& candidate, BarrierKind kind,
                                   double tol = -1.0) {
  if (candidate.grid != f.grid && (candidate.grid == nullptr || candidate.values.size() != f.values.size() ||
                                   candidate.grid->h() != f.grid->h())) {
    throw Error(ErrorKind::GridMismatch, "candidate is defined on a different grid");
  }
  if (candidate.values.size() != f.values.size()) throw Error(ErrorKind::GridMismatch, "candidate size mismatch");
  if (tol < 0.0) tol = 10.0 * f.tol;
  const DomainGrid& g = *f.grid;
  const auto& h = candidate.values;
  BarrierResult out;
  const bool interior = kind == BarrierKind::Interior;
  out.boundary_ok = interior ? candidate.boundary_value >= 1.0 - tol : candidate.boundary_value <= 1.0 + tol;
  out.above_obstacle = std::all_of(h.begin(), h.end(), [&](double x) { return x >= f.m - tol; });
  out.operator_ok = true;
  for (std::size_t k = 0; k < g.unknowns(); ++k) {
    const double r = g.scaled_residual(h, candidate.boundary_value, k);
    if (interior) {
      if (r < -tol) out.operator_ok = false;
    } else {
      const double rhs = h[k] - f.m <= tol ? f.m : 0.0;
      if (r > rhs + tol) out.operator_ok = false;
    }
  }
  out.hypotheses_hold = out.boundary_ok && out.above_obstacle && out.operator_ok;
  double worst = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    worst = std::max(worst, interior ? f.values[k] - h[k] : h[k] - f.values[k]);
  }
  out.worst_conclusion = worst;
  out.conclusion_holds = worst <= tol;
  return out;
}

/// Cellwise H_m <= H_m' <= H_m + (m' - m) within tol.
inline bool monotone_pair(const ObstacleField& lo, const ObstacleField& hi, double tol) {
  if (lo.values.size() != hi.values.size()) throw Error(ErrorKind::GridMismatch, "fields on different grids");
  const double dm = hi.m - lo.m;
  for (std::size_t k = 0; k < lo.values.size(); ++k) {
    if (hi.values[k] < lo.values[k] - tol || hi.values[k] > lo.values[k] + dm + tol) return false;
  }
  return true;
}

/// Solves H_m for every level in parallel, warm-started from h0.
inline std::vector<ObstacleField> solve_levels(const H0Solution& h0, std::span<const double> levels,
                                               const SolverControl& ctl = {}) {
  std::vector<ObstacleField> out(levels.size());
  parallel_for(levels.size(), [&](std::size_t i) { out[i] = solve_obstacle(h0.grid, levels[i], ctl, &h0.values); });
  return out;
}

struct LevelSuiteReport {
  double hbar0 = 0.0;
  Vec2 x0;
  double below_level = 0.0;
  bool empty_below = false;         // omega_m empty for m < hbar0, equal to h0 within tol
  bool exterior_barrier_ok = false; // h0 certified as exterior barrier below hbar0
  bool full_at_one = false;         // H_1 == 1, all nodes active
  bool monotone = false;            // H_m <= H_m' <= H_m + (m' - m)
  bool area_monotone = false;       // |omega_m| and m |omega_m| non-decreasing
  bool complementarity = false;     // every residual below tol
  std::vector<double> levels;
  std::vector<double> areas;
  std::vector<double> residuals;

  bool pass() const {
    return empty_below && exterior_barrier_ok && full_at_one && monotone && area_monotone && complementarity;
  }
};

/// Checks the basic structure of the family m -> H_m on an increasing m-grid.
inline LevelSuiteReport level_suite(const H0Solution& h0, std::vector<double> levels, const SolverControl& ctl = {}) {
  LevelSuiteReport rep;
  rep.hbar0 = h0.hbar0;
  rep.x0 = h0.x0;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  rep.levels = levels;
  rep.below_level = h0.hbar0 - 0.05;
  std::vector<double> all = levels;
  all.push_back(rep.below_level);
  all.push_back(1.0);
  const std::vector<ObstacleField> fields = solve_levels(h0, all, ctl);
  const ObstacleField& below = fields[levels.size()];
  const ObstacleField& one = fields[levels.size() + 1];
  const double pad = 4.0 * ctl.tol;

  rep.empty_below = below.active_count() == 0;
  for (std::size_t k = 0; k < below.values.size(); ++k) {
    if (std::abs(below.values[k] - h0.values[k]) > pad) rep.empty_below = false;
  }
  rep.exterior_barrier_ok =
      barrier_check(below, as_grid_function(h0), BarrierKind::Exterior).conclusion_holds;
  rep.full_at_one = one.active_count() == one.values.size() &&
                    std::all_of(one.values.begin(), one.values.end(), [](double x) { return x == 1.0; });
  rep.monotone = true;
  rep.area_monotone = true;
  double prev_area = 0.0, prev_mass = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i > 0 && !monotone_pair(fields[i - 1], fields[i], pad)) rep.monotone = false;
    const double a = coincidence_metrics(fields[i]).area;
    rep.areas.push_back(a);
    if (a < prev_area || fields[i].m * a < prev_mass) rep.area_monotone = false;
    prev_area = a;
    prev_mass = fields[i].m * a;
  }
  rep.complementarity = true;
  for (const auto& f : fields) {
    rep.residuals.push_back(f.residual);
    if (!(f.residual < ctl.tol)) rep.complementarity = false;
  }
  rep.residuals.resize(levels.size());
  return rep;
}

}  // namespace renergy
