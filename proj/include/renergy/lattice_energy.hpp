#pragma once

// Renormalized energy W of lattice configurations. W is computed by three
// independent routes:
//   Eta      closed form -1/2 log(sqrt(2 pi b) |eta(tau)|^2),
//   Fourier  regularized dual-lattice series via the Eisenstein closed form,
//            extrapolated to x -> 0,
//   ZetaDiff differences W(L1) - W(L2) as a theta integral (Epstein zeta).
// Densities other than 1 follow from W_m = m (W_1 - log(m) / 4).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "renergy/modular.hpp"
#include "renergy/parallel.hpp"

namespace renergy {

enum class Route { Eta, Fourier, ZetaDiff };

constexpr std::string_view to_string(Route r) {
  switch (r) {
    case Route::Eta: return "eta";
    case Route::Fourier: return "fourier";
    case Route::ZetaDiff: return "zetadiff";
  }
  return "unknown";
}

struct EnergyReport {
  double value = 0.0;
  Route route = Route::Eta;
  SeriesControl truncation;
  double error_estimate = 0.0;
};

/// Applies the density scaling W_m = m (W_1 - log(m) / 4).
inline double scale_to_density(double unit_density_value, double m) {
  return m * (unit_density_value - 0.25 * std::log(m));
}

namespace detail {

inline void require_density(double m) {
  if (!(m > 0.0) || !std::isfinite(m)) throw Error(ErrorKind::NonPositiveParameter, "density m must be > 0");
}

inline Complex frame_tau(Vec2 e1, Vec2 e2) {
  const double l2 = dot(e1, e1);
  return {dot(e1, e2) / l2, cross(e1, e2) / l2};
}

}  // namespace detail

/// Rotation-normalized description of a lattice's dual: the dual is the rotation
/// by `angle` of e1_length * (Z (1, 0) + Z (Re tau, Im tau)), tau in the
/// fundamental domain.
struct DualFrame {
  Complex tau;
  double e1_length = 0.0;
  double cos_angle = 1.0;
  double sin_angle = 0.0;
  double covolume = 0.0;  // of the primal lattice
};

inline DualFrame dual_frame(const LatticeBasis& basis) {
  const LatticeBasis d = basis.dual().reduced();
  Vec2 e1 = d.u();
  Vec2 e2 = d.v();
  Complex t = detail::frame_tau(e1, e2);
  if (t.real() < -0.5 + 1e-12) {
    e2 = e2 + e1;
    t = detail::frame_tau(e1, e2);
  }
  if (std::norm(t) < 1.0 + 1e-12 && t.real() < 0.0) {
    const Vec2 old = e1;
    e1 = e2;
    e2 = -old;
    t = detail::frame_tau(e1, e2);
  }
  const double len = norm(e1);
  return {t, len, e1.x / len, e1.y / len, basis.covolume()};
}

/// Reduces tau into {|Re tau| <= 1/2, |tau| >= 1}; on the boundary the
/// representative with Re tau >= 0 is chosen.
inline Complex reduce_fundamental(Complex tau) {
  detail::require_upper_half_plane(tau);
  for (int it = 0; it < 100000; ++it) {
    tau -= std::floor(tau.real() + 0.5);
    if (std::norm(tau) < 1.0 - 1e-15) {
      tau = -1.0 / tau;
    } else {
      break;
    }
  }
  if (tau.real() < -0.5 + 1e-12) tau += 1.0;
  if (std::norm(tau) < 1.0 + 1e-12 && tau.real() < 0.0) tau = -std::conj(tau);
  return tau;
}

struct TauNormalization {
  Complex tau;
  double scale = 1.0;    // factor bringing the lattice to cell area 2 pi
  double density = 1.0;  // 2 pi / cell area
};

/// Modulus tau of the dual cell e(1, 0), e(a, b) (rotation removed) and the
/// normalization to cell area 2 pi.
inline TauNormalization lattice_to_tau(const LatticeBasis& basis) {
  const DualFrame frame = dual_frame(basis);
  const double area = basis.covolume();
  return {reduce_fundamental(frame.tau), std::sqrt(two_pi / area), two_pi / area};
}

/// Dual basis (2 pi b)^{-1/2} {(1, 0), (a, b)} associated with tau; its primal has area 2 pi.
inline LatticeBasis dual_basis_from_tau(Complex tau) {
  detail::require_upper_half_plane(tau);
  const double c = 1.0 / std::sqrt(two_pi * tau.imag());
  return LatticeBasis({c, 0.0}, {c * tau.real(), c * tau.imag()});
}

/// Lattice of cell area 2 pi / m whose shape is tau.
inline LatticeBasis lattice_from_tau(Complex tau, double m = 1.0) {
  detail::require_density(m);
  return dual_basis_from_tau(tau).dual().scaled(1.0 / std::sqrt(m));
}

/// W at density m from the eta closed form.
inline EnergyReport w_eta(Complex tau, double m = 1.0, const SeriesControl& ctl = {}) {
  detail::require_upper_half_plane(tau);
  detail::require_density(m);
  const SeriesValue le = log_abs_eta(tau, ctl);
  const double unit = -0.5 * (0.5 * std::log(two_pi * tau.imag()) + 2.0 * le.value);
  const double value = scale_to_density(unit, m);
  return {value, Route::Eta, ctl, m * le.error + 4.0 * DBL_EPSILON * std::abs(value)};
}

/// W at density m from the regularized Fourier series, sampled at decreasing
/// radii along direction `angle` and extrapolated to x -> 0. The remainder
/// H(x) + log|x| - 2W is even in x, so extrapolation is in |x|^2.
inline EnergyReport w_fourier(Complex tau, double m, std::span<const double> probe_radii,
                              const SeriesControl& ctl = {}, double angle = 0.0,
                              double stability_tol = 1e-7) {
  detail::require_upper_half_plane(tau);
  detail::require_density(m);
  if (probe_radii.size() < 2) throw Error(ErrorKind::InvalidArgument, "w_fourier needs at least two probe radii");
  for (std::size_t i = 0; i < probe_radii.size(); ++i) {
    if (!(probe_radii[i] > 0.0) || (i > 0 && !(probe_radii[i] < probe_radii[i - 1]))) {
      throw Error(ErrorKind::InvalidArgument, "probe radii must be positive and strictly decreasing");
    }
  }
  const double a = tau.real();
  const double b = tau.imag();
  const double c = std::sqrt(two_pi * b);
  std::vector<double> samples;
  double series_error = 0.0;
  for (double r : probe_radii) {
    const double x1 = r * std::cos(angle);
    const double x2 = r * std::sin(angle);
    const SeriesValue e = eisenstein((a * x1 + b * x2) / c, x1 / c, tau, ctl);
    samples.push_back(0.5 * (e.value / two_pi + std::log(r)));
    series_error = std::max(series_error, e.error / (4.0 * pi));
  }
  std::vector<double> extrapolated;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const double r0 = probe_radii[i] * probe_radii[i];
    const double r1 = probe_radii[i + 1] * probe_radii[i + 1];
    extrapolated.push_back((r0 * samples[i + 1] - r1 * samples[i]) / (r0 - r1));
  }
  const double unit = extrapolated.back();
  double spread = std::abs(unit - samples.back());
  if (extrapolated.size() >= 2) {
    spread = std::abs(unit - extrapolated[extrapolated.size() - 2]);
    if (spread > stability_tol) {
      throw Error(ErrorKind::ExtrapolationUnstable, "successive x -> 0 extrapolants disagree beyond tolerance");
    }
  }
  return {scale_to_density(unit, m), Route::Fourier, ctl, m * (spread + 2.0 * series_error)};
}

/// Default probe radii for w_fourier.
inline constexpr std::array<double, 3> default_probe_radii{1e-2, 5e-3, 2.5e-3};

/// W(L1) - W(L2) at density m via the theta integral of the dual lattices.
inline SeriesValue w_zeta_diff(Complex tau1, Complex tau2, double m = 1.0, const SeriesControl& ctl = {}) {
  detail::require_density(m);
  const SeriesValue d = zeta_difference_limit(dual_basis_from_tau(tau1), dual_basis_from_tau(tau2), ctl);
  return {m * d.value, m * d.error, d.terms};
}

inline EnergyReport w_zeta_diff_report(Complex tau1, Complex tau2, double m = 1.0, const SeriesControl& ctl = {}) {
  const SeriesValue d = w_zeta_diff(tau1, tau2, m, ctl);
  return {d.value, Route::ZetaDiff, ctl, d.error};
}

// ---------------------------------------------------------------------------
// Moduli scan

struct ModuliGrid {
  double a_min = -0.5;
  double a_max = 0.5;
  double b_min = 0.5 * std::sqrt(3.0);
  double b_max = 2.0;
  int resolution = 200;

  void validate() const {
    const bool finite = std::isfinite(a_min) && std::isfinite(a_max) && std::isfinite(b_min) && std::isfinite(b_max);
    if (!finite || a_min < -0.5 - 1e-12 || a_max > 0.5 + 1e-12 || a_min > a_max) {
      throw Error(ErrorKind::InvalidGrid, "a-range must satisfy -1/2 <= a_min <= a_max <= 1/2");
    }
    if (b_min < 0.5 * std::sqrt(3.0) - 1e-9 || b_min > b_max) {
      throw Error(ErrorKind::InvalidGrid, "b-range must satisfy sqrt(3)/2 <= b_min <= b_max");
    }
    if (resolution < 1 || resolution > 20000) throw Error(ErrorKind::InvalidGrid, "resolution must be in [1, 20000]");
    if (resolution == 1 && a_min * a_min + b_min * b_min < 1.0 - 1e-12) {
      throw Error(ErrorKind::InvalidGrid, "single grid point lies outside the fundamental domain");
    }
  }
};

struct ScanPoint {
  double a = 0.0;
  double b = 0.0;
  double w = 0.0;
};

struct ScanReport {
  ModuliGrid grid;
  double density = 1.0;
  std::vector<ScanPoint> points;  // column-major in a, increasing b
  ScanPoint argmin;
  Complex refined_tau;
  double refined_value = 0.0;
  int refine_steps = 0;
};

/// Grid nodes of a scan: rectangle nodes inside the fundamental domain plus,
/// per column, the point on the arc |tau| = 1.
inline std::vector<ScanPoint> moduli_grid_points(const ModuliGrid& grid) {
  grid.validate();
  const int n = grid.resolution;
  std::vector<ScanPoint> pts;
  if (n == 1) {
    pts.push_back({grid.a_min, grid.b_min, 0.0});
    return pts;
  }
  for (int i = 0; i < n; ++i) {
    const double a = grid.a_min + (grid.a_max - grid.a_min) * i / (n - 1);
    const double arc = std::sqrt(std::max(0.0, 1.0 - a * a));
    bool arc_pending = arc >= grid.b_min - 1e-12 && arc <= grid.b_max;
    for (int j = 0; j < n; ++j) {
      const double b = grid.b_min + (grid.b_max - grid.b_min) * j / (n - 1);
      if (arc_pending && std::abs(b - arc) <= 1e-12) arc_pending = false;
      if (arc_pending && arc < b) {
        pts.push_back({a, std::max(arc, grid.b_min), 0.0});
        arc_pending = false;
      }
      if (a * a + b * b >= 1.0 - 1e-12) pts.push_back({a, b, 0.0});
    }
    if (arc_pending) pts.push_back({a, arc, 0.0});
  }
  return pts;
}

namespace detail {

inline bool scan_less(const ScanPoint& x, const ScanPoint& y) {
  if (x.w != y.w) return x.w < y.w;
  if (x.a != y.a) return x.a < y.a;
  return x.b < y.b;
}

// Central-difference gradient descent with backtracking on tau -> W(tau).
inline int refine_minimum(Complex& tau, double& value, double m, const SeriesControl& ctl) {
  auto f = [&](Complex t) { return w_eta(t, m, ctl).value; };
  const double h = 1e-5;
  int steps = 0;
  value = f(tau);
  for (; steps < 100; ++steps) {
    const double ga = (f(tau + Complex(h, 0)) - f(tau - Complex(h, 0))) / (2 * h);
    const double gb = (f(tau + Complex(0, h)) - f(tau - Complex(0, h))) / (2 * h);
    const double g2 = ga * ga + gb * gb;
    if (std::sqrt(g2) < 1e-9) break;
    double t = 1.0;
    bool moved = false;
    while (t > 1e-12) {
      const Complex trial = tau - t * Complex(ga, gb);
      if (trial.imag() > 0.0) {
        const double ft = f(trial);
        if (ft < value - 1e-4 * t * g2) {
          tau = reduce_fundamental(trial);
          value = f(tau);
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return steps;
}

}  // namespace detail

/// Evaluates W on the grid (in parallel), takes the lexicographic (W, a, b)
/// argmin and refines it by gradient descent.
inline ScanReport moduli_scan(const ModuliGrid& grid, double m = 1.0, const SeriesControl& ctl = {}) {
  detail::require_density(m);
  ScanReport report;
  report.grid = grid;
  report.density = m;
  report.points = moduli_grid_points(grid);
  parallel_for(report.points.size(), [&](std::size_t k) {
    auto& p = report.points[k];
    p.w = w_eta(Complex(p.a, p.b), m, ctl).value;
  });
  report.argmin = *std::min_element(report.points.begin(), report.points.end(), detail::scan_less);
  // Boundary points identified by the modular group are one lattice; report the canonical one.
  const Complex canonical = reduce_fundamental(Complex(report.argmin.a, report.argmin.b));
  if (canonical != Complex(report.argmin.a, report.argmin.b)) {
    report.argmin = {canonical.real(), canonical.imag(), w_eta(canonical, m, ctl).value};
  }
  report.refined_tau = Complex(report.argmin.a, report.argmin.b);
  if (grid.resolution > 1) {
    report.refine_steps = detail::refine_minimum(report.refined_tau, report.refined_value, m, ctl);
  } else {
    report.refined_value = report.argmin.w;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Theta minimality

enum class ThetaVerdict { Above, Tie, Violation };

struct ThetaProbeRow {
  double alpha = 0.0;
  Complex tau;
  double theta_sample = 0.0;
  double theta_triangular = 0.0;
  double difference = 0.0;
  double noise = 0.0;
  ThetaVerdict verdict = ThetaVerdict::Above;
};

struct ThetaProbeReport {
  double covolume = 1.0;
  std::vector<ThetaProbeRow> rows;
  int violations = 0;
  int inconclusive = 0;
  int above = 0;
};

/// Lattice of the given cell area whose shape is tau (basis k(1,0), k(a,b)).
inline LatticeBasis lattice_with_covolume(Complex tau, double covolume) {
  detail::require_upper_half_plane(tau);
  const double k = std::sqrt(covolume / tau.imag());
  return LatticeBasis({k, 0.0}, {k * tau.real(), k * tau.imag()});
}

/// Compares theta of the triangular lattice with theta of each sample shape,
/// all at the same covolume. Differences within the summed error bounds are
/// reported as ties, never as violations.
inline ThetaProbeReport theta_minimality_probe(std::span<const double> alphas, std::span<const Complex> taus,
                                               double covolume = 1.0, const SeriesControl& ctl = {}) {
  if (!(covolume > 0.0)) throw Error(ErrorKind::NonPositiveParameter, "covolume must be > 0");
  for (double a : alphas) {
    if (!(a > 0.0)) throw Error(ErrorKind::NonPositiveParameter, "theta parameters must be > 0");
  }
  ThetaProbeReport report;
  report.covolume = covolume;
  const Complex rho(0.5, 0.5 * std::sqrt(3.0));
  const LatticeBasis tri = lattice_with_covolume(rho, covolume);
  for (double alpha : alphas) {
    const SeriesValue tt = theta_lattice(tri, alpha, ctl);
    for (Complex tau : taus) {
      const SeriesValue ts = theta_lattice(lattice_with_covolume(tau, covolume), alpha, ctl);
      ThetaProbeRow row{alpha, tau, ts.value, tt.value, ts.value - tt.value, 0.0, ThetaVerdict::Above};
      row.noise = ts.error + tt.error + 16.0 * DBL_EPSILON * std::max(ts.value, tt.value);
      if (row.difference < -row.noise) {
        row.verdict = ThetaVerdict::Violation;
        ++report.violations;
      } else if (row.difference <= row.noise) {
        row.verdict = ThetaVerdict::Tie;
        ++report.inconclusive;
      } else {
        ++report.above;
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

/// Random shapes, uniform in a in [-1/2, 1/2] and b in [sqrt(1 - a^2), b_max].
inline std::vector<Complex> sample_fundamental_domain(int samples, std::uint64_t seed, double b_max = 3.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ua(-0.5, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Complex> taus;
  taus.reserve(std::max(samples, 0));
  for (int i = 0; i < samples; ++i) {
    const double a = ua(rng);
    const double lo = std::sqrt(1.0 - a * a);
    taus.emplace_back(a, lo + (b_max - lo) * unit(rng));
  }
  return taus;
}

inline ThetaProbeReport theta_minimality_probe(std::span<const double> alphas, int samples, std::uint64_t seed = 0,
                                               double covolume = 1.0, const SeriesControl& ctl = {}) {
  const std::vector<Complex> taus = sample_fundamental_domain(samples, seed);
  return theta_minimality_probe(alphas, std::span<const Complex>(taus), covolume, ctl);
}

}  // namespace renergy
