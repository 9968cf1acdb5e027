#pragma once

// Periodic n-point configurations on a flat torus of area 2 pi: the torus Green
// function (via the second Kronecker limit formula), the energy
//   W = 1/2 sum_{i != j} G(a_i - a_j) + n W(Zu + Zv)
// with its gradient, and a descent-based search for low-energy configurations.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "renergy/lattice_energy.hpp"
#include "renergy/parallel.hpp"

namespace renergy {

struct TorusSpec {
  LatticeBasis basis = square_basis(two_pi);

  double volume() const { return basis.covolume(); }

  static TorusSpec square() { return {square_basis(two_pi)}; }
  static TorusSpec triangular() { return {triangular_basis(two_pi)}; }
};

/// Minimum separation between points, in fractional coordinates.
inline constexpr double default_min_separation = 1e-8;

inline double wrap_unit(double s) {
  s -= std::floor(s);
  return s >= 1.0 ? 0.0 : s;
}

inline double wrap_centered(double s) { return s - std::floor(s + 0.5); }

inline Vec2 wrap_centered(Vec2 d) { return {wrap_centered(d.x), wrap_centered(d.y)}; }

inline double fractional_separation(Vec2 a, Vec2 b) { return norm(wrap_centered(a - b)); }

inline double min_fractional_separation(std::span<const Vec2> pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, fractional_separation(pts[i], pts[j]));
  }
  return best;
}

struct TorusConfig {
  TorusSpec torus;
  std::vector<Vec2> points;  // fractional coordinates in [0, 1)^2

  std::size_t n() const { return points.size(); }
};

/// Wraps coordinates into [0, 1)^2 and checks the configuration invariants.
inline TorusConfig make_config(const TorusSpec& torus, std::vector<Vec2> points,
                               double min_separation = default_min_separation) {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "a configuration needs at least one point");
  for (auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(ErrorKind::InvalidArgument, "non-finite coordinate");
    p = {wrap_unit(p.x), wrap_unit(p.y)};
  }
  if (min_fractional_separation(points) <= min_separation) {
    throw Error(ErrorKind::CoincidentPoints, "two points closer than the minimum separation");
  }
  return {torus, std::move(points)};
}

/// n uniformly random distinct points drawn from a generator seeded with `seed`.
inline TorusConfig random_config(const TorusSpec& torus, std::size_t n, std::uint64_t seed,
                                 double min_separation = default_min_separation) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec2> pts;
  while (pts.size() < n) {
    const Vec2 p{unit(rng), unit(rng)};
    bool ok = true;
    for (const auto& q : pts) ok = ok && fractional_separation(p, q) > 1e3 * min_separation;
    if (ok) pts.push_back(p);
  }
  return make_config(torus, std::move(pts), min_separation);
}

/// Mean-zero Green function G of -Delta G = (V/(2 pi)) 2 pi delta_0 - 1 on the
/// torus R^2 / (Zu + Zv), i.e. the dual-lattice Fourier series
/// sum' e^{2 i pi p.x} / (4 pi^2 |p|^2); for V = 2 pi this is the Coulomb kernel
/// -Delta G = 2 pi delta_0 - 1. Evaluated as -(V / 2 pi) log|f(u - v tau, tau) q^{v^2/2}|.
///
/// Immutable after construction; safe for concurrent reads.
class GreenEvaluator {
 public:
  static constexpr double mean_tolerance = 1e-4;


  explicit GreenEvaluator(const LatticeBasis& periods, SeriesControl ctl = {})
      : periods_(periods), frame_(dual_frame(periods)), volume_(periods.covolume()), ctl_(ctl) {
    ctl_.validate();
    mean_ = measure_mean();
    // The 64^2 quadrature resolves the mean to ~1e-4; only a larger drift is a real offset.
    if (std::abs(mean_) > mean_tolerance) correction_ = mean_;
  }

  Complex tau() const { return frame_.tau; }
  double scale() const { return std::sqrt(two_pi / volume_); }
  const SeriesControl& control() const { return ctl_; }
  const LatticeBasis& periods() const { return periods_; }

  /// Cell average of G as measured at construction (before any correction).
  double measured_mean() const { return mean_; }
  /// Constant subtracted from every value; zero unless the measured mean drifted.
  double correction() const { return correction_; }

  double value(Vec2 x) const { return value_with_error(x).value; }

  SeriesValue value_with_error(Vec2 x) const {
    const Local loc = localize(x);
    const Complex tau = frame_.tau;
    const SeriesValue lf = detail::log_abs_kronecker_unchecked(Complex(loc.u, 0.0) - loc.v * tau, tau, ctl_);
    const double phi = lf.value - pi * tau.imag() * loc.v * loc.v;
    const double k = volume_ / two_pi;
    return {-k * phi - correction_, k * lf.error, lf.terms};
  }

  Vec2 gradient(Vec2 x) const {
    const Local loc = localize(x);
    const Complex tau = frame_.tau;
    const double a = tau.real();
    const double b = tau.imag();
    const Complex d = detail::dlog_kronecker(Complex(loc.u, 0.0) - loc.v * tau, tau, ctl_);
    const double phi_u = d.real();
    const double phi_v = (-tau * d).real() - two_pi * b * loc.v;
    const double len = frame_.e1_length;
    const double k = -volume_ / two_pi;
    const double g1 = k * len * (a * phi_u + phi_v);
    const double g2 = k * len * b * phi_u;
    return {frame_.cos_angle * g1 - frame_.sin_angle * g2, frame_.sin_angle * g1 + frame_.cos_angle * g2};
  }

 private:
  struct Local {
    double u;
    double v;
  };

  // Coordinates (u, v) of x in the frame of the dual, reduced mod 1.
  Local localize(Vec2 x) const {
    const double c = frame_.cos_angle;
    const double s = frame_.sin_angle;
    const double x1 = c * x.x + s * x.y;
    const double x2 = -s * x.x + c * x.y;
    const double len = frame_.e1_length;
    const double a = frame_.tau.real();
    const double b = frame_.tau.imag();
    double u = len * (a * x1 + b * x2);
    double v = len * x1;
    u -= std::round(u);
    v -= std::round(v);
    const double r1 = v / len;
    const double r2 = (u / len - a * r1) / b;
    if (std::hypot(r1, r2) < singular_tube) {
      throw Error(ErrorKind::LatticePointSingularity, "Green function evaluated on the periodicity lattice");
    }
    return {u, v};
  }

  // Cell average of G on a 64 x 64 grid. The log singularity is removed with a
  // smooth radial cutoff and integrated separately, so the grid sum converges
  // spectrally.
  double measure_mean() const {
    constexpr int n = 64;
    const LatticeBasis red = periods_.reduced();
    const double radius = 0.4 * norm(red.u());
    auto bump = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
    auto cutoff = [&](double r) {
      const double s = r / radius;
      if (s <= 0.5) return 1.0;
      if (s >= 1.0) return 0.0;
      const double p = bump(1.0 - s);
      return p / (p + bump(s - 0.5));
    };
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const Vec2 x = periods_.to_cartesian({(i + 0.5) / n, (j + 0.5) / n});
        const Vec2 f = red.to_fractional(x);
        double r = std::numeric_limits<double>::infinity();
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            const Vec2 lp = red.to_cartesian({std::round(f.x) + di, std::round(f.y) + dj});
            r = std::min(r, norm(x - lp));
          }
        }
        const SeriesValue lf = detail::log_abs_kronecker_unchecked(
            Complex(local_u(x), 0.0) - local_v(x) * frame_.tau, frame_.tau, ctl_);
        const double g = -(volume_ / two_pi) * (lf.value - pi * frame_.tau.imag() * local_v(x) * local_v(x));
        sum += g + cutoff(r) * std::log(r);
      }
    }
    // int cutoff(r) log r dA = 2 pi [ int_0^{R/2} r log r dr + int_{R/2}^{R} cutoff r log r dr ].
    const double half = 0.5 * radius;
    double err = 0.0;
    const double inner = 0.5 * half * half * std::log(half) - 0.25 * half * half;
    const double outer = detail::integrate([&](double r) { return cutoff(r) * r * std::log(r); }, half, radius, &err);
    const double singular = two_pi * (inner + outer);
    return (volume_ * sum / (n * n) - singular) / volume_;
  }

  double local_u(Vec2 x) const {
    const double x1 = frame_.cos_angle * x.x + frame_.sin_angle * x.y;
    const double x2 = -frame_.sin_angle * x.x + frame_.cos_angle * x.y;
    const double u = frame_.e1_length * (frame_.tau.real() * x1 + frame_.tau.imag() * x2);
    return u - std::round(u);
  }
  double local_v(Vec2 x) const {
    const double v = frame_.e1_length * (frame_.cos_angle * x.x + frame_.sin_angle * x.y);
    return v - std::round(v);
  }

  LatticeBasis periods_;
  DualFrame frame_;
  double volume_;
  SeriesControl ctl_;
  double mean_ = 0.0;
  double correction_ = 0.0;
};

inline void require_normalized_volume(const TorusSpec& torus) {
  if (std::abs(torus.volume() - two_pi) > 1e-12 * two_pi) {
    throw Error(ErrorKind::VolumeNotNormalized, "torus cell area must be 2 pi");
  }
}

/// Energy model of one torus: Green evaluator plus the lattice self-energy.
class TorusEnergyModel {
 public:
  explicit TorusEnergyModel(const TorusSpec& torus, SeriesControl ctl = {})
      : torus_((require_normalized_volume(torus), torus)),
        green_(torus.basis, ctl),
        lattice_energy_(w_eta(lattice_to_tau(torus.basis).tau, 1.0, ctl).value) {}

  const TorusSpec& torus() const { return torus_; }
  const GreenEvaluator& green() const { return green_; }

  /// W of the periodicity lattice itself (the single-point energy).
  double lattice_energy() const { return lattice_energy_; }

  Vec2 displacement(Vec2 a, Vec2 b) const { return torus_.basis.to_cartesian(wrap_centered(a - b)); }

  /// 1/2 sum_{i != j} G(a_i - a_j).
  double pair_energy(std::span<const Vec2> pts) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) sum += green_.value(displacement(pts[i], pts[j]));
    }
    return sum;
  }

  double energy(std::span<const Vec2> pts) const {
    return pair_energy(pts) + static_cast<double>(pts.size()) * lattice_energy_;
  }

  /// dW/da_i in Cartesian coordinates; contributions are added pairwise so the
  /// gradients sum to zero up to summation roundoff.
  std::vector<Vec2> gradient(std::span<const Vec2> pts) const {
    std::vector<Vec2> grad(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const Vec2 g = green_.gradient(displacement(pts[i], pts[j]));
        grad[i] += g;
        grad[j] -= g;
      }
    }
    return grad;
  }

 private:
  TorusSpec torus_;
  GreenEvaluator green_;
  double lattice_energy_;
};

inline void require_distinct(const TorusConfig& cfg, double min_separation = default_min_separation) {
  if (cfg.points.empty()) throw Error(ErrorKind::InvalidArgument, "a configuration needs at least one point");
  if (min_fractional_separation(cfg.points) <= min_separation) {
    throw Error(ErrorKind::CoincidentPoints, "two points closer than the minimum separation");
  }
}

inline double config_energy(const TorusConfig& cfg, const SeriesControl& ctl = {}) {
  require_normalized_volume(cfg.torus);
  require_distinct(cfg);
  return TorusEnergyModel(cfg.torus, ctl).energy(cfg.points);
}

inline std::vector<Vec2> config_grad(const TorusConfig& cfg, const SeriesControl& ctl = {}) {
  require_normalized_volume(cfg.torus);
  require_distinct(cfg);
  return TorusEnergyModel(cfg.torus, ctl).gradient(cfg.points);
}

inline double sup_norm(std::span<const Vec2> g) {
  double m = 0.0;
  for (const auto& v : g) m = std::max({m, std::abs(v.x), std::abs(v.y)});
  return m;
}

// ---------------------------------------------------------------------------
// Minimization

struct MinimizeControl {
  int max_iters = 5000;
  double grad_tol = 1e-8;
  double step_init = 1.0;
  int restarts = 0;
  std::uint64_t rng_seed = 0;
  double min_separation = default_min_separation;

  void validate() const {
    if (!(grad_tol > 0.0) || !(step_init > 0.0) || max_iters < 0 || restarts < 0) {
      throw Error(ErrorKind::InvalidArgument, "MinimizeControl requires grad_tol > 0, step_init > 0");
    }
  }
};

struct TraceRow {
  int iter = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
};

struct RestartSummary {
  std::uint64_t seed = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
};

struct MinimizeResult {
  TorusConfig config;
  EnergyReport report;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stalled = false;  // LineSearchStall: best-so-far returned
  std::vector<TraceRow> trace;
  std::vector<RestartSummary> restarts;
};

namespace detail {

inline MinimizeResult descend(const TorusEnergyModel& model, const TorusConfig& start, const MinimizeControl& ctl) {
  MinimizeResult out;
  std::vector<Vec2> pts = start.points;
  const double n = static_cast<double>(pts.size());
  double energy = model.energy(pts);
  std::vector<Vec2> grad = model.gradient(pts);
  double gnorm = sup_norm(grad);
  out.trace.push_back({0, energy, gnorm});
  double step = ctl.step_init;
  int it = 0;
  for (; it < ctl.max_iters; ++it) {
    if (gnorm < ctl.grad_tol) break;
    double g2 = 0.0;
    for (const auto& g : grad) g2 += dot(g, g);
    // Energies are only known to roundoff; the sufficient-decrease test tolerates that.
    const double slack = 16.0 * DBL_EPSILON * (n * n + std::abs(energy));
    step = std::min(ctl.step_init, 2.0 * step);
    bool accepted = false;
    std::vector<Vec2> trial(pts.size());
    std::vector<Vec2> trial_grad;
    double trial_energy = 0.0;
    while (step > 1e-20) {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2 df = model.torus().basis.to_fractional(-step * grad[i]);
        trial[i] = {wrap_unit(pts[i].x + df.x), wrap_unit(pts[i].y + df.y)};
      }
      if (min_fractional_separation(trial) > ctl.min_separation) {
        trial_energy = model.energy(trial);
        const double decrease = 1e-4 * step * g2;
        if (decrease > slack) {
          accepted = trial_energy <= energy - decrease;
        } else if (trial_energy <= energy + slack) {
          // Below energy resolution: require the gradient to shrink instead.
          trial_grad = model.gradient(trial);
          double t2 = 0.0;
          for (const auto& g : trial_grad) t2 += dot(g, g);
          accepted = t2 < g2;
        }
        if (accepted) break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.stalled = true;
      break;
    }
    pts = trial;
    energy = trial_energy;
    grad = trial_grad.empty() ? model.gradient(pts) : std::move(trial_grad);
    gnorm = sup_norm(grad);
    out.trace.push_back({it + 1, energy, gnorm});
  }
  out.config = TorusConfig{start.torus, pts};
  out.report = {energy, Route::Eta, model.green().control(), 0.0};
  out.grad_norm = gnorm;
  out.iterations = static_cast<int>(out.trace.size()) - 1;
  out.converged = gnorm < ctl.grad_tol;
  return out;
}

}  // namespace detail

/// Gradient descent with backtracking line search. With restarts > 0 the search
/// runs from `restarts` random configurations seeded rng_seed, rng_seed + 1, ...
/// (in parallel) and returns the lowest energy, ties broken by seed.
inline MinimizeResult minimize_config(const TorusConfig& cfg, const MinimizeControl& ctl = {},
                                      const SeriesControl& series = {}) {
  ctl.validate();
  require_normalized_volume(cfg.torus);
  require_distinct(cfg, ctl.min_separation);
  const TorusEnergyModel model(cfg.torus, series);
  if (ctl.restarts == 0 || cfg.n() == 1) {
    MinimizeResult r = detail::descend(model, cfg, ctl);
    r.restarts.push_back({ctl.rng_seed, r.report.value, r.grad_norm, r.iterations, r.converged, r.stalled});
    return r;
  }
  std::vector<MinimizeResult> runs(static_cast<std::size_t>(ctl.restarts));
  parallel_for(runs.size(), [&](std::size_t k) {
    const TorusConfig start = random_config(cfg.torus, cfg.n(), ctl.rng_seed + k, ctl.min_separation);
    runs[k] = detail::descend(model, start, ctl);
  });
  std::size_t best = 0;
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].report.value < runs[best].report.value) best = k;
  }
  MinimizeResult out = runs[best];
  out.restarts.clear();
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& r = runs[k];
    out.restarts.push_back({ctl.rng_seed + k, r.report.value, r.grad_norm, r.iterations, r.converged, r.stalled});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

struct ElkiesRow {
  int n = 0;
  double w_min = 0.0;
  double pair_sum_min = 0.0;  // min sum_{i != j} G(a_i - a_j)
  double excess = 0.0;        // (pair_sum_min + (n/4) log n) / n
  bool converged = true;
};

struct ElkiesReport {
  std::vector<ElkiesRow> rows;
  double band_low = 0.0;
  double band_high = 0.0;
  double band_width = 0.0;
  double band_limit = 5.0;
  bool within_band = true;
};

/// For each n, minimizes the pairwise torus interaction and reports its
/// normalized excess over -(n/4) log n.
inline ElkiesReport elkies_experiment(std::span<const int> n_list, const TorusSpec& torus, const MinimizeControl& ctl,
                                      double band_limit = 5.0, const SeriesControl& series = {}) {
  require_normalized_volume(torus);
  ElkiesReport report;
  report.band_limit = band_limit;
  const double lattice = TorusEnergyModel(torus, series).lattice_energy();
  for (int n : n_list) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
    ElkiesRow row;
    row.n = n;
    if (n == 1) {
      row.w_min = lattice;
    } else {
      const TorusConfig start = random_config(torus, static_cast<std::size_t>(n), ctl.rng_seed);
      const MinimizeResult r = minimize_config(start, ctl, series);
      row.w_min = r.report.value;
      row.pair_sum_min = 2.0 * (r.report.value - n * lattice);
      row.excess = (row.pair_sum_min + 0.25 * n * std::log(double(n))) / n;
      row.converged = r.converged;
    }
    report.rows.push_back(row);
  }
  if (!report.rows.empty()) {
    auto [lo, hi] = std::minmax_element(report.rows.begin(), report.rows.end(),
                                        [](const ElkiesRow& x, const ElkiesRow& y) { return x.excess < y.excess; });
    report.band_low = lo->excess;
    report.band_high = hi->excess;
    report.band_width = hi->excess - lo->excess;
    report.within_band = report.band_width < band_limit;
  }
  return report;
}

/// A torus of area 2 pi carrying an exact n-point triangular configuration:
/// the roundest index-n sublattice of the triangular lattice, with its cosets.
struct TriangularEmbedding {
  TorusSpec torus;
  std::vector<Vec2> points;
  Complex tau;
};

inline TriangularEmbedding triangular_embedding(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  const Vec2 t1{1.0, 0.0};
  const Vec2 t2{0.5, 0.5 * std::sqrt(3.0)};
  int best_a = n, best_b = 0;
  double best_im = std::numeric_limits<double>::infinity();
  for (int a = 1; a <= n; ++a) {
    if (n % a != 0) continue;
    const int d = n / a;
    for (int b = 0; b < a; ++b) {
      const LatticeBasis sub(double(a) * t1, double(b) * t1 + double(d) * t2);
      const double im = lattice_to_tau(sub).tau.imag();
      if (im < best_im - 1e-12) {
        best_im = im;
        best_a = a;
        best_b = b;
      }
    }
  }
  const int d = n / best_a;
  const Vec2 w1 = double(best_a) * t1;
  const Vec2 w2 = double(best_b) * t1 + double(d) * t2;
  const double s = std::sqrt(two_pi / cross(w1, w2));
  const LatticeBasis sub(w1, w2);
  std::vector<Vec2> pts;
  for (int i = 0; i < best_a; ++i) {
    for (int j = 0; j < d; ++j) {
      const Vec2 f = sub.to_fractional(double(i) * t1 + double(j) * t2);
      pts.push_back({wrap_unit(f.x), wrap_unit(f.y)});
    }
  }
  const LatticeBasis scaled = sub.scaled(s);
  return {TorusSpec{scaled}, std::move(pts), lattice_to_tau(scaled).tau};
}

struct Conjecture1Row {
  int n = 0;
  std::string torus_kind;  // "triangular-embedding" or "square"
  Complex torus_tau;
  double triangular_per_point = 0.0;  // (W_tri - log(n)/4), the lattice value at density n per point
  double embedded_per_point = std::numeric_limits<double>::quiet_NaN();
  double best_per_point = 0.0;
  double gap = 0.0;  // best - triangular
  bool counterexample_candidate = false;
};

struct Conjecture1Report {
  std::vector<Conjecture1Row> rows;
  double tolerance = 1e-6;
  int candidates = 0;
};

/// Observational probe: per n, the best per-point energy found by descent on a
/// torus admitting an exact triangular configuration and on the square torus,
/// against the triangular lattice value. Values below it by more than the
/// tolerance are flagged, never suppressed.
inline Conjecture1Report conjecture1_probe(std::span<const int> n_list, const MinimizeControl& ctl,
                                           double tolerance = 1e-6, const SeriesControl& series = {}) {
  Conjecture1Report report;
  report.tolerance = tolerance;
  const double w_tri = w_eta(Complex(0.5, 0.5 * std::sqrt(3.0)), 1.0, series).value;
  for (int n : n_list) {
    const double reference = w_tri - 0.25 * std::log(double(n));
    const TriangularEmbedding emb = triangular_embedding(n);
    auto probe = [&](const std::string& kind, const TorusSpec& torus, double embedded) {
      Conjecture1Row row;
      row.n = n;
      row.torus_kind = kind;
      row.torus_tau = lattice_to_tau(torus.basis).tau;
      row.triangular_per_point = reference;
      row.embedded_per_point = embedded;
      const TorusConfig start = random_config(torus, static_cast<std::size_t>(n), ctl.rng_seed);
      const MinimizeResult r = minimize_config(start, ctl, series);
      row.best_per_point = r.report.value / n;
      row.gap = row.best_per_point - reference;
      row.counterexample_candidate = row.gap < -tolerance;
      if (row.counterexample_candidate) ++report.candidates;
      report.rows.push_back(row);
    };
    const double embedded = config_energy(TorusConfig{emb.torus, emb.points}, series) / n;
    probe("triangular-embedding", emb.torus, embedded);
    probe("square", TorusSpec::square(), std::numeric_limits<double>::quiet_NaN());
  }
  return report;
}

}  // namespace renergy
