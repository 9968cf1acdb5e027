#pragma once

// Special functions behind the closed forms for W: Dedekind eta, the Kronecker
// product f(z, tau), Eisenstein series E_{u,v}, lattice theta functions and the
// Epstein zeta function through its Mellin/theta representation.
//
// Every evaluator returns its value together with an a-posteriori bound on the
// truncation error. All series involved converge geometrically (q-series) or
// like a Gaussian (theta), so binary64 suffices throughout.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <complex>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "renergy/types.hpp"

namespace renergy {

/// Points closer than this to a singular set are rejected instead of evaluated.
inline constexpr double singular_tube = 1e-9;

struct EtaValue {
  Complex value;
  double error = 0.0;
  int terms = 0;
};

namespace detail {

inline void require_upper_half_plane(Complex tau) {
  if (!std::isfinite(tau.real()) || !std::isfinite(tau.imag())) {
    throw Error(ErrorKind::InvalidArgument, "tau must be finite");
  }
  if (!(tau.imag() > 0.0)) {
    throw Error(ErrorKind::NonPositiveImaginaryPart, "Im tau must be > 0");
  }
}

// log|1 - w| without cancellation when |w| is small.
inline double log_abs_one_minus(Complex w) {
  return 0.5 * std::log1p(-2.0 * w.real() + std::norm(w));
}

// q = exp(2 i pi tau) with the modulus taken exactly from Im tau.
inline Complex nome(Complex tau) {
  return std::polar(std::exp(-two_pi * tau.imag()), two_pi * tau.real());
}

// Bound on sum_{k>n} |log|1 - q^k|| once |q|^{n+1} <= 1/2.
inline double eta_tail(double rq, double rq_next) {
  if (rq_next > 0.5) return std::numeric_limits<double>::infinity();
  return rq_next / ((1.0 - rq) * (1.0 - rq_next));
}

inline double roundoff_floor(double magnitude, int terms) {
  return 4.0 * DBL_EPSILON * (terms + 1) * std::max(1.0, std::abs(magnitude));
}

// Distance from z to the lattice Z + tau Z.
inline double lattice_distance(Complex z, Complex tau) {
  const double m0 = std::round(z.imag() / tau.imag());
  double best = std::numeric_limits<double>::infinity();
  for (int dm = -1; dm <= 1; ++dm) {
    const Complex w = z - (m0 + dm) * tau;
    const double n0 = std::round(w.real());
    for (int dn = -1; dn <= 1; ++dn) best = std::min(best, std::abs(w - (n0 + dn)));
  }
  return best;
}

// log|f(z, tau)| with z assumed off the lattice. The factor p^{1/2} - p^{-1/2}
// enters through its modulus 2|sin(pi z)|.
inline SeriesValue log_abs_kronecker_unchecked(Complex z, Complex tau, const SeriesControl& ctl) {
  const double b = tau.imag();
  const double rq = std::exp(-two_pi * b);
  const Complex q = nome(tau);
  const double xr = z.real() - std::round(z.real());
  const Complex p = std::polar(std::exp(-two_pi * z.imag()), two_pi * z.real());
  const Complex p_inv = 1.0 / p;
  const double spread = std::max(std::abs(p), std::abs(p_inv));

  const double s = std::sin(pi * xr);
  const double sh = std::sinh(pi * z.imag());
  double sum = -pi * b / 6.0 + std::log(2.0) + 0.5 * std::log(s * s + sh * sh);

  Complex qn = 1.0;
  double rn = 1.0;
  int n = 0;
  for (;;) {
    if (n >= ctl.truncation_order) {
      const double next = rn * rq * spread;
      if (next <= 0.5) {
        const double tail = 4.0 * next / (1.0 - rq);
        if (tail < ctl.abs_tol / 10.0) return {sum, tail + roundoff_floor(sum, n), n};
      }
    }
    if (n >= ctl.max_terms) {
      throw Error(ErrorKind::PrecisionUnreachable, "Kronecker product did not reach abs_tol within max_terms");
    }
    ++n;
    qn *= q;
    rn *= rq;
    sum += log_abs_one_minus(qn * p) + log_abs_one_minus(qn * p_inv);
  }
}

// Logarithmic derivative d/dz log f(z, tau).
inline Complex dlog_kronecker(Complex z, Complex tau, const SeriesControl& ctl, double* error = nullptr) {
  const double rq = std::exp(-two_pi * tau.imag());
  const Complex q = nome(tau);
  const Complex p = std::polar(std::exp(-two_pi * z.imag()), two_pi * z.real());
  const Complex p_inv = 1.0 / p;
  const double spread = std::max(std::abs(p), std::abs(p_inv));
  const Complex two_pi_i(0.0, two_pi);

  const Complex zr(z.real() - std::round(z.real()), z.imag());
  Complex sum = pi * std::cos(pi * zr) / std::sin(pi * zr);

  Complex qn = 1.0;
  double rn = 1.0;
  int n = 0;
  for (;;) {
    if (n >= ctl.truncation_order) {
      const double next = rn * rq * spread;
      if (next <= 0.5) {
        // |w/(1-w)| <= 2|w| for |w| <= 1/2, two terms per order.
        const double tail = two_pi * 4.0 * next / (1.0 - rq);
        if (tail < ctl.abs_tol / 10.0) {
          if (error) *error = tail + roundoff_floor(std::abs(sum), n);
          return sum;
        }
      }
    }
    if (n >= ctl.max_terms) {
      throw Error(ErrorKind::PrecisionUnreachable, "Kronecker derivative did not reach abs_tol within max_terms");
    }
    ++n;
    qn *= q;
    rn *= rq;
    const Complex w1 = qn * p;
    const Complex w2 = qn * p_inv;
    sum += two_pi_i * (w2 / (1.0 - w2) - w1 / (1.0 - w1));
  }
}

// Smallest singular value of the basis matrix [u v].
inline double min_singular_value(const LatticeBasis& basis) {
  const double s = dot(basis.u(), basis.u()) + dot(basis.v(), basis.v());
  const double det = std::abs(basis.covolume());
  const double big = std::sqrt(0.5 * (s + std::sqrt(std::max(0.0, s * s - 4.0 * det * det))));
  return det / big;
}

// Bound on sum_{k>K} 8k exp(-c k^2): the lattice points outside shell K.
inline double theta_shell_tail(double c, int shell) {
  double total = 0.0;
  for (long k = shell + 1; k < shell + 10'000'000L; ++k) {
    const double kd = static_cast<double>(k);
    const double t = 8.0 * kd * std::exp(-c * kd * kd);
    total += t;
    const double ratio = (kd + 1.0) / kd * std::exp(-c * (2.0 * kd + 1.0));
    if (ratio < 0.5) return total + t * ratio / (1.0 - ratio);
  }
  return std::numeric_limits<double>::infinity();
}

// Sum of exp(-pi alpha |p|^2) over the lattice, optionally skipping p = 0.
inline SeriesValue theta_sum(const LatticeBasis& basis, double alpha, const SeriesControl& ctl, bool include_origin) {
  ctl.validate();
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::NonPositiveParameter, "theta parameter alpha must be > 0");
  }
  const LatticeBasis red = basis.reduced();
  const Vec2 u = red.u();
  const Vec2 v = red.v();
  const double sigma = min_singular_value(red);
  const double c = pi * alpha * sigma * sigma;
  auto term = [&](int i, int j) {
    const Vec2 p = double(i) * u + double(j) * v;
    return std::exp(-pi * alpha * dot(p, p));
  };

  double sum = include_origin ? 1.0 : 0.0;
  for (int k = 1;; ++k) {
    double shell = 0.0;
    for (int i = -k; i <= k; ++i) shell += term(i, k) + term(i, -k);
    for (int j = -k + 1; j <= k - 1; ++j) shell += term(k, j) + term(-k, j);
    sum += shell;
    if (k >= ctl.truncation_order) {
      const double tail = theta_shell_tail(c, k);
      if (tail < ctl.abs_tol / 10.0) {
        return {sum, tail + 2.0 * DBL_EPSILON * (k + 1) * std::max(sum, 1e-300), k};
      }
    }
    if (k >= ctl.max_terms) {
      throw Error(ErrorKind::PrecisionUnreachable, "theta sum did not reach abs_tol within max_terms shells");
    }
  }
}

// Upper limit A of a Mellin-type integral with integrand bounded by
// sum_i w_i exp(-c_i (a - 1)) * g(a); increases A until the bound is below target.
template <class TailBound>
double find_cutoff(TailBound bound, double target) {
  for (double a = 2.0; a <= 1e5; a *= 1.25) {
    if (bound(a) < target) return a;
  }
  throw Error(ErrorKind::PrecisionUnreachable, "Gaussian tail of the theta integrand does not fall below tolerance");
}

template <class F>
double integrate(F f, double lo, double hi, double* error) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate(f, lo, hi, 20, 1e-13, error);
}

}  // namespace detail

/// eta(tau) = q^{1/24} prod_{n>=1} (1 - q^n), q = e^{2 i pi tau}.
inline EtaValue dedekind_eta(Complex tau, const SeriesControl& ctl = {}) {
  ctl.validate();
  detail::require_upper_half_plane(tau);
  const double rq = std::exp(-two_pi * tau.imag());
  const Complex q = detail::nome(tau);
  Complex prod = std::polar(std::exp(-pi * tau.imag() / 12.0), pi * tau.real() / 12.0);
  Complex qn = 1.0;
  double rn = 1.0;
  int n = 0;
  for (;;) {
    if (n >= ctl.truncation_order) {
      const double tail = detail::eta_tail(rq, rn * rq);
      const double err = std::abs(prod) * std::expm1(tail);
      if (err < ctl.abs_tol / 10.0) {
        return {prod, err + detail::roundoff_floor(std::abs(prod), n) * std::abs(prod), n};
      }
    }
    if (n >= ctl.max_terms) {
      throw Error(ErrorKind::PrecisionUnreachable, "eta product did not reach abs_tol within max_terms");
    }
    ++n;
    qn *= q;
    rn *= rq;
    prod *= 1.0 - qn;
  }
}

/// log|eta(tau)|, summed as a series of logarithms.
inline SeriesValue log_abs_eta(Complex tau, const SeriesControl& ctl = {}) {
  ctl.validate();
  detail::require_upper_half_plane(tau);
  const double rq = std::exp(-two_pi * tau.imag());
  const Complex q = detail::nome(tau);
  double sum = -pi * tau.imag() / 12.0;
  Complex qn = 1.0;
  double rn = 1.0;
  int n = 0;
  for (;;) {
    if (n >= ctl.truncation_order) {
      const double tail = detail::eta_tail(rq, rn * rq);
      if (tail < ctl.abs_tol / 10.0) return {sum, tail + detail::roundoff_floor(sum, n), n};
    }
    if (n >= ctl.max_terms) {
      throw Error(ErrorKind::PrecisionUnreachable, "eta series did not reach abs_tol within max_terms");
    }
    ++n;
    qn *= q;
    rn *= rq;
    sum += detail::log_abs_one_minus(qn);
  }
}

/// log|f(z, tau)|; throws LatticePointSingularity on Z + tau Z.
inline SeriesValue log_abs_kronecker_f(Complex z, Complex tau, const SeriesControl& ctl = {}) {
  ctl.validate();
  detail::require_upper_half_plane(tau);
  if (detail::lattice_distance(z, tau) < singular_tube) {
    throw Error(ErrorKind::LatticePointSingularity, "z lies on the lattice Z + tau Z");
  }
  return detail::log_abs_kronecker_unchecked(z, tau, ctl);
}

/// |f(z, tau)| for f = q^{1/12}(p^{1/2} - p^{-1/2}) prod (1 - q^n p)(1 - q^n / p).
/// Vanishes (exactly 0 is returned) on the lattice Z + tau Z.
inline SeriesValue kronecker_f(Complex z, Complex tau, const SeriesControl& ctl = {}) {
  ctl.validate();
  detail::require_upper_half_plane(tau);
  if (detail::lattice_distance(z, tau) < singular_tube) return {0.0, 0.0, 0};
  const SeriesValue lf = detail::log_abs_kronecker_unchecked(z, tau, ctl);
  const double value = std::exp(lf.value);
  return {value, value * std::expm1(lf.error), lf.terms};
}

/// E_{u,v}(tau) = sum' e^{2 i pi (m u + n v)} b / |m tau + n|^2, evaluated by the
/// second Kronecker limit formula -2 pi log|f(u - v tau, tau) q^{v^2/2}|.
inline SeriesValue eisenstein(double u, double v, Complex tau, const SeriesControl& ctl = {}) {
  ctl.validate();
  detail::require_upper_half_plane(tau);
  const double ur = u - std::round(u);
  const double vr = v - std::round(v);
  if (std::hypot(ur, vr) < singular_tube) {
    throw Error(ErrorKind::DivergentSeries, "(u, v) lies on Z^2; the Eisenstein series has a pole");
  }
  const SeriesValue lf = detail::log_abs_kronecker_unchecked(Complex(ur, 0.0) - vr * tau, tau, ctl);
  return {-two_pi * (lf.value - pi * tau.imag() * vr * vr), two_pi * lf.error, lf.terms};
}

/// theta_L(alpha) = sum_{p in L} e^{-pi alpha |p|^2}.
inline SeriesValue theta_lattice(const LatticeBasis& basis, double alpha, const SeriesControl& ctl = {}) {
  return detail::theta_sum(basis, alpha, ctl, true);
}

/// theta_L(alpha) - 1, without the cancellation of forming it from theta_lattice.
inline SeriesValue theta_lattice_minus_one(const LatticeBasis& basis, double alpha, const SeriesControl& ctl = {}) {
  return detail::theta_sum(basis, alpha, ctl, false);
}

/// Factor multiplying zeta in the Mellin identity for a unit-covolume lattice,
/// 2^{1+x/2} 8 pi^2 Gamma(1+x/2) / (2 pi)^{1+x/2}.
inline double mellin_prefactor(double x) {
  const double s = 1.0 + 0.5 * x;
  return std::pow(2.0, s) * 8.0 * pi * pi * std::tgamma(s) / std::pow(two_pi, s);
}

/// zeta_L(x) = sum_{p in L \ 0} 1 / (8 pi^2 |p|^{2+x}) through the Mellin/theta
/// identity. The identity is applied to L rescaled to unit covolume V = 1 and
/// the result scaled back by V^{-(1+x/2)}.
inline SeriesValue epstein_zeta_mellin(const LatticeBasis& basis, double x, const SeriesControl& ctl = {}) {
  ctl.validate();
  if (!(x > 0.0) || !std::isfinite(x)) throw Error(ErrorKind::NonPositiveParameter, "Epstein zeta requires x > 0");
  const double volume = basis.covolume();
  const LatticeBasis unit = basis.reduced().scaled(1.0 / std::sqrt(volume));
  const double shortest = norm(unit.u());
  const double c = pi * shortest * shortest;
  const double s = 1.0 + 0.5 * x;
  const double at_one = theta_lattice_minus_one(unit, 1.0, ctl).value;

  // theta(a) - 1 <= (theta(1) - 1) e^{-c (a - 1)} and a^{x/2} <= A^{x/2} e^{x (a - A) / (2A)} for a >= A.
  auto tail = [&](double a) {
    const double slope = c - x / (2.0 * a);
    if (slope <= 0.0) return std::numeric_limits<double>::infinity();
    return at_one * std::exp(-c * (a - 1.0)) * (1.0 / c + std::pow(a, 0.5 * x) / slope);
  };
  const double cutoff = detail::find_cutoff(tail, std::max(ctl.abs_tol, 1e-16));
  auto integrand = [&](double a) {
    return theta_lattice_minus_one(unit, a, ctl).value * (std::pow(a, -0.5 * x) + std::pow(a, s)) / a;
  };
  double quad_error = 0.0;
  const double integral = detail::integrate(integrand, 1.0, cutoff, &quad_error);
  const double rhs = 2.0 / x - 1.0 / s + integral;
  const double scale = std::pow(volume, -s) / mellin_prefactor(x);
  const double value = rhs * scale;
  const double error = (quad_error + tail(cutoff)) * scale + detail::roundoff_floor(value, 16) * std::abs(value);
  return {value, error, 0};
}

/// lim_{x->0} [zeta_{L1}(x) - zeta_{L2}(x)] for two lattices of equal covolume V,
/// = (1 / (8 pi V)) int_1^inf (theta_{M1}(a) - theta_{M2}(a)) (1 + a) da / a
/// where M_i = L_i / sqrt(V) have unit covolume.
inline SeriesValue zeta_difference_limit(const LatticeBasis& lat1, const LatticeBasis& lat2,
                                         const SeriesControl& ctl = {}) {
  ctl.validate();
  const double v1 = lat1.covolume();
  const double v2 = lat2.covolume();
  if (std::abs(v1 - v2) > 1e-10 * std::max(v1, v2)) {
    throw Error(ErrorKind::CovolumeMismatch, "zeta differences converge only for lattices of equal covolume");
  }
  const LatticeBasis m1 = lat1.reduced().scaled(1.0 / std::sqrt(v1));
  const LatticeBasis m2 = lat2.reduced().scaled(1.0 / std::sqrt(v2));
  const double c1 = pi * dot(m1.u(), m1.u());
  const double c2 = pi * dot(m2.u(), m2.u());
  const double t1 = theta_lattice_minus_one(m1, 1.0, ctl).value;
  const double t2 = theta_lattice_minus_one(m2, 1.0, ctl).value;

  // (1 + a) / a <= 2 on [1, inf).
  auto tail = [&](double a) {
    return 2.0 * (t1 * std::exp(-c1 * (a - 1.0)) / c1 + t2 * std::exp(-c2 * (a - 1.0)) / c2);
  };
  const double cutoff = detail::find_cutoff(tail, std::max(ctl.abs_tol, 1e-16));
  auto integrand = [&](double a) {
    const double d = theta_lattice_minus_one(m1, a, ctl).value - theta_lattice_minus_one(m2, a, ctl).value;
    return d * (1.0 + a) / a;
  };
  double quad_error = 0.0;
  const double integral = detail::integrate(integrand, 1.0, cutoff, &quad_error);
  const double scale = 1.0 / (8.0 * pi * v1);
  return {integral * scale, (quad_error + tail(cutoff)) * scale + 1e-15 * std::abs(integral * scale), 0};
}

}  // namespace renergy
