#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "renergy/modular.hpp"

using namespace renergy;

namespace {

// eta via Euler's pentagonal-number series.
Complex eta_pentagonal(Complex tau) {
  const Complex i(0.0, 1.0);
  Complex sum = 0.0;
  for (int k = -60; k <= 60; ++k) {
    const double e = 0.5 * k * (3.0 * k - 1.0);
    sum += (k % 2 == 0 ? 1.0 : -1.0) * std::exp(two_pi * i * tau * e);
  }
  return std::exp(two_pi * i * tau / 24.0) * sum;
}

// |f(z, tau)| straight from the complex product with a fixed number of factors.
double kronecker_product(Complex z, Complex tau, int terms) {
  const Complex i(0.0, 1.0);
  const Complex q = std::exp(two_pi * i * tau);
  const Complex p = std::exp(two_pi * i * z);
  Complex f = std::exp(two_pi * i * tau / 12.0) * (std::exp(pi * i * z) - std::exp(-pi * i * z));
  Complex qn = 1.0;
  for (int n = 1; n <= terms; ++n) {
    qn *= q;
    f *= (1.0 - qn * p) * (1.0 - qn / p);
  }
  return std::abs(f);
}

double theta_1d(double alpha) {
  double s = 1.0;
  for (int n = 1; n < 50; ++n) s += 2.0 * std::exp(-pi * alpha * n * n);
  return s;
}

double theta_direct(const LatticeBasis& b, double alpha) {
  double s = 0.0;
  for (int i = -40; i <= 40; ++i) {
    for (int j = -40; j <= 40; ++j) {
      const Vec2 p = double(i) * b.u() + double(j) * b.v();
      s += std::exp(-pi * alpha * dot(p, p));
    }
  }
  return s;
}

// Symmetric partial sums of the Eisenstein double series over |m|,|n| <= M,
// averaged over M = 200..400 to damp the conditional-convergence oscillation.
Complex eisenstein_direct(double u, double v, Complex tau) {
  const double b = tau.imag();
  auto term = [&](int m, int n) {
    if (m == 0 && n == 0) return Complex(0.0);
    const double d = std::norm(double(m) * tau + double(n));
    return std::polar(b / d, two_pi * (m * u + n * v));
  };
  Complex partial = 0.0;
  Complex avg = 0.0;
  for (int M = 1; M <= 400; ++M) {
    for (int k = -M; k <= M; ++k) partial += term(k, M) + term(k, -M);
    for (int k = -M + 1; k <= M - 1; ++k) partial += term(M, k) + term(-M, k);
    if (M >= 200) avg += partial;
  }
  return avg / 201.0;
}

Complex random_tau(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-1.0, 1.0), b(0.5, 2.0);
  return {a(rng), b(rng)};
}

}  // namespace

TEST(DedekindEta, MatchesPentagonalSeriesAtI) {
  const EtaValue e = dedekind_eta({0.0, 1.0});
  EXPECT_NEAR(std::abs(e.value), std::abs(eta_pentagonal({0.0, 1.0})), 1e-12);
  EXPECT_NEAR(std::abs(e.value), 0.7682254, 1e-7);
}

TEST(DedekindEta, MatchesPentagonalSeriesAtRandomPoints) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 10; ++k) {
    const Complex tau = random_tau(rng);
    const Complex ref = eta_pentagonal(tau);
    const EtaValue e = dedekind_eta(tau);
    EXPECT_LT(std::abs(e.value - ref), 1e-12) << tau;
  }
}

TEST(DedekindEta, LargeImaginaryPartKeepsOnlyPrefactor) {
  // |q^{1/24}| = exp(-2 pi Im(tau) / 24)
  EXPECT_NEAR(std::abs(dedekind_eta({0.0, 10.0}).value), std::exp(-20.0 * pi / 24.0), 1e-12);
}

TEST(DedekindEta, ModularInvariances) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 12; ++k) {
    const Complex tau = random_tau(rng);
    const double e = std::abs(dedekind_eta(tau).value);
    EXPECT_NEAR(std::abs(dedekind_eta(tau + 1.0).value), e, 1e-10);
    EXPECT_NEAR(std::abs(dedekind_eta(-1.0 / tau).value), std::sqrt(std::abs(tau)) * e, 1e-10);
  }
}

TEST(DedekindEta, LogModulusAgreesWithProduct) {
  for (Complex tau : {Complex(0.0, 1.0), Complex(0.5, 0.8660254037844386), Complex(0.3, 0.6)}) {
    EXPECT_NEAR(log_abs_eta(tau).value, std::log(std::abs(dedekind_eta(tau).value)), 1e-13);
  }
}

TEST(DedekindEta, DoubledTruncationWithinErrorEstimate) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    const Complex tau = random_tau(rng);
    const EtaValue base = dedekind_eta(tau);
    SeriesControl more;
    more.truncation_order = 2 * std::max(1, base.terms);
    EXPECT_LE(std::abs(dedekind_eta(tau, more).value - base.value), base.error + 1e-16);
    const SeriesValue lb = log_abs_eta(tau);
    more.truncation_order = 2 * std::max(1, lb.terms);
    EXPECT_LE(std::abs(log_abs_eta(tau, more).value - lb.value), lb.error);
  }
}

TEST(DedekindEta, Errors) {
  EXPECT_THROW(
      try { dedekind_eta({0.0, -1.0}); } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonPositiveImaginaryPart);
        throw;
      },
      Error);
  SeriesControl tight;
  tight.max_terms = 2;
  tight.abs_tol = 1e-15;
  EXPECT_THROW(
      try { dedekind_eta({0.0, 0.05}, tight); } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::PrecisionUnreachable);
        throw;
      },
      Error);
}

TEST(KroneckerF, VanishesAtOrigin) { EXPECT_EQ(kronecker_f({0.0, 0.0}, {0.0, 1.0}).value, 0.0); }

TEST(KroneckerF, MatchesLongProduct) {
  EXPECT_NEAR(kronecker_f({0.5, 0.0}, {0.0, 1.0}).value, kronecker_product({0.5, 0.0}, {0.0, 1.0}, 200), 1e-10);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  for (int k = 0; k < 10; ++k) {
    const Complex tau = random_tau(rng);
    const Complex z = Complex(unit(rng), 0.0) + unit(rng) * tau;
    const double ref = kronecker_product(z, tau, 200);
    EXPECT_NEAR(kronecker_f(z, tau).value / ref, 1.0, 1e-11);
  }
}

TEST(KroneckerF, PeriodicInRealShift) {
  const Complex tau(0.0, 1.0), z(0.3, 0.2);
  EXPECT_NEAR(kronecker_f(z + 1.0, tau).value, kronecker_f(z, tau).value, 1e-14);
}

TEST(KroneckerF, LogModulusRejectsLatticePoints) {
  const Complex tau(0.2, 1.1);
  EXPECT_THROW(log_abs_kronecker_f(2.0 + tau, tau), Error);
  EXPECT_NO_THROW(log_abs_kronecker_f(Complex(1e-6, 0.0), tau));
}

TEST(Eisenstein, DivergesOnIntegerPairs) {
  for (auto [u, v] : {std::pair{0.0, 0.0}, std::pair{1.0, -2.0}}) {
    try {
      eisenstein(u, v, {0.0, 1.0});
      ADD_FAILURE() << "expected DivergentSeries";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::DivergentSeries);
    }
  }
}

TEST(Eisenstein, ClosedFormMatchesDirectSumAtHalfHalf) {
  const Complex direct = eisenstein_direct(0.5, 0.5, {0.0, 1.0});
  EXPECT_NEAR(eisenstein(0.5, 0.5, {0.0, 1.0}).value, direct.real(), 1e-3);
  EXPECT_NEAR(direct.imag(), 0.0, 1e-9);
}

TEST(Eisenstein, ClosedFormMatchesDirectSumAtRandomPoints) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.05, 0.95), a(-0.5, 0.5), b(0.9, 1.6);
  for (int k = 0; k < 5; ++k) {
    const double u = unit(rng), v = unit(rng);
    const Complex tau(a(rng), b(rng));
    const Complex direct = eisenstein_direct(u, v, tau);
    EXPECT_NEAR(eisenstein(u, v, tau).value, direct.real(), 1e-3) << u << " " << v << " " << tau;
    EXPECT_NEAR(direct.imag(), 0.0, 1e-9);
  }
}

TEST(ThetaLattice, OnlyOriginSurvivesAtLargeAlpha) {
  EXPECT_NEAR(theta_lattice(LatticeBasis({1.0, 0.0}, {0.0, 1.0}), 50.0).value, 1.0, 1e-15);
  EXPECT_NEAR(theta_lattice(LatticeBasis({1.2, 0.0}, {0.4, 1.1}), 50.0).value, 1.0, 1e-15);
}

TEST(ThetaLattice, SquareLatticeIsSquareOfOneDimensionalSum) {
  const double t = theta_1d(1.0);
  EXPECT_NEAR(theta_lattice(LatticeBasis({1.0, 0.0}, {0.0, 1.0}), 1.0).value, t * t, 1e-14);
  EXPECT_NEAR(t * t, 1.18034060, 1e-8);
}

TEST(ThetaLattice, MatchesDirectSummationOnSkewBasis) {
  const LatticeBasis b({0.9, 0.1}, {2.3, 1.2});  // far from reduced
  for (double alpha : {0.3, 1.0, 2.5}) EXPECT_NEAR(theta_lattice(b, alpha).value, theta_direct(b, alpha), 1e-12);
}

TEST(ThetaLattice, PoissonDualityForSquareLattice) {
  const LatticeBasis z2({1.0, 0.0}, {0.0, 1.0});
  const double a = 0.7;
  EXPECT_NEAR(theta_direct(z2, a), theta_direct(z2.dual(), 1.0 / a) / a, 1e-12);
  EXPECT_NEAR(theta_lattice(z2, a).value, theta_lattice(z2.dual(), 1.0 / a).value / a, 1e-12);
}

TEST(ThetaLattice, PoissonDualityRandomBases) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> ang(0.0, two_pi), len(0.6, 1.6), aa(0.3, 3.0);
  for (int k = 0; k < 10; ++k) {
    const double t1 = ang(rng), t2 = t1 + 0.5 + ang(rng) / 3.0;
    LatticeBasis b(len(rng) * Vec2{std::cos(t1), std::sin(t1)}, len(rng) * Vec2{std::cos(t2), std::sin(t2)});
    b = b.scaled(1.0 / std::sqrt(b.covolume()));
    const double a = aa(rng);
    const double lhs = theta_lattice(b, a).value * b.covolume() * a;
    EXPECT_NEAR(lhs, theta_lattice(b.dual(), 1.0 / a).value, 1e-8);
  }
}

TEST(ThetaLattice, DoubledShellCountWithinErrorEstimate) {
  const LatticeBasis b({1.0, 0.0}, {0.3, 0.8});
  for (double alpha : {0.2, 1.0, 4.0}) {
    const SeriesValue base = theta_lattice(b, alpha);
    SeriesControl more;
    more.truncation_order = 2 * base.terms;
    EXPECT_LE(std::abs(theta_lattice(b, alpha, more).value - base.value), base.error);
  }
}

TEST(ThetaLattice, RejectsNonPositiveAlpha) {
  try {
    theta_lattice(LatticeBasis({1.0, 0.0}, {0.0, 1.0}), 0.0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveParameter);
  }
}

namespace {
// sum over (m, n) != 0 of 1/(m^2 + n^2)^2 = 4 zeta(2) beta(2), beta(2) = Catalan's constant.
constexpr double catalan = 0.915965594177219015;

// L(2, chi_{-3}) = sum_k 1/(3k+1)^2 - 1/(3k+2)^2; the summed tail is O(N^-2).
double l_chi3_at_2() {
  double s = 0.0;
  const long n = 2'000'000;
  for (long k = n - 1; k >= 0; --k) {
    const double a = 3.0 * k + 1.0, b = 3.0 * k + 2.0;
    s += 1.0 / (a * a) - 1.0 / (b * b);
  }
  return s + 1.0 / (27.0 * double(n) * n);
}
}  // namespace

TEST(EpsteinZeta, SquareLatticeAtTwoMatchesClosedSum) {
  const double direct = 4.0 * (pi * pi / 6.0) * catalan / (8.0 * pi * pi);
  const SeriesValue z = epstein_zeta_mellin(LatticeBasis({1.0, 0.0}, {0.0, 1.0}), 2.0);
  EXPECT_NEAR(z.value, direct, 1e-8);
}

TEST(EpsteinZeta, TriangularLatticeAtTwoMatchesClosedSum) {
  // |m + n omega|^2 = m^2 + mn + n^2; the sum of its inverse square is 6 zeta(2) L(2, chi_{-3}).
  const double direct = 6.0 * (pi * pi / 6.0) * l_chi3_at_2() / (8.0 * pi * pi);
  const SeriesValue z = epstein_zeta_mellin(LatticeBasis({1.0, 0.0}, {0.5, 0.5 * std::sqrt(3.0)}), 2.0);
  EXPECT_NEAR(z.value, direct, 1e-8);
}

TEST(EpsteinZeta, ScalesWithCovolume) {
  const LatticeBasis b({1.0, 0.0}, {0.2, 1.3});
  const double s = 1.7;
  const double x = 1.0;
  EXPECT_NEAR(epstein_zeta_mellin(b.scaled(s), x).value, std::pow(s, -(2.0 + x)) * epstein_zeta_mellin(b, x).value,
              1e-12);
}

TEST(EpsteinZeta, PoleAtZeroDominates) {
  for (double vol : {1.0, two_pi}) {
    const LatticeBasis b = LatticeBasis({1.0, 0.0}, {0.0, 1.0}).scaled(std::sqrt(vol));
    const double x = 1e-6;
    EXPECT_NEAR(x * mellin_prefactor(x) * epstein_zeta_mellin(b, x).value, 2.0 / vol, 1e-5);
  }
}

TEST(EpsteinZeta, PositiveAndRejectsNonPositiveX) {
  const LatticeBasis b({1.0, 0.0}, {0.5, 0.9});
  for (double x : {0.5, 1.0, 2.0}) EXPECT_GT(epstein_zeta_mellin(b, x).value, 0.0);
  try {
    epstein_zeta_mellin(b, 0.0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveParameter);
  }
}

TEST(ZetaDifference, IdenticalLatticesGiveZero) {
  const LatticeBasis b = triangular_basis();
  EXPECT_NEAR(zeta_difference_limit(b, b).value, 0.0, 1e-16);
}

TEST(ZetaDifference, MatchesFiniteXDifferences) {
  // For small x the difference of Mellin values approaches the limit linearly in x.
  const LatticeBasis sq = square_basis(1.0);
  const LatticeBasis tri = triangular_basis(1.0);
  const double limit = zeta_difference_limit(sq, tri).value;
  const double d1 = epstein_zeta_mellin(sq, 1e-3).value - epstein_zeta_mellin(tri, 1e-3).value;
  const double d2 = epstein_zeta_mellin(sq, 2e-3).value - epstein_zeta_mellin(tri, 2e-3).value;
  EXPECT_NEAR(2.0 * d1 - d2, limit, 1e-8);
}

TEST(ZetaDifference, SignFollowsThetaOrdering) {
  const LatticeBasis sq = square_basis();
  const LatticeBasis tri = triangular_basis();
  bool dominated = true;
  for (double a = 1.0; a < 10.0; a += 0.25) {
    dominated = dominated && theta_lattice(sq.dual(), a).value >= theta_lattice(tri.dual(), a).value;
  }
  ASSERT_TRUE(dominated);
  EXPECT_GT(zeta_difference_limit(sq.dual(), tri.dual()).value, 0.0);
}

TEST(ZetaDifference, RejectsCovolumeMismatch) {
  try {
    zeta_difference_limit(square_basis(1.0), triangular_basis(1.1));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CovolumeMismatch);
  }
}
