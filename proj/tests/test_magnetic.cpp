#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "maglab/errors.hpp"
#include "maglab/magnetic_operator.hpp"

using namespace maglab;

namespace {

const std::vector<double> kCircle{2 * M_PI};
const std::vector<double> kTorus{2 * M_PI, 2 * M_PI};

std::vector<double> circle_exact(double L, double c, int cutoff, int count) {
  std::vector<double> ex;
  for (int k = -cutoff; k <= cutoff; ++k) ex.push_back(std::pow(2 * M_PI * k / L + c, 2));
  std::sort(ex.begin(), ex.end());
  ex.resize(count);
  return ex;
}

PotentialData random_torus_potential(std::mt19937_64& rng) {
  std::vector<TrigSeries> a{TrigSeries::random_real(kTorus, 2, 0.3, rng), TrigSeries::random_real(kTorus, 2, 0.3, rng)};
  return make_potential(make_flat_torus(kTorus), a, TrigSeries::random_real(kTorus, 2, 0.5, rng));
}

}  // namespace

TEST_SUITE("magnetic") {
  TEST_CASE("constant potential on a circle: (k 2pi/L + c)^2") {
    for (double L : {2 * M_PI, 3.0}) {
      for (double c : {0.0, 0.25, 0.7}) {
        const std::vector<double> P{L};
        const PotentialData pot = make_potential(make_flat_torus(P), {TrigSeries::constant(P, c)}, TrigSeries(P));
        const Spectrum s = eigenvalues(assemble_schrodinger(pot, 16).matrix, 20, true);
        const auto ex = circle_exact(L, c, 16, 20);
        for (int k = 0; k < 20; ++k) CHECK(s.values[k] == doctest::Approx(ex[k]).epsilon(1e-12));
        for (double r : s.residuals) CHECK(r < 1e-12);
      }
    }
  }

  TEST_CASE("constant electric potential shifts the spectrum") {
    const PotentialData pot =
        make_potential(make_flat_torus(kTorus), {TrigSeries(kTorus), TrigSeries(kTorus)}, TrigSeries::constant(kTorus, 1.5));
    const Spectrum s = eigenvalues(assemble_schrodinger(pot, 6).matrix, 10);
    // 0, then 1 four times, then 2 four times, plus 1.5
    const double ex[10] = {0, 1, 1, 1, 1, 2, 2, 2, 2, 4};
    for (int k = 0; k < 10; ++k) CHECK(s.values[k] == doctest::Approx(ex[k] + 1.5).epsilon(1e-12));
  }

  TEST_CASE("assembled matrix is Hermitian") {
    std::mt19937_64 rng(3);
    const AssemblyReport A = assemble_schrodinger(random_torus_potential(rng), 6);
    CHECK(A.hermitian_defect < 1e-13);
    CHECK(A.matrix.rows() == 13 * 13);
    CHECK(A.modes.size() == 13u * 13u);
  }

  TEST_CASE("gauge partners are isospectral, a shifted flux is not") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2; ++trial) {
      const PotentialData pot = random_torus_potential(rng);
      GaugeFunction th{{1, -1}, TrigSeries::random_real(kTorus, 2, 0.1, rng)};
      CHECK(isospectrality_check(pot, th, 12, 20) < 1e-6);
      PotentialData shifted = pot;
      shifted.a[0] = shifted.a[0] + TrigSeries::constant(kTorus, 0.25);
      CHECK(spectral_gap(pot, shifted, 12, 20) > 1e-3);
    }
  }

  TEST_CASE("circle gauge with integer winding") {
    const PotentialData pot =
        make_potential(make_flat_torus(kCircle), {TrigSeries::constant(kCircle, 0.25)}, TrigSeries(kCircle));
    std::mt19937_64 rng(5);
    GaugeFunction th{{2}, TrigSeries::random_real(kCircle, 2, 0.1, rng)};
    CHECK(isospectrality_check(pot, th, 48, 50) < 1e-8);
  }

  TEST_CASE("gauge function and its form") {
    std::mt19937_64 rng(9);
    GaugeFunction th{{1, 2}, TrigSeries::random_real(kTorus, 2, 0.3, rng)};
    const double x[2] = {0.3, 1.1};
    CHECK(std::abs(std::abs(th(x)) - 1.0) < 1e-14);
    // -i conj(theta) d theta by central differences
    const double h = 1e-5;
    for (int j = 0; j < 2; ++j) {
      double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
      xp[j] += h;
      xm[j] -= h;
      const cplx d = (th(xp) - th(xm)) / (2 * h);
      const cplx form = cplx(0, -1) * std::conj(th(x)) * d;
      CHECK(std::abs(form - th.gauge_form(j).real_at(x)) < 1e-8);
    }
  }

  TEST_CASE("subprincipal symbol is 2<a, xi/|xi|>") {
    std::mt19937_64 rng(2);
    const PotentialData pot = random_torus_potential(rng);
    const double x[2] = {0.7, -0.4};
    const double xi[2] = {3.0, 4.0};
    CHECK(subprincipal(pot, x, xi) == doctest::Approx(2 * (0.6 * pot.a_at(0, x) + 0.8 * pot.a_at(1, x))));
    const double z[2] = {0, 0};
    CHECK_THROWS_AS(subprincipal(pot, x, z), InvalidArgument);
  }

  TEST_CASE("homology flux") {
    std::vector<TrigSeries> a{TrigSeries::constant(kTorus, 0.3), TrigSeries(kTorus)};
    a[0].add_real({0, 1}, 1.0, 0.0);  // cos x2
    a[0].add_real({1, 0}, 0.0, 0.5);  // integrates to zero along x1
    for (double b : {0.0, 1.0, 2.5}) {
      const double base[2] = {0.4, b};
      CHECK(homology_flux(a, 0, base) == doctest::Approx((0.3 + std::cos(b)) * 2 * M_PI).epsilon(1e-12));
      CHECK(std::abs(homology_flux(a, 1, base)) < 1e-12);
    }
  }

  TEST_CASE("curvature of the potential") {
    std::vector<TrigSeries> a{TrigSeries(kTorus), TrigSeries(kTorus)};
    a[1].add_real({1, 0}, 0.0, 1.0);  // a2 = sin x1, b12 = cos x1
    const PotentialData pot = make_potential(make_flat_torus(kTorus), a, TrigSeries(kTorus));
    const double x[2] = {0.9, 0.2};
    CHECK(pot.curvature(0, 1).real_at(x) == doctest::Approx(std::cos(0.9)));
  }

  TEST_CASE("errors") {
    const PotentialData pot = zero_potential(make_flat_torus(kCircle));
    const auto M = assemble_schrodinger(pot, 2).matrix;
    CHECK_THROWS_AS(eigenvalues(M, 6), InsufficientModes);
    CHECK_THROWS_AS(assemble_schrodinger(pot, 0), InvalidArgument);
    TrigSeries complex_a(kCircle);
    complex_a.add({1}, cplx(1, 0));
    CHECK_THROWS_AS(make_potential(make_flat_torus(kCircle), {complex_a}, TrigSeries(kCircle)), InvalidArgument);
    CHECK_THROWS_AS(assemble_schrodinger(PotentialData{bumpy_torus(8, 0.1), {}, {}}, 4), KindMismatch);
  }
}
