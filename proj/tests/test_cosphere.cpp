#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "maglab/cosphere_calculus.hpp"
#include "maglab/errors.hpp"
#include "maglab/hyperbolic_dynamics.hpp"

using namespace maglab;

namespace {

std::vector<FieldFn2D> fields(const MetricChart& c, int n) {
  std::vector<FieldFn2D> f;
  for (int s = 0; s < n; ++s) f.push_back(random_test_field(c, 11 + s));
  return f;
}

double worst(const std::vector<ResidualRecord>& r) {
  double w = 0.0;
  for (const auto& x : r) w = std::max(w, x.residual);
  return w;
}

}  // namespace

TEST_SUITE("cosphere") {
  TEST_CASE("angle-grid operators on the flat torus, hand-computed") {
    const MetricChart c = make_flat_torus({2 * M_PI, 2 * M_PI}, {16, 16});
    // u = cos(x1) sin(theta): H u = cos th d1 u + sin th d2 u, V u = d_theta u
    const CosphereField u =
        CosphereField::sample(c, 16, [](const double* x, double t) { return cplx(std::cos(x[0]) * std::sin(t)); });
    const CosphereField H = apply_H(u), V = apply_V(u), P = apply_Hperp(u);
    double eH = 0.0, eV = 0.0, eP = 0.0;
    for (int i = 0; i < u.size(); ++i) {
      const double x = u.grid().coord(i, 0), t = u.theta(i);
      eH = std::max(eH, std::abs(H.values[i] - (-std::sin(x) * std::sin(t) * std::cos(t))));
      eV = std::max(eV, std::abs(V.values[i] - std::cos(x) * std::cos(t)));
      // H_perp = sin th d1 - cos th d2 on a flat chart
      eP = std::max(eP, std::abs(P.values[i] + std::sin(t) * std::sin(x) * std::sin(t)));
    }
    CHECK(eH < 1e-12);
    CHECK(eV < 1e-12);
    CHECK(eP < 1e-12);
  }

  TEST_CASE("bracket identities on curved 2D charts") {
    const MetricChart b = bumpy_torus(24, 0.3);
    CHECK(worst(bracket_residuals(b, 16, fields(b, 2))) < 1e-8);
    const MetricChart h = hyperbolic_patch(48);
    CHECK(worst(bracket_residuals(h, 16, fields(h, 2))) < 1e-6);
  }

  TEST_CASE("bracket residuals drop under doubling on the hyperbolic patch") {
    auto make = [](int r) { return hyperbolic_patch(r); };
    const auto recs = bracket_convergence(make, 24, 16, fields(make(24), 2));
    std::map<std::string, std::pair<double, double>> by;
    for (const auto& r : recs) {
      auto& p = by[r.identity_name];
      (r.resolution == 24 ? p.first : p.second) = r.residual;
    }
    for (const auto& [id, p] : by) CHECK_MESSAGE(converged_on_doubling(p.first, p.second), id);
  }

  TEST_CASE("doubling rule") {
    CHECK(converged_on_doubling(1e-5, 9e-7));
    CHECK_FALSE(converged_on_doubling(1e-5, 2e-6));
    CHECK(converged_on_doubling(5e-12, 8e-12));
  }

  TEST_CASE("polynomial identities on the warped three-torus") {
    std::vector<PolyFieldFn> f{random_poly_field(2, 5)};
    const auto r = bracket_residuals(warped_three_torus(16, 0.1), f);
    CHECK(!r.empty());
    CHECK(worst(r) < 1e-6);
  }

  TEST_CASE("vertical adjoint and special form norms") {
    const MetricChart c = warped_three_torus(8, 0.2);
    const FiberPolyField phi = FiberPolyField::theta_lower(c, 0) * FiberPolyField::theta_lower(c, 2);
    const FiberPolyField psi = FiberPolyField::from_function(c, [](const double* x) { return cplx(std::sin(x[1])); }) *
                               FiberPolyField::theta_lower(c, 1);
    for (int j = 0; j < 3; ++j) CHECK(vertical_adjoint_residual(c, phi, psi, j) < 1e-10);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int n : {2, 3}) {
      const MetricChart ch = n == 2 ? bumpy_torus(12, 0.3) : warped_three_torus(8, 0.1);
      for (int k = 0; k < 5; ++k) {
        const double a = U(rng), b = U(rng), cc = U(rng);
        AffineFiberFunction f;
        f.f1.push_back([a](const double* x) { return a + std::sin(x[0]); });
        f.f1.push_back([b](const double* x) { return b * std::cos(x[1]); });
        if (n == 3) f.f1.push_back([cc](const double* x) { return cc + 0.2 * std::sin(x[2]); });
        const SpecialFormNorms s = special_form_norms(ch, f);
        CHECK(s.Vf / s.f1 == doctest::Approx(n - 1.0).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("Pestov identity holds for circle-valued fields with fiber dependence") {
    // f = i conj(u) H u is not affine here, the unrearranged identity still holds
    const MetricChart c = bumpy_torus(32, 0.3);
    const CosphereField u = CosphereField::sample(c, 32, [](const double* x, double t) {
      return std::polar(1.0, 0.4 * std::sin(x[0] + t) + 0.3 * std::cos(x[1] - 2 * t));
    });
    const CosphereField f = (u.conj() * apply_H(u)).scaled(cplx(0, 1));
    const PestovReport r = pestov_residual(u, f, 1e-8);
    CHECK(r.beta_norm > 0.1);
    CHECK(r.full_residual < 1e-8 * (r.f_norm2 + r.Hbeta_norm2));
  }

  TEST_CASE("Pestov on manufactured transport solutions: beta vanishes") {
    const MetricChart c = hyperbolic_patch(48);
    auto psi = [](const double* x) { return 0.3 * std::sin(x[0]) * x[1] + 0.2 * std::cos(2 * x[0] + x[1]); };
    const CosphereField u =
        CosphereField::sample(c, 16, [&](const double* x, double) { return std::polar(1.0, psi(x)); });
    AffineFiberFunction f;
    f.f1.push_back([](const double* x) { return -(0.3 * std::cos(x[0]) * x[1] - 0.4 * std::sin(2 * x[0] + x[1])); });
    f.f1.push_back([](const double* x) { return -(0.3 * std::sin(x[0]) - 0.2 * std::sin(2 * x[0] + x[1])); });
    const PestovReport r = pestov_residual(u, f, 1e-4);
    CHECK(r.beta_norm < 1e-12);
    CHECK(r.rearranged_residual < 1e-10);
    // a field that does not solve the transport equation is refused
    AffineFiberFunction g{[](const double*) { return 1.0; }, {}};
    CHECK_THROWS_AS(pestov_residual(u, g, 1e-4), PreconditionError);
  }

  TEST_CASE("alpha-beta decomposition of e^{i psi}") {
    const MetricChart c = make_flat_torus({2 * M_PI, 2 * M_PI, 2 * M_PI}, {16, 16, 16});
    const FiberPolyField u =
        FiberPolyField::from_function(c, [](const double* x) { return std::polar(1.0, 0.3 * std::sin(x[0] - x[2])); });
    const FiberSamples s(c, FiberQuadrature::make(3, 6));
    const AlphaBetaND ab = build_alpha_beta(u, s);
    CHECK(ab.max_imag < 1e-10);
    CHECK(ab.contraction_residual < 1e-12);
    CHECK_THROWS_AS(build_alpha_beta(u.scaled(2.0), s), InvalidArgument);
  }

  TEST_CASE("fiber quadrature integrates the sphere") {
    for (int n : {2, 3}) {
      const FiberQuadrature q = FiberQuadrature::make(n, 8);
      double area = 0.0, z4 = 0.0;
      for (size_t i = 0; i < q.w.size(); ++i) {
        area += q.w[i];
        z4 += q.w[i] * std::pow(q.omega[i][n - 1], 4);
      }
      CHECK(area == doctest::Approx(n == 2 ? 2 * M_PI : 4 * M_PI).epsilon(1e-13));
      // int z^4 over S^1 is 3pi/4, over S^2 it is 4pi/5
      CHECK(z4 == doctest::Approx(n == 2 ? 3 * M_PI / 4 : 4 * M_PI / 5).epsilon(1e-13));
    }
  }

  TEST_CASE("half Hamiltonian vector field of p matches H") {
    const MetricChart c = bumpy_torus(8, 0.3);
    const double r = hamiltonian_decomposition_residual(
        c, [](const double* x, double t) { return std::sin(x[0]) * std::cos(t) + std::cos(x[1] + 2 * t); });
    CHECK(r < 1e-8);
  }

  TEST_CASE("transport along a closed orbit") {
    const FuchsianGroup G = build_genus2_group();
    const MetricChart ch = flow_chart_upper_half_plane();
    const Orbit o = axis_orbit(ch, G.generators[0], 2000);
    const TransportSolution s = solve_transport_along_orbit(ch, o, {[](const double*) { return 0.7; }, {}});
    CHECK(s.line_integral == doctest::Approx(0.7 * geodesic_length(G.generators[0])).epsilon(1e-12));
    for (const auto& v : s.u) CHECK(std::abs(std::abs(v) - 1.0) < 1e-14);
  }

  TEST_CASE("kind checks") {
    CHECK_THROWS_AS(CosphereField(warped_three_torus(4, 0.1), 8), KindMismatch);
  }
}
