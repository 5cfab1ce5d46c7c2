#include <cmath>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/bessel_prime.hpp>

#include "doctest.h"
#include "maglab/cli_runner.hpp"
#include "maglab/errors.hpp"
#include "maglab/steklov_symbol.hpp"

using namespace maglab;

namespace {

// Power series of sqrt(1 + b s + c s^2) in s, by G^2 = P.
std::vector<double> sqrt_series(double b, double c, int n) {
  const std::vector<double> P{1.0, b, c};
  std::vector<double> G(n + 1, 0.0);
  G[0] = 1.0;
  for (int k = 1; k <= n; ++k) {
    double s = k < 3 ? P[k] : 0.0;
    for (int i = 1; i < k; ++i) s -= G[i] * G[k - i];
    G[k] = s / 2.0;
  }
  return G;
}

JetFn constant_jet(double v) {
  return [v](int l, const double*) { return l == 0 ? v : 0.0; };
}

}  // namespace

TEST_SUITE("steklov_symbol") {
  TEST_CASE("flat half-space with constant potentials: expansion of sqrt(|xi + a|^2 + q)") {
    // On the half-space the DN map is the multiplier sqrt(|k + a|^2 + q); its homogeneous pieces are
    // the 1/|xi| expansion of |xi| sqrt(1 + 2<a, w>/|xi| + (|a|^2 + q)/|xi|^2).
    const int J = 4;
    const double a1 = 0.3, a2 = -0.2, q = 0.7;
    const BoundaryJets jets = flat_jets({2 * M_PI, 2 * M_PI}, 8, J, {constant_jet(a1), constant_jet(a2)}, constant_jet(q));
    const PhgSymbol s = symbol_factorize(jets, J);
    for (const auto& w : unit_covectors(s, 5)) {
      const auto G = sqrt_series(2 * (a1 * w[0] + a2 * w[1]), a1 * a1 + a2 * a2 + q, J + 1);
      for (int d = 1; d >= -J; --d) {
        const cplx v = s.eval_unit(d, 5, w.data());
        CHECK_MESSAGE(std::abs(v - G[1 - d]) < 1e-12, "degree " << d);
      }
      // eval scales by |xi|^d
      const double xi[2] = {3 * w[0], 3 * w[1]};
      CHECK(std::abs(s.eval(-1, 5, xi) - G[2] / 3.0) < 1e-12);
    }
  }

  TEST_CASE("flat circle boundary matches the same expansion for both signs of xi") {
    const int J = 3;
    const double a = 0.4, q = 1.0;
    const PhgSymbol s = symbol_factorize(flat_jets({2 * M_PI}, 8, J, {constant_jet(a)}, constant_jet(q)), J);
    for (double w : {1.0, -1.0}) {
      const auto G = sqrt_series(2 * a * w, a * a + q, J + 1);
      for (int d = 1; d >= -J; --d) CHECK(std::abs(s.eval_unit(d, 0, &w) - G[1 - d]) < 1e-12);
    }
  }

  TEST_CASE("disk oracle against modified Bessel functions") {
    for (double q : {0.5, 1.0}) {
      const double r = std::sqrt(q);
      for (int k : {1, 5, 16, 40, 64}) {
        const double exact = r * boost::math::cyl_bessel_i_prime(k, r) / boost::math::cyl_bessel_i(k, r);
        const OracleValue o = disk_dn_oracle(RadialProfile{{}}, RadialProfile{{q}}, k);
        CHECK_MESSAGE(std::abs(o.extrapolated - exact) < 1e-10 * exact, "q " << q << " k " << k);
        CHECK(std::abs(disk_dn_oracle(RadialProfile{{}}, RadialProfile{{q}}, -k).extrapolated - exact) < 1e-10 * exact);
      }
    }
    // no potential: sigma_k = |k|
    CHECK(disk_dn_oracle(RadialProfile{{}}, RadialProfile{{0.0}}, 7).extrapolated == doctest::Approx(7.0).epsilon(1e-12));
  }

  TEST_CASE("disk symbol against the oracle asymptotics") {
    const int J = 4;
    for (double q : {0.5, 1.0}) {
      const RadialProfile a{{}}, qp{{q}};
      const PhgSymbol s = symbol_factorize(disk_jets(a, qp, J), J);
      std::vector<OracleValue> ov;
      for (int k = 16; k <= 64; k += 4) ov.push_back(disk_dn_oracle(a, qp, k));
      const AsymptoticFit fit = asymptotic_match(ov, s, 3);
      CHECK(std::abs(fit.fitted_minus1 - fit.predicted_minus1) < 0.02 * std::abs(fit.predicted_minus1));
      CHECK((fit.exact || fit.residual_order >= 1.9));
      // a wrong degree -1 coefficient leaves a 1/k residual
      const AsymptoticFit bad = asymptotic_match(ov, s, 3, {{-1, -fit.predicted_minus1}});
      CHECK(bad.residual_order < 1.5);
    }
  }

  TEST_CASE("magnetic disk: odd part of the symbol against +k and -k oracle values") {
    const int J = 4;
    const RadialProfile a{{0, 0, 0.3}}, q{{0.0}};
    const PhgSymbol s = symbol_factorize(disk_jets(a, q, J), J);
    double prev = 1.0;
    for (int k : {16, 32, 64}) {
      const double diff = disk_dn_oracle(a, q, k).extrapolated - disk_dn_oracle(a, q, -k).extrapolated;
      double sym = 0.0;
      for (int d = 1; d >= 1 - J; --d) {
        double xp = 1.0, xm = -1.0;
        sym += (s.eval_unit(d, 0, &xp) - s.eval_unit(d, 0, &xm)).real() * std::pow(k, d);
      }
      const double err = std::abs(diff - sym);
      CHECK(err < 1e-4);
      CHECK(err < prev);
      prev = err;
    }
  }

  TEST_CASE("half-density subprincipal symbol is real on a curved boundary") {
    const BoundaryJets A = steklov_preset("curved", 16, 1, 0.3, {});
    const PhgSymbol s = symbol_factorize(A, 1);
    const HomTerm h = half_density_subprincipal(s), sub = subprincipal_term(s);
    double im = 0.0, plain = 0.0;
    for (int i = 0; i < A.grid.size(); ++i)
      for (const auto& xi : unit_covectors(s, i)) {
        im = std::max(im, std::abs(eval_term(s, h, i, xi.data()).imag()));
        plain = std::max(plain, std::abs(eval_term(s, sub, i, xi.data()).imag()));
      }
    CHECK(im < 1e-8);
    CHECK(plain > 1e-3);  // the coordinate density is not constant here
  }

  TEST_CASE("subprincipal difference equals <a~ - a, xi^sharp> for prescribed and gauge pairs") {
    const int n = 16;
    const BoundaryJets A = steklov_preset("curved", n, 1, 0.3, {});
    const PhgSymbol sA = symbol_factorize(A, 1);
    const HomTerm subA = subprincipal_term(sA);
    BoundaryJets B = A;
    const Eigen::ArrayXcd d0 = A.grid.sample([](const double* x) { return cplx(0.2 * std::sin(x[0] - x[1]) + 0.1); });
    const Eigen::ArrayXcd d1 = A.grid.sample([](const double* x) { return cplx(0.15 * std::cos(2 * x[1])); });
    B.a[0][0] += d0;
    B.a[1][0] += d1;
    const PhgSymbol sB = symbol_factorize(B, 1);
    const HomTerm subB = subprincipal_term(sB);
    double err = 0.0;
    for (int i = 0; i < A.grid.size(); ++i)
      for (const auto& xi : unit_covectors(sA, i)) {
        cplx pred = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) pred += (a == 0 ? d0(i) : d1(i)) * sA.ginv[a * 2 + b].t[0](i) * xi[b];
        err = std::max(err, std::abs(eval_term(sB, subB, i, xi.data()) - eval_term(sA, subA, i, xi.data()) - pred));
      }
    CHECK(err < 1e-8);

    // conjugation by a boundary gauge reproduces the symbol of the shifted data at degrees 1 and 0
    BoundaryGauge th{{1, -1}, A.grid.sample([](const double* x) { return cplx(0.2 * std::sin(x[0]) + 0.1 * std::cos(x[0] + x[1])); })};
    BoundaryJets C = A;
    for (int a = 0; a < 2; ++a) C.a[a][0] += gauge_form(A.grid, th, a);
    const PhgSymbol conj = gauge_shift_subprincipal(sA, th);
    const PhgSymbol sC = symbol_factorize(C, 1);
    CHECK(term_difference(conj, sC, 1) < 1e-10);
    CHECK(term_difference(conj, sC, 0) < 1e-6);
  }

  TEST_CASE("gauge form of a pure winding") {
    const BoundaryGrid g({2 * M_PI, 4 * M_PI}, 8);
    BoundaryGauge th{{2, 3}, Eigen::ArrayXcd::Zero(g.size())};
    CHECK((gauge_form(g, th, 0) - 2.0).abs().maxCoeff() < 1e-14);
    CHECK((gauge_form(g, th, 1) - 1.5).abs().maxCoeff() < 1e-14);
  }

  TEST_CASE("parity split of s + <v, xi^sharp>") {
    const BoundaryJets A = steklov_preset("curved", 8, 1, 0.3, {});
    const PhgSymbol s = symbol_factorize(A, 1);
    const ParitySplit p = parity_split(s, [&](int i, const double* xi) {
      cplx v = 0.3;
      const double w[2] = {0.1, -0.2};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) v += w[a] * s.ginv[a * 2 + b].t[0](i) * xi[b];
      return v;
    });
    CHECK(p.residual < 1e-12);
    CHECK((p.even - 0.3).abs().maxCoeff() < 1e-12);
    CHECK((p.odd[0] - 0.1).abs().maxCoeff() < 1e-12);
    CHECK((p.odd[1] + 0.2).abs().maxCoeff() < 1e-12);
    // a degree-two fiber function is not of this form
    const ParitySplit bad = parity_split(s, [](int, const double* xi) { return cplx(xi[0] * xi[1]); });
    CHECK(bad.residual > 1e-3);
  }

  TEST_CASE("difference structure extracts a q jet at the leading lower order") {
    const int J = 2;
    const BoundaryJets A = steklov_preset("flat", 8, J, 0.5, {});
    BoundaryJets B = A;
    const Eigen::ArrayXcd inj = A.grid.sample([](const double* x) { return cplx(0.2 * std::cos(x[0] - x[1])); });
    B.q[0] += inj;
    const DifferenceStructure d = symbol_difference_structure(symbol_factorize(A, J), symbol_factorize(B, J), A, B, 1);
    CHECK(d.parity_residual < 1e-10);
    CHECK((d.dq + inj).abs().maxCoeff() < 1e-10);
    CHECK(d.T < 1e-10);
    CHECK_THROWS_AS(symbol_difference_structure(symbol_factorize(A, J), symbol_factorize(B, J), A, B, 3),
                    InvalidArgument);
  }

  TEST_CASE("boundary grid helpers") {
    const BoundaryGrid g({2 * M_PI, 2 * M_PI}, 8);
    const Eigen::ArrayXcd f = g.sample([](const double* x) { return cplx(std::sin(x[0]) * std::cos(2 * x[1])); });
    const Eigen::ArrayXcd df = g.diff(f, 1);
    const Eigen::ArrayXcd ex = g.sample([](const double* x) { return cplx(-2 * std::sin(x[0]) * std::sin(2 * x[1])); });
    CHECK((df - ex).abs().maxCoeff() < 1e-13);
    CHECK(g.fourier(f).size() == 4u);
    const double x[2] = {0.3, 0.8};
    CHECK(g.to_series(f).real_at(x) == doctest::Approx(std::sin(0.3) * std::cos(1.6)));
  }

  TEST_CASE("Taylor field algebra") {
    const int nodes = 3;
    TaylorField x = TaylorField::constant(nodes, 3, 0.0);
    x.t[1].setConstant(1.0);  // x_n
    const TaylorField one = TaylorField::constant(nodes, 3, 1.0);
    const TaylorField r = (one - x).reciprocal();  // 1 + x + x^2 + x^3
    for (int l = 0; l <= 3; ++l) CHECK(std::abs(r.t[l](1) - 1.0) < 1e-15);
    CHECK(std::abs(r.jet(3)(0) - 6.0) < 1e-14);
    CHECK(std::abs(r.dn().t[2](2) - 3.0) < 1e-15);
  }
}
