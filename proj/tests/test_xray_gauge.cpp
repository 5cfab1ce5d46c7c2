#include <cmath>
#include <random>

#include "doctest.h"
#include "maglab/errors.hpp"
#include "maglab/xray_gauge.hpp"

using namespace maglab;

namespace {

const std::vector<double> kTorus{2 * M_PI, 2 * M_PI};
const std::vector<std::vector<int>> kBasis{{1, 0}, {0, 1}};

std::vector<TrigSeries> random_form(std::mt19937_64& rng) {
  return {TrigSeries::random_real(kTorus, 2, 0.3, rng), TrigSeries::random_real(kTorus, 2, 0.3, rng)};
}

}  // namespace

TEST_SUITE("xray_gauge") {
  TEST_CASE("straight geodesics on a flat torus") {
    const ClosedCurve c = torus_geodesic({2 * M_PI, 3.0}, {1, 2}, {0.1, 0.2}, 128);
    CHECK(c.length == doctest::Approx(std::hypot(2 * M_PI, 6.0)).epsilon(1e-14));
    CHECK(xray_function([](const double*) { return 0.7; }, c) == doctest::Approx(0.7 * c.length).epsilon(1e-14));
    // constant one-form: <alpha, winding * period>
    const double v = xray_oneform(
        [](const double*, double* o) {
          o[0] = 0.3;
          o[1] = -0.2;
        },
        c);
    CHECK(v == doctest::Approx(0.3 * 2 * M_PI - 0.2 * 6.0).epsilon(1e-13));
    CHECK_THROWS_AS(torus_geodesic(kTorus, {0, 0}, {0, 0}), DegenerateOrbit);
  }

  TEST_CASE("exact forms have zero X-ray") {
    std::mt19937_64 rng(4);
    const TrigSeries psi = TrigSeries::random_real(kTorus, 3, 0.5, rng);
    const std::vector<TrigSeries> dpsi{psi.derivative(0), psi.derivative(1)};
    for (const auto& m : std::vector<std::vector<int>>{{1, 0}, {1, 1}, {2, -1}, {1, 3}}) {
      const ClosedCurve c = torus_geodesic(kTorus, m, {0.3, 0.5}, 256);
      CHECK(std::abs(xray_oneform(dpsi, c)) < 1e-12);
    }
  }

  TEST_CASE("records combine the two parts") {
    const std::vector<ClosedCurve> cs{torus_geodesic(kTorus, {1, 0}, {0, 0}), torus_geodesic(kTorus, {1, 1}, {0, 0})};
    const auto recs = xray_records([](const double*) { return 1.0; },
                                   [](const double*, double* o) {
                                     o[0] = 1.0;
                                     o[1] = 0.0;
                                   },
                                   cs);
    REQUIRE(recs.size() == 2);
    for (const auto& r : recs) CHECK(r.combined == doctest::Approx(r.xray_f0 + r.xray_f1));
    CHECK(recs[0].xray_f0 == doctest::Approx(2 * M_PI));
    CHECK(recs[1].xray_f1 == doctest::Approx(2 * M_PI));
    CHECK(xray_vanishing_check([](const double*) { return 0.0; }, [](const double*, double* o) { o[0] = o[1] = 0.0; },
                               cs) == 0.0);
  }

  TEST_CASE("axis curves of the octagon group") {
    const FuchsianGroup G = build_genus2_group();
    for (const char* w : {"a", "ab", "aC"}) {
      const Mat2 g = G.word_matrix(parse_word(w));
      const ClosedCurve c = axis_curve(g, 1024);
      CHECK(c.length == doctest::Approx(geodesic_length(g)).epsilon(1e-12));
      CHECK(xray_function([](const double*) { return 2.0; }, c) == doctest::Approx(2 * c.length).epsilon(1e-12));
    }
  }

  TEST_CASE("cohomology pairing reads exponent sums") {
    const std::vector<double> p{1.0, 2.0, 3.0, 4.0};
    CHECK(xray_cohomology(p, "aB") == doctest::Approx(-1.0));
    CHECK(xray_cohomology(p, "abAB") == doctest::Approx(0.0));
    CHECK(xray_cohomology(p, "ccd") == doctest::Approx(10.0));
    CHECK_THROWS_AS(xray_cohomology({1.0}, "b"), InvalidArgument);
  }

  TEST_CASE("gauge partners are recognized and the witness reproduces the difference") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 5; ++t) {
      const auto a = random_form(rng);
      GaugeFunction th{{static_cast<int>(t % 3) - 1, 2}, TrigSeries::random_real(kTorus, 2, 0.2, rng)};
      std::vector<TrigSeries> b{a[0] + th.gauge_form(0), a[1] + th.gauge_form(1)};
      const GaugeDecision d = gauge_equivalence_decision(a, b, kBasis, 1e-8);
      REQUIRE(d.verdict == Verdict::equivalent);
      REQUIRE(d.witness.has_value());
      CHECK(d.witness->winding == th.winding);
      for (int j = 0; j < 2; ++j) CHECK((a[j] + d.witness->gauge_form(j) - b[j]).l1_norm() < 1e-12);
    }
  }

  TEST_CASE("non-equivalent and inconclusive pairs") {
    std::mt19937_64 rng(8);
    const auto a = random_form(rng);
    // off-lattice constant flux
    std::vector<TrigSeries> b{a[0] + TrigSeries::constant(kTorus, 0.3), a[1]};
    CHECK(gauge_equivalence_decision(a, b, kBasis).verdict == Verdict::not_equivalent);
    // closedness fails
    std::vector<TrigSeries> c = a;
    c[0].add_real({0, 1}, 0.2, 0.0);
    const GaugeDecision dc = gauge_equivalence_decision(a, c, kBasis);
    CHECK(dc.verdict == Verdict::not_equivalent);
    CHECK(dc.curl_defect > 0.1);
    // windings that do not span
    std::vector<TrigSeries> e{a[0] + TrigSeries::constant(kTorus, 1.0), a[1]};
    CHECK(gauge_equivalence_decision(a, e, {{1, 0}}).verdict == Verdict::inconclusive);
    // index-2 sublattice: both fluxes integral, basis fluxes half-integral
    std::vector<TrigSeries> h{a[0] + TrigSeries::constant(kTorus, 0.5), a[1] + TrigSeries::constant(kTorus, 0.5)};
    CHECK(gauge_equivalence_decision(a, h, {{1, 1}, {1, -1}}).verdict == Verdict::not_equivalent);
    CHECK(gauge_equivalence_decision(a, h, kBasis).verdict == Verdict::not_equivalent);
    CHECK(verdict_name(Verdict::inconclusive) == "inconclusive");
  }

  TEST_CASE("hodge potential recovers the exact part") {
    std::mt19937_64 rng(13);
    const TrigSeries psi = TrigSeries::random_real(kTorus, 3, 0.4, rng);
    std::vector<TrigSeries> w{psi.derivative(0) + TrigSeries::constant(kTorus, 0.2), psi.derivative(1)};
    const TrigSeries p = hodge_potential(w);
    for (int j = 0; j < 2; ++j) CHECK((p.derivative(j) - psi.derivative(j)).l1_norm() < 1e-13);
    CHECK(std::abs(p.mean()) < 1e-15);
  }
}
