#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "maglab/errors.hpp"
#include "maglab/hyperbolic_dynamics.hpp"

using namespace maglab;

namespace {

// All distinct |trace| values > 2 over reduced words up to the given length.
std::set<double> brute_force_lengths(const FuchsianGroup& G, int maxlen, double lmax) {
  std::set<double> out;
  struct Node {
    Mat2 m;
    int last;
  };
  std::vector<Node> level{{Mat2::Identity(), 0}};
  for (int len = 1; len <= maxlen; ++len) {
    std::vector<Node> next;
    for (const auto& n : level)
      for (int l : {1, 2, 3, 4, -1, -2, -3, -4}) {
        if (l == -n.last) continue;
        const Mat2 m = n.m * G.letter(l);
        next.push_back({m, l});
        const double t = std::abs(m.trace());
        if (t > 2 + 1e-9) {
          const double ell = 2 * std::acosh(t / 2);
          if (ell <= lmax) out.insert(std::round(ell * 1e8) / 1e8);
        }
      }
    level.swap(next);
  }
  return out;
}

}  // namespace

TEST_SUITE("hyperbolic") {
  TEST_CASE("octagon group: relator and hyperbolic generators") {
    const FuchsianGroup G = build_genus2_group();
    CHECK(G.generators.size() == 4);
    CHECK(G.relator_residual() < 1e-9);
    for (const auto& g : G.generators) {
      CHECK(std::abs(g.determinant() - 1.0) < 1e-12);
      CHECK(std::abs(g.trace()) > 2.0);
    }
    CHECK(word_string(parse_word("abAB")) == "abAB");
    CHECK_THROWS_AS(parse_word("a1b"), InvalidArgument);
  }

  TEST_CASE("twisted groups keep the relator") {
    const FuchsianGroup G = twisted_genus2_group(0.3, -0.2, 0.15);
    CHECK(G.relator_residual() < 1e-9);
  }

  TEST_CASE("length spectrum up to twice the systole") {
    const FuchsianGroup G = build_genus2_group();
    // closed forms: cosh(l/2) = 1 + 1/sqrt2, 1 + sqrt2, 2 + sqrt2
    const double l1 = 2 * std::acosh(1 + 1 / std::sqrt(2.0));
    const double l2 = 2 * std::acosh(1 + std::sqrt(2.0));
    const double l3 = 2 * std::acosh(2 + std::sqrt(2.0));
    double sys = 1e9;
    for (const auto& g : G.generators) sys = std::min(sys, geodesic_length(g));
    CHECK(sys == doctest::Approx(l1).epsilon(1e-13));
    const LengthSpectrum S = enumerate_closed_geodesics(G, 2 * sys * (1 + 1e-12));
    REQUIRE(S.entries.size() == 16);
    std::map<long, int> mult;
    for (const auto& e : S.entries) mult[std::lround(e.length * 1e6)]++;
    CHECK(mult.size() == 4);
    CHECK(mult[std::lround(l1 * 1e6)] == 4);
    CHECK(mult[std::lround(l2 * 1e6)] == 2);
    CHECK(mult[std::lround(l3 * 1e6)] == 4);
    CHECK(mult[std::lround(2 * l1 * 1e6)] == 6);
    CHECK_FALSE(S.simple);
    for (const auto& e : S.entries) {
      const double t = e.element.trace();
      if (e.iterate == 1) CHECK(std::abs(e.poincare_det - (t * t - 4)) < 1e-9);
      CHECK(e.primitive_period * e.iterate == doctest::Approx(e.length).epsilon(1e-12));
      CHECK(std::abs(geodesic_length(e.element) - e.length) < 1e-12);
    }
    // brute force over short words finds nothing the enumeration missed
    const auto bf = brute_force_lengths(G, 5, 2 * sys * (1 + 1e-9));
    std::set<double> en;
    for (const auto& e : S.entries) en.insert(std::round(e.length * 1e8) / 1e8);
    for (double v : bf) CHECK(en.count(v) == 1);
  }

  TEST_CASE("cutoff below the systole gives an empty spectrum") {
    const FuchsianGroup G = build_genus2_group();
    CHECK(enumerate_closed_geodesics(G, 2.0).entries.empty());
    CHECK_THROWS_AS(enumerate_closed_geodesics(G, -1.0), InvalidArgument);
  }

  TEST_CASE("small word budget reports an incomplete enumeration") {
    const FuchsianGroup G = build_genus2_group();
    EnumerationOptions opt;
    opt.word_budget = 2;
    CHECK_THROWS_AS(enumerate_closed_geodesics(G, 6.0, opt), IncompleteEnumeration);
  }

  TEST_CASE("length is a class function") {
    const FuchsianGroup G = build_genus2_group();
    const std::vector<int> w = parse_word("abCd");
    const double ell = geodesic_length(G.word_matrix(w));
    for (size_t r = 1; r < w.size(); ++r) {
      std::vector<int> rot(w.begin() + r, w.end());
      rot.insert(rot.end(), w.begin(), w.begin() + r);
      CHECK(std::abs(geodesic_length(G.word_matrix(rot)) - ell) < 1e-12);
    }
    CHECK(std::abs(geodesic_length(G.word_matrix(w).inverse()) - ell) < 1e-12);
  }

  TEST_CASE("trace invariant is unchanged by 2 pi shifts of the action") {
    ClosedGeodesic g;
    g.length = 2.5;
    g.primitive_period = 2.5;
    g.poincare_det = 4 * std::pow(std::sinh(1.25), 2);
    for (int m : {0, 1, 3}) {
      const cplx c0 = trace_invariant(g, 0.7, m);
      for (int k = -3; k <= 3; ++k) CHECK(std::abs(trace_invariant(g, 0.7 + 2 * M_PI * k, m) - c0) < 1e-12);
      // |T#| / |det(I - P)|^(1/2)
      CHECK(std::abs(c0) == doctest::Approx(2.5 / std::sqrt(g.poincare_det)).epsilon(1e-12));
    }
  }

  TEST_CASE("parabolic and elliptic elements are rejected") {
    Mat2 p;
    p << 1, 1, 0, 1;
    CHECK_THROWS_AS(geodesic_length(p), NotHyperbolic);
    Mat2 e;
    e << 0, -1, 1, 0;
    CHECK_THROWS_AS(geodesic_length(e), NotHyperbolic);
  }

  TEST_CASE("geodesic flow along an axis closes and conserves energy") {
    const FuchsianGroup G = build_genus2_group();
    const MetricChart ch = flow_chart_upper_half_plane();
    const Orbit o = axis_orbit(ch, G.generators[1], 2000);
    CHECK(o.closed());
    CHECK(o.closure_defect < 1e-9);
    CHECK(o.energy_drift < 1e-9);
    CHECK(o.t.back() == doctest::Approx(geodesic_length(G.generators[1])).epsilon(1e-12));
  }

  TEST_CASE("flow on the flat torus is a straight line") {
    const MetricChart ch = make_flat_torus({2 * M_PI, 2 * M_PI});
    const double x0[2] = {0.1, 0.2};
    const double xi0[2] = {0.6, 0.8};
    const Orbit o = integrate_cogeodesic_flow(ch, x0, xi0, 3.0, 300);
    CHECK(std::abs(o.x.back()[0] - (0.1 + 1.8)) < 1e-12);
    CHECK(std::abs(o.x.back()[1] - (0.2 + 2.4)) < 1e-12);
  }
}
