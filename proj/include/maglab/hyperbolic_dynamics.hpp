#pragma once

#include <array>
#include <complex>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maglab/errors.hpp"
#include "maglab/geometry_core.hpp"

namespace maglab {

using Mat2 = Eigen::Matrix2d;

// Generators act on the upper half-plane by Moebius maps. Words use letters a,b,c,d for the
// generators and capitals for inverses; internally letter i is +(i+1) and its inverse -(i+1).
struct FuchsianGroup {
  std::vector<Mat2> generators;
  std::vector<int> relator;
  // Every point of the plane lies within this distance of the orbit of i.
  double covering_radius = 0.0;
  std::string label;

  Mat2 letter(int l) const;
  Mat2 word_matrix(const std::vector<int>& w) const;
  double relator_residual() const;  // min over signs of max |R -+ I|
};

std::string word_string(const std::vector<int>& w);
std::vector<int> parse_word(const std::string& s);

FuchsianGroup build_genus2_group();
// Fenchel-Nielsen twists of the octagon group: b -> b a^s1, d -> d c^s2, and (c, d) conjugated by
// [a,b]^t. The relator is preserved exactly.
FuchsianGroup twisted_genus2_group(double s1, double s2, double t);

// Real power of a hyperbolic element, via its diagonalization.
Mat2 hyperbolic_power(const Mat2& m, double s);

// l = 2 arccosh(|tr|/2); throws NotHyperbolic when |tr| <= 2.
double geodesic_length(const Mat2& m, bool* near_parabolic = nullptr);
// Hyperbolic distance between i and g(i).
double displacement(const Mat2& g);

struct ClosedGeodesic {
  std::string word;
  Mat2 element = Mat2::Identity();
  double length = 0.0;
  double primitive_period = 0.0;
  double poincare_det = 0.0;
  int iterate = 1;
  int multiplicity = 1;  // number of distinct classes (up to inversion) sharing the length
};

struct LengthSpectrum {
  std::vector<ClosedGeodesic> entries;  // ascending length
  bool simple = true;
  double min_gap = 0.0;
  double tolerance = 1e-7;
  double achieved_radius = 0.0;
  int elements_explored = 0;
  int max_depth = 0;
};

struct EnumerationOptions {
  int word_budget = 12;
  double gap_tolerance = 1e-7;
  int threads = 0;  // 0: hardware concurrency
};

LengthSpectrum enumerate_closed_geodesics(const FuchsianGroup& group, double L_max,
                                          const EnumerationOptions& opt = {});

double poincare_det(const ClosedGeodesic& g);
// |T#| e^{i sub} e^{i m pi/2} / |det(Id - P)|^{1/2}
std::complex<double> trace_invariant(const ClosedGeodesic& g, double sub_integral, int maslov);

// Samples of a cogeodesic flow trajectory. Covectors carry lower indices.
struct Orbit {
  int dim = 2;
  std::vector<double> t;
  std::vector<std::array<double, 3>> x, xi;
  double energy_drift = 0.0;  // max | |xi|_g - 1 | before each renormalization
  // Distance between the final state, pulled back by the closing map if any, and the initial state.
  double closure_defect = -1.0;
  bool closed() const { return closure_defect >= 0.0; }
};

struct OrbitTruncated : Error {
  OrbitTruncated(const std::string& w, Orbit o)
      : Error("truncated", w), partial(std::make_shared<Orbit>(std::move(o))) {}
  std::shared_ptr<Orbit> partial;
};

// RK4 on the Hamiltonian (1/2)|xi|_g^2, unit speed; xi renormalized to the cosphere every step.
Orbit integrate_cogeodesic_flow(const MetricChart& chart, const double* x0, const double* xi0, double T, int steps);

// Moebius action on a point of the upper half-plane and a covector there.
void moebius_act(const Mat2& g, double* x, double* xi);

// Unit-speed orbit along the axis of a hyperbolic element on a hyperbolic chart; the closure
// defect compares the end state pulled back by g^{-1} with the start.
Orbit axis_orbit(const MetricChart& chart, const Mat2& g, int steps);
// Point at the top of the axis and the unit covector pointing toward the attracting fixed point.
void axis_initial_state(const Mat2& g, double* x, double* xi);

// Wide upper-half-plane chart used for flows and line integrals.
MetricChart flow_chart_upper_half_plane();

}  // namespace maglab
