#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "maglab/cosphere_calculus.hpp"
#include "maglab/hyperbolic_dynamics.hpp"
#include "maglab/magnetic_operator.hpp"
#include "maglab/trig_series.hpp"

namespace maglab {

// Closed unit-speed curve sampled uniformly in arclength over one period; the last sample
// repeats the first, so trapezoid sums are the periodic rule.
struct ClosedCurve {
  std::string label;
  double length = 0.0;
  std::vector<std::vector<double>> x;     // positions
  std::vector<std::vector<double>> xdot;  // unit tangent vectors
};

// Straight closed geodesic on a flat torus with integer winding m through `base`.
ClosedCurve torus_geodesic(const std::vector<double>& periods, const std::vector<int>& winding,
                           const std::vector<double>& base, int samples = 256);
// Axis of a hyperbolic element on the upper half-plane, one period.
ClosedCurve axis_curve(const Mat2& g, int samples = 2048);

using PointFn = std::function<double(const double*)>;
using OneFormFn = std::function<void(const double*, double*)>;  // writes a_j(x)

double xray_function(const PointFn& q, const ClosedCurve& c);
double xray_oneform(const OneFormFn& a, const ClosedCurve& c);
double xray_function(const TrigSeries& q, const ClosedCurve& c);
double xray_oneform(const std::vector<TrigSeries>& a, const ClosedCurve& c);

// A cohomology class on the closed surface given by its periods on the generators a, b, c, d.
// The integral over a closed geodesic is the pairing with its homology class, read off from the
// exponent sums of its word.
double xray_cohomology(const std::vector<double>& periods, const std::string& word);

struct XRayRecord {
  std::string geodesic;
  double length = 0.0;
  double xray_f0 = 0.0;
  double xray_f1 = 0.0;
  double combined = 0.0;
  nlohmann::json to_json() const;
};

// Values of the X-rays of the degree-0 and degree-1 parts of sigma_Q and their sum on each curve.
// Unit speed means theta^sharp equals the tangent, so the degree-1 part integrates as a one-form.
std::vector<XRayRecord> xray_records(const PointFn& f0, const OneFormFn& f1, const std::vector<ClosedCurve>& curves);
// max over curves of |I(sigma_Q)|.
double xray_vanishing_check(const PointFn& f0, const OneFormFn& f1, const std::vector<ClosedCurve>& curves);

enum class Verdict { equivalent, not_equivalent, inconclusive };
std::string verdict_name(Verdict v);

struct GaugeDecision {
  Verdict verdict = Verdict::inconclusive;
  double curl_defect = 0.0;               // coefficient l1 bound of |d(a - a~)|
  std::vector<double> flux_defects;       // distance of each flux to 2 pi Z
  std::vector<std::vector<int>> windings;
  std::optional<GaugeFunction> witness;   // a~ = a - i conj(theta) d theta
  std::string reason;
  nlohmann::json to_json() const;
};

// Decides whether two real one-forms on a flat torus differ by -i conj(theta) d theta for some
// theta : T^n -> S^1. The fluxes are taken along straight closed geodesics with the given windings;
// a set of windings that does not span Z^n gives an inconclusive verdict.
GaugeDecision gauge_equivalence_decision(const std::vector<TrigSeries>& a, const std::vector<TrigSeries>& a_tilde,
                                         const std::vector<std::vector<int>>& windings, double tol = 1e-8);

// Exact part of a one-form: psi with d psi equal to the non-constant modes of w.
TrigSeries hodge_potential(const std::vector<TrigSeries>& w);

}  // namespace maglab
