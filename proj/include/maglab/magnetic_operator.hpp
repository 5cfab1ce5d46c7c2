#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "maglab/geometry_core.hpp"
#include "maglab/trig_series.hpp"

namespace maglab {

// Magnetic potential a = a_j dx_j and electric potential q on a flat torus, as trigonometric series.
struct PotentialData {
  MetricChart chart;
  std::vector<TrigSeries> a;
  TrigSeries q;

  double a_at(int j, const double* x) const { return a[j].real_at(x); }
  double q_at(const double* x) const { return q.real_at(x); }
  // b = da, component (j,k) = d_j a_k - d_k a_j
  TrigSeries curvature(int j, int k) const;
  nlohmann::json to_json() const;
};

PotentialData make_potential(const MetricChart& chart, std::vector<TrigSeries> a, TrigSeries q);
PotentialData zero_potential(const MetricChart& chart);

// theta = exp(i(2 pi <w, x/L> + psi(x))), psi single valued.
struct GaugeFunction {
  std::vector<int> winding;
  TrigSeries psi;
  cplx operator()(const double* x) const;
  // -i conj(theta) d theta = 2 pi w/L + d psi, component j.
  TrigSeries gauge_form(int j) const;
};

struct AssemblyReport {
  Eigen::MatrixXcd matrix;
  std::vector<std::vector<int>> modes;
  double hermitian_defect = 0.0;
  std::vector<std::string> warnings;
};

// Fourier-Galerkin matrix of sum_j (D_j + a_j)^2 + q on modes |k|_inf <= cutoff.
AssemblyReport assemble_schrodinger(const PotentialData& pot, int cutoff);

struct Spectrum {
  std::vector<double> values;
  std::vector<double> residuals;  // ||Pv - lambda v|| / ||P||, filled when vectors were computed
  double matrix_norm = 0.0;
};
Spectrum eigenvalues(const Eigen::MatrixXcd& P, int count, bool with_residuals = false);

PotentialData gauge_conjugate(const PotentialData& pot, const GaugeFunction& theta);

// sub(P)(x, xi) = 2 <a(x), xi>; xi is normalized to the cosphere first.
double subprincipal(const PotentialData& pot, const double* x, const double* xi);

// max_k |lambda_k(P_{a,q}) - lambda_k(P_{a~,q})| over the first `count` eigenvalues.
double isospectrality_check(const PotentialData& pot, const GaugeFunction& theta, int cutoff, int count);
double spectral_gap(const PotentialData& p1, const PotentialData& p2, int cutoff, int count);

// Line integral of a along the j-th basis loop through `base`.
double homology_flux(const std::vector<TrigSeries>& a, int j, const double* base);

}  // namespace maglab
