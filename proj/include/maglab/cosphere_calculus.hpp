#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "maglab/geometry_core.hpp"

namespace maglab {

enum class ValueKind { scalar, horizontal_vector, vertical_vector };

// ---------------------------------------------------------------------------
// Two-dimensional isothermal charts: fields u(x1, x2, theta) with
// xi = e^{phi}(cos theta, sin theta), sampled on chart nodes x an equispaced angle grid.
// ---------------------------------------------------------------------------
class CosphereField {
 public:
  CosphereField() = default;
  CosphereField(const MetricChart& chart, int n_theta);

  const MetricChart& chart() const { return chart_; }
  const Grid& grid() const { return grid_; }
  int n_theta() const { return grid_.extent(2); }
  int size() const { return grid_.size(); }
  ValueKind kind = ValueKind::scalar;
  bool circle_valued = false;

  std::vector<cplx> values;

  double theta(int idx) const { return grid_.coord(idx, 2); }
  int base_index(int idx) const { return idx / n_theta(); }

  CosphereField like() const;  // same sampling, zero values
  static CosphereField sample(const MetricChart& chart, int n_theta,
                              const std::function<cplx(const double* x, double theta)>& f);

  CosphereField operator+(const CosphereField& o) const;
  CosphereField operator-(const CosphereField& o) const;
  CosphereField operator*(const CosphereField& o) const;
  CosphereField scaled(cplx s) const;
  CosphereField conj() const;

  // Nodes on interval axes within `margin` of an end are skipped.
  double sup_norm(int margin = 0) const;
  double max_imag() const;
  // (u|v) with the Liouville measure e^{2 phi} dx dtheta.
  cplx inner(const CosphereField& o) const;
  double norm2() const { return inner(*this).real(); }
  // Fiber average, as a field constant in theta.
  CosphereField fiber_mean() const;

 private:
  MetricChart chart_;
  Grid grid_;
};

CosphereField apply_H(const CosphereField& u);
CosphereField apply_Hperp(const CosphereField& u);
CosphereField apply_V(const CosphereField& u);
// K at the base point of each node, broadcast over the fiber.
CosphereField curvature_field(const CosphereField& like);

// ---------------------------------------------------------------------------
// General n-dimensional charts: fields on S*M stored as polynomials in xi of degree <= d
// with coefficients sampled on chart nodes. A field is read on S*M by evaluating at |xi|_g = 1,
// so each homogeneous part stands for its degree-0 extension.
// ---------------------------------------------------------------------------
struct MonomialBasis {
  int nvars = 0;
  int degree = 0;
  std::vector<std::array<int, 3>> exps;
  int index(const std::array<int, 3>& e) const;
  static const MonomialBasis& get(int nvars, int degree);
};

class FiberPolyField {
 public:
  FiberPolyField() = default;
  FiberPolyField(const MetricChart& chart, int degree);

  const MetricChart& chart() const { return *chart_; }
  int degree() const { return degree_; }
  int nterms() const { return static_cast<int>(basis_->exps.size()); }
  int nodes() const { return nodes_; }
  const MonomialBasis& basis() const { return *basis_; }

  std::vector<cplx> c;  // c[node * nterms + term]

  static FiberPolyField from_function(const MetricChart& chart, const std::function<cplx(const double*)>& f);
  static FiberPolyField theta_lower(const MetricChart& chart, int k);  // xi_k
  static FiberPolyField theta_upper(const MetricChart& chart, int k);  // g^{kl} xi_l
  // One-form lift a_j(x) theta^j.
  static FiberPolyField one_form(const MetricChart& chart, const std::vector<std::function<double(const double*)>>& a);

  FiberPolyField operator+(const FiberPolyField& o) const;
  FiberPolyField operator-(const FiberPolyField& o) const;
  FiberPolyField operator*(const FiberPolyField& o) const;
  FiberPolyField scaled(cplx s) const;
  FiberPolyField conj() const;
  // Multiply by |xi|_g^{2m}; identity on S*M.
  FiberPolyField homogenized(int m) const;

  cplx eval(int node, const double* xi) const;
  double coeff_sup() const;

 private:
  std::shared_ptr<const MetricChart> chart_;
  const MonomialBasis* basis_ = nullptr;
  int degree_ = 0;
  int nodes_ = 0;
};

FiberPolyField apply_nabla(const FiberPolyField& u, int j);
FiberPolyField apply_Vj(const FiberPolyField& u, int j);
FiberPolyField apply_H(const FiberPolyField& u);
// R^l_{mjk} xi_l d/dxi_m applied to u.
FiberPolyField curvature_action(const FiberPolyField& u, int j, int k);

// Fiber quadrature on S^{n-1}: equispaced angles (n=2) or Gauss-Legendre x trapezoid (n=3),
// exact for polynomials of the requested degree. Weights sum to the sphere area.
struct FiberQuadrature {
  int n = 0;
  std::vector<std::array<double, 3>> omega;
  std::vector<double> w;
  static FiberQuadrature make(int n, int exact_degree);
};

// Values of fields on S*M at chart nodes x fiber nodes; unit covectors are theta = C omega with C C^T = g.
class FiberSamples {
 public:
  FiberSamples(const MetricChart& chart, const FiberQuadrature& q);
  int nodes() const { return nodes_; }
  int fiber() const { return static_cast<int>(q_.w.size()); }
  const std::array<double, 3>& theta(int node, int f) const { return theta_[node * fiber() + f]; }
  std::vector<cplx> eval(const FiberPolyField& u) const;
  // Integral over S*M of sum_k a_k conj(b_k) with optional metric contraction g^{jk}.
  double integrate(const std::vector<cplx>& a, const std::vector<cplx>& b) const;
  double integrate_metric(const std::vector<std::vector<cplx>>& a, const std::vector<std::vector<cplx>>& b) const;
  const MetricChart& chart() const { return chart_; }
  const std::vector<double>& base_weights() const { return bw_; }
  const FiberQuadrature& quadrature() const { return q_; }

 private:
  MetricChart chart_;
  FiberQuadrature q_;
  int nodes_ = 0;
  std::vector<std::array<double, 3>> theta_;
  std::vector<double> bw_;  // sqrt(det g) dx
};

// ---------------------------------------------------------------------------
// Residual suite
// ---------------------------------------------------------------------------
struct ResidualRecord {
  std::string identity_name;
  std::string chart;
  int resolution = 0;
  double residual = 0.0;
  double convergence_order = 0.0;  // log2(residual(res) / residual(2 res)); 0 when not measured
};
nlohmann::json to_json(const ResidualRecord& r);

using FieldFn2D = std::function<cplx(const double* x, double theta)>;
using PolyFieldFn = std::function<FiberPolyField(const MetricChart&)>;

// 2D angle-grid identities: [V,Hperp]=H, [Hperp,H]=KV, [H,V]=Hperp. Sup over nodes, interval
// axes lose `margin` nodes at each end.
std::vector<ResidualRecord> bracket_residuals(const MetricChart& chart, int n_theta,
                                              const std::vector<FieldFn2D>& test_fields, int margin = 4);
// nD polynomial identities: Euler relation, [V_j,theta_k], [V_j,V_k], structure equation,
// and the consistency of the two homogeneous-extension forms of V_j.
std::vector<ResidualRecord> bracket_residuals(const MetricChart& chart, const std::vector<PolyFieldFn>& test_fields,
                                              int margin = 4);

// Runs the suite at base and doubled resolution and fills convergence_order.
std::vector<ResidualRecord> bracket_convergence(const std::function<MetricChart(int)>& make_chart, int base_res,
                                                int n_theta, const std::vector<FieldFn2D>& test_fields);
std::vector<ResidualRecord> bracket_convergence(const std::function<MetricChart(int)>& make_chart, int base_res,
                                                const std::vector<PolyFieldFn>& test_fields);
// Doubling check: both residuals below `floor` counts as converged (roundoff level), otherwise
// the residual must drop by at least `factor`.
bool converged_on_doubling(double coarse, double fine, double factor = 10.0, double floor = 1e-11);

// Random smooth test fields: a few low modes, periodic in periodic directions.
FieldFn2D random_test_field(const MetricChart& chart, unsigned seed, int modes = 4);
PolyFieldFn random_poly_field(int degree, unsigned seed, int modes = 3);

double vertical_adjoint_residual(const MetricChart& chart, const FiberPolyField& phi, const FiberPolyField& psi, int j,
                                 int quad_degree = 8);

struct AffineFiberFunction {
  std::function<double(const double*)> f0;
  std::vector<std::function<double(const double*)>> f1;  // covector components a_j(x)
  cplx eval(const LocalGeometry& G, const double* x, const double* theta_lower) const;
};

struct SpecialFormNorms {
  double f, f0, f1, Vf;
};
SpecialFormNorms special_form_norms(const MetricChart& chart, const AffineFiberFunction& f, int quad_degree = 8);

// ---------------------------------------------------------------------------
// Transport, alpha/beta, Pestov
// ---------------------------------------------------------------------------
struct Orbit;  // hyperbolic_dynamics.hpp

struct TransportSolution {
  std::vector<double> t;
  std::vector<cplx> u;
  double line_integral = 0.0;
  double periodicity_defect = 0.0;
};
TransportSolution solve_transport_along_orbit(const MetricChart& chart, const Orbit& orbit, const AffineFiberFunction& f,
                                              cplx u0 = 1.0, double closure_tol = 1e-6);

struct AlphaBeta {
  CosphereField alpha, beta, f;
  double max_imag = 0.0;
};
AlphaBeta build_alpha_beta(const CosphereField& u);

struct AlphaBetaND {
  std::vector<std::vector<cplx>> alpha, beta;  // samples per component
  std::vector<cplx> f;
  double max_imag = 0.0;
  double contraction_residual = 0.0;  // max |<theta, alpha> + f|
};
AlphaBetaND build_alpha_beta(const FiberPolyField& u, const FiberSamples& s);

struct PestovReport {
  double transport_violation = 0.0;
  double beta_norm = 0.0;
  double full_residual = 0.0;        // |-|Hb|^2 + (Kb|b) + |Vf|^2 - |f|^2|
  double rearranged_residual = 0.0;  // |(n-1)|f0|^2 - (-|Hb|^2 + (Kb|b))|
  double f_norm2 = 0.0, Vf_norm2 = 0.0, f0_norm2 = 0.0, Hbeta_norm2 = 0.0, Kbeta = 0.0;
};
// 2D; throws PreconditionError when |Hu + i f u| exceeds transport_tol anywhere.
PestovReport pestov_residual(const CosphereField& u, const CosphereField& f, double transport_tol = 1e-8);
PestovReport pestov_residual(const CosphereField& u, const AffineFiberFunction& f, double transport_tol = 1e-8);
// nD, polynomial representation.
PestovReport pestov_residual(const FiberPolyField& u, const AffineFiberFunction& f, double transport_tol = 1e-8,
                             int quad_degree = 8);

// Hamiltonian decomposition check: (1/2) H_p applied to the degree-0 extension equals H on S*M.
double hamiltonian_decomposition_residual(const MetricChart& chart, const std::function<double(const double*, double)>& u,
                                          int samples = 64, unsigned seed = 7);

}  // namespace maglab
