#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "maglab/spectral.hpp"
#include "maglab/trig_series.hpp"

namespace maglab {

// Boundary torus T^m (m = 1 or 2) sampled on N points per axis, row-major with the last axis fastest.
class BoundaryGrid {
 public:
  BoundaryGrid() = default;
  BoundaryGrid(std::vector<double> periods, int n);

  int dim() const { return static_cast<int>(periods_.size()); }
  int n() const { return n_; }
  int size() const { return size_; }
  const std::vector<double>& periods() const { return periods_; }
  std::array<double, 2> point(int node) const;
  Eigen::ArrayXcd diff(const Eigen::ArrayXcd& f, int axis) const;
  Eigen::ArrayXcd sample(const std::function<cplx(const double*)>& f) const;
  // Fourier coefficients c_k, |k_j| < n/2, dropped below `floor`.
  std::vector<std::pair<std::vector<int>, cplx>> fourier(const Eigen::ArrayXcd& f, double floor = 1e-14) const;
  TrigSeries to_series(const Eigen::ArrayXcd& f, double floor = 1e-14) const;

 private:
  std::vector<double> periods_;
  int n_ = 0;
  int size_ = 0;
  Eigen::MatrixXd d_[2];
};

// Truncated Taylor series in the inward normal variable x_n: t[l] = d_n^l f / l! at x_n = 0,
// each a field on the boundary grid. `order` is the highest valid coefficient.
struct TaylorField {
  std::vector<Eigen::ArrayXcd> t;

  int order() const { return static_cast<int>(t.size()) - 1; }
  static TaylorField constant(int nodes, int order, cplx v);
  static TaylorField from_jets(const std::vector<Eigen::ArrayXcd>& jets);  // jets[l] = d_n^l f
  const Eigen::ArrayXcd& value() const { return t.at(0); }
  Eigen::ArrayXcd jet(int l) const;  // d_n^l f at x_n = 0

  TaylorField operator+(const TaylorField& o) const;
  TaylorField operator-(const TaylorField& o) const;
  TaylorField operator*(const TaylorField& o) const;
  TaylorField scaled(cplx s) const;
  TaylorField dn() const;
  TaylorField dx(const BoundaryGrid& g, int axis) const;
  TaylorField reciprocal() const;
  TaylorField truncated(int order) const;
  double sup() const;  // max |t[0]|
};

// Normal-derivative jets of normalized data in boundary normal coordinates
// g = g_{ab}(x', x_n) dx_a dx_b + dx_n^2, a_n = 0. Metric jets run over l = 0..J+1, magnetic jets
// over 0..J, electric jets over 0..J-1 (a longer q is accepted).
struct BoundaryJets {
  BoundaryGrid grid;
  int J = 0;
  std::vector<std::vector<Eigen::ArrayXcd>> ginv;  // ginv[a*m + b][l]
  std::vector<std::vector<Eigen::ArrayXcd>> a;     // a[alpha][l]
  std::vector<Eigen::ArrayXcd> q;                  // q[l]

  int dim() const { return grid.dim(); }
  void validate() const;
  nlohmann::json to_json() const;
};

using JetFn = std::function<double(int l, const double* x)>;
using MetricJetFn = std::function<double(int a, int b, int l, const double* x)>;

BoundaryJets make_jets(const std::vector<double>& periods, int n, int J, const MetricJetFn& ginv,
                       const std::vector<JetFn>& a, const JetFn& q);
// Euclidean half-space: g^{ab} = delta, constant in x_n.
BoundaryJets flat_jets(const std::vector<double>& periods, int n, int J, const std::vector<JetFn>& a, const JetFn& q);

// Polynomial radial profile f(r) = sum c_k r^k.
struct RadialProfile {
  std::vector<double> c;
  double value(double r) const;
  double derivative(double r, int order) const;
};
// Unit disk with boundary coordinate theta and x_n = 1 - r: g^{thth} = 1/(1 - x_n)^2,
// a = a_th(r) d theta, radial q.
BoundaryJets disk_jets(const RadialProfile& a_theta, const RadialProfile& q, int J, int n = 8);

using Multi = std::array<int, 2>;

// sum_alpha c_alpha(x) xi^alpha |xi|_g^(degree - |alpha|), |xi|_g taken with g^{ab}(x', x_n).
struct HomTerm {
  int degree = 0;
  std::map<Multi, TaylorField> c;
};

struct PhgSymbol {
  BoundaryGrid grid;
  int J = 0;
  std::vector<TaylorField> ginv;  // metric context, ginv[a*m + b]
  std::vector<HomTerm> terms;     // degrees 1, 0, ..., -J

  const HomTerm& term(int degree) const;
  // Value of the degree-d term at a boundary node and covector xi.
  cplx eval(int degree, int node, const double* xi) const;
  // Same on the cosphere: xi rescaled to |xi|_g = 1.
  cplx eval_unit(int degree, int node, const double* xi) const;
  nlohmann::json to_json() const;
};

// Full symbol of the DN map f -> (d_nu u + i<a,nu>u) with nu the outward normal, through
// first-order factorization -d_n^2 - E d_n + Q = (-d_n - E + B)(d_n + B), B^2 - E B - d_n B = Q.
PhgSymbol symbol_factorize(const BoundaryJets& jets, int J);

// sub = p_0 - (1/2i) sum d^2 p_1 / dx_b d xi_b, a degree-0 term.
HomTerm subprincipal_term(const PhgSymbol& s);
// Same for delta'^(1/2) Lambda delta'^(-1/2) with delta' the boundary volume density. This one is
// real; the plain coordinate version picks up -i<d log delta'^(1/2), xi/|xi|>.
HomTerm half_density_subprincipal(const PhgSymbol& s);
cplx eval_term(const PhgSymbol& s, const HomTerm& t, int node, const double* xi);

// theta = exp(i(2 pi <w, x/L> + psi)) on the boundary torus.
struct BoundaryGauge {
  std::vector<int> winding;
  Eigen::ArrayXcd psi;  // real values on the grid
};
// Symbol of conj(theta) Lambda theta from sum_gamma d_xi^gamma p / gamma! * conj(theta) D^gamma theta,
// truncated at the stored order. Terms come back valid at x_n = 0 only.
PhgSymbol gauge_shift_subprincipal(const PhgSymbol& s, const BoundaryGauge& theta);
// dphi = -i conj(theta) d theta on the grid, component j.
Eigen::ArrayXcd gauge_form(const BoundaryGrid& g, const BoundaryGauge& theta, int j);

// Cosphere samples at one node: unit covectors (two for m = 1, `count` for m = 2).
std::vector<std::array<double, 2>> unit_covectors(const PhgSymbol& s, int node, int count = 16);

// Split of a degree-0 cosphere function into s + <v, theta^sharp>; v is returned as a one-form.
struct ParitySplit {
  Eigen::ArrayXcd even;
  std::vector<Eigen::ArrayXcd> odd;  // one-form components
  double residual = 0.0;            // sup of what is left
};
ParitySplit parity_split(const PhgSymbol& s, const std::function<cplx(int node, const double* xi)>& f);

// sup over the cosphere of |p_d(A) - p_d(B)| for one degree.
double term_difference(const PhgSymbol& A, const PhgSymbol& B, int degree);

// Structure of the degree -j difference: p_{-j}(A) - p_{-j}(B)
// = s * 2^{-j} (pi0* d_n^{j-1}(qA - qB) + pi1* d_n^j (aA - aB)) + T_j with the sign s fixed by the
// half-space oracle (s = +1 for the inward x_n used here).
struct DifferenceStructure {
  int j = 0;
  Eigen::ArrayXcd dq;                // extracted d_n^{j-1} (qA - qB)
  std::vector<Eigen::ArrayXcd> da;   // extracted d_n^j (aA - aB)
  double parity_residual = 0.0;
  double T = 0.0;                    // sup |difference - predicted main part|
};
constexpr double kLowerOrderSign = 1.0;
DifferenceStructure symbol_difference_structure(const PhgSymbol& A, const PhgSymbol& B, const BoundaryJets& jA,
                                                const BoundaryJets& jB, int j, double tol = 1e-8);

// Disk oracle: DN eigenvalue on mode e^{ik theta} from the Riccati equation for s = r u'/u in
// t = ln r, s' = (k + a_th)^2 - s^2 + q r^2, RK4 with step halving and Richardson extrapolation.
struct OracleValue {
  int k = 0;
  double sigma = 0.0;         // finest RK4 value
  double step_change = 0.0;   // |sigma(h) - sigma(2h)|
  double extrapolated = 0.0;
  int steps = 0;
};
OracleValue disk_dn_oracle(const RadialProfile& a_theta, const RadialProfile& q, int k, int steps = 4000);

struct AsymptoticFit {
  int modes = 0;
  int terms_used = 0;            // symbol degrees 1 down to 2 - terms_used
  double residual_order = 0.0;   // fitted decay exponent of sigma_k - sum p_d |k|^d
  double residual_scale = 0.0;
  double max_residual = 0.0;
  bool exact = false;            // residuals at rounding level, no order fitted
  double fitted_minus1 = 0.0;    // LS coefficient of 1/|k| in sigma_k - |k| - p_0
  double predicted_minus1 = 0.0;
  nlohmann::json to_json() const;
};
// Uses the symbol at node 0 with xi = sign(k); p_override replaces degree-d values when set.
AsymptoticFit asymptotic_match(const std::vector<OracleValue>& oracle, const PhgSymbol& s, int terms,
                               const std::map<int, double>& p_override = {});

}  // namespace maglab
