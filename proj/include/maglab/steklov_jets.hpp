#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "maglab/steklov_symbol.hpp"

namespace maglab {

// Fourier split of a one-form on the boundary torus: w = d beta + harmonic + coexact.
struct HodgeSplit {
  Eigen::ArrayXcd beta;                 // zero mean
  std::vector<double> harmonic;         // constant part, per component
  std::vector<Eigen::ArrayXcd> coexact;
  double coexact_sup = 0.0;
  double curl_sup = 0.0;                // sup |d w|, zero for m = 1
};
HodgeSplit hodge_split(const BoundaryGrid& g, const std::vector<Eigen::ArrayXcd>& w);

struct JetRecoveryStep {
  int j = 0;
  double dq_sup = 0.0;          // extracted d_n^{j-1} (qA - qB), j >= 1
  double dda_sup = 0.0;         // sup |d (d_n^j (a~ - a))|
  double harmonic = 0.0;        // max |harmonic part|, must vanish for j >= 1
  double coexact = 0.0;
  double parity_residual = 0.0;
  double degree_drop = 0.0;     // sup over degrees >= -j of the difference after absorbing
  nlohmann::json to_json() const;
};

struct JetRecoveryState {
  int step = 0;
  int J = 0;
  std::vector<Eigen::ArrayXcd> dq;     // recovered d_n^l (q~ - q), l = 0..J-1
  std::vector<double> dda_sup;         // recovered |d (d_n^l (a~ - a))|, l = 0..J
  // ledger: theta_0 = exp(i(2 pi <w, x/L> + psi_0)), then beta_l with a~^(l) = a^(l) + d beta_l
  std::vector<int> winding;
  Eigen::ArrayXcd psi0;
  std::vector<Eigen::ArrayXcd> beta;   // beta[l], l = 1..J (beta[0] unused)
  std::string cutoff = "chi = 1 near x_n = 0 with all normal derivatives zero there";
  std::vector<JetRecoveryStep> steps;
  bool obstruction = false;
  std::string obstruction_report;
  double ledger_residual = 0.0;        // sup over all degrees of sym(ledger applied to A) - sym(B)
  double conjugation_residual = 0.0;   // step 0: boundary conjugation calculus vs refactorized symbol
  BoundaryGrid grid;
  nlohmann::json to_json() const;
};

// Inductive recovery of the jets of B from its symbol, starting from the data A. Each degree
// -j difference is split into scalar and one-form parts; the one-form part is Hodge split and
// its exact piece absorbed into A by a gauge jet, scalar parts are recorded and absorbed.
JetRecoveryState jet_recovery(const BoundaryJets& A, const PhgSymbol& symB, int J, double tol = 1e-8);

// Applies the ledger to A: a^(0) += 2 pi w/L + d psi_0, a^(l) += d beta_l, q^(l) += dq_l.
BoundaryJets apply_ledger(const BoundaryJets& A, const JetRecoveryState& st);

// Gauge jet killing a normal component: with phi^(0) = 0 and phi^(l+1) = a_n^(l), the data
// a - d phi has zero normal component to the stored order; returns the tangential jets.
struct NormalizedJets {
  BoundaryJets jets;
  std::vector<Eigen::ArrayXcd> phi;  // phi^(l), l = 0..J+1
};
NormalizedJets normalize_normal_component(const BoundaryJets& tangential, const std::vector<Eigen::ArrayXcd>& a_normal);

}  // namespace maglab
