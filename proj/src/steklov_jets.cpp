#include "maglab/steklov_jets.hpp"

#include <cmath>

#include "maglab/errors.hpp"

namespace maglab {

namespace {

nlohmann::json field_json(const BoundaryGrid& g, const Eigen::ArrayXcd& f) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [k, c] : g.fourier(f, 1e-13)) arr.push_back({{"mode", k}, {"re", c.real()}, {"im", c.imag()}});
  return arr;
}

double max_term_difference(const PhgSymbol& A, const PhgSymbol& B, int lowest_degree) {
  double m = 0.0;
  for (int d = 1; d >= lowest_degree; --d) m = std::max(m, term_difference(A, B, d));
  return m;
}

}  // namespace

HodgeSplit hodge_split(const BoundaryGrid& g, const std::vector<Eigen::ArrayXcd>& w) {
  const int m = g.dim();
  if (static_cast<int>(w.size()) != m) throw InvalidArgument("one-form has wrong number of components");
  std::vector<Axis> axes;
  for (double L : g.periods()) axes.push_back(Axis{true, 0.0, L});
  Grid grid(axes, std::vector<int>(m, g.n()));
  std::vector<std::vector<cplx>> c;
  for (const auto& f : w) c.push_back(dft_forward(grid, std::vector<cplx>(f.data(), f.data() + g.size())));
  std::vector<cplx> b(g.size(), 0.0);
  HodgeSplit hs;
  for (int a = 0; a < m; ++a) hs.harmonic.push_back(c[a][0].real());
  for (int i = 1; i < g.size(); ++i) {
    double kv[2] = {0, 0};
    double k2 = 0.0;
    bool nyq = false;
    for (int a = 0; a < m; ++a) {
      const int idx = m == 1 ? i : (a == 0 ? i / g.n() : i % g.n());
      const int wn = wavenumber(idx, g.n());
      nyq = nyq || 2 * std::abs(wn) == g.n();
      kv[a] = 2 * M_PI * wn / g.periods()[a];
      k2 += kv[a] * kv[a];
    }
    if (nyq || k2 == 0.0) continue;
    cplx num = 0.0;
    for (int a = 0; a < m; ++a) num += kv[a] * c[a][i];
    b[i] = cplx(0, -1) * num / k2;
  }
  const std::vector<cplx> bv = dft_inverse(grid, b);
  hs.beta = Eigen::Map<const Eigen::ArrayXcd>(bv.data(), g.size());
  for (int a = 0; a < m; ++a) {
    hs.coexact.push_back(w[a] - g.diff(hs.beta, a) - hs.harmonic[a]);
    hs.coexact_sup = std::max(hs.coexact_sup, hs.coexact.back().abs().maxCoeff());
  }
  if (m == 2) hs.curl_sup = (g.diff(w[1], 0) - g.diff(w[0], 1)).abs().maxCoeff();
  return hs;
}

nlohmann::json JetRecoveryStep::to_json() const {
  return {{"j", j},
          {"dq_sup", dq_sup},
          {"dda_sup", dda_sup},
          {"harmonic", harmonic},
          {"coexact", coexact},
          {"parity_residual", parity_residual},
          {"degree_drop", degree_drop}};
}

nlohmann::json JetRecoveryState::to_json() const {
  nlohmann::json j;
  j["J"] = J;
  j["step"] = step;
  j["obstruction"] = obstruction;
  j["obstruction_report"] = obstruction_report;
  j["ledger_residual"] = ledger_residual;
  j["conjugation_residual"] = conjugation_residual;
  j["cutoff"] = cutoff;
  j["theta0"] = {{"winding", winding}, {"psi", psi0.size() ? field_json(grid, psi0) : nlohmann::json::array()}};
  nlohmann::json bj = nlohmann::json::array();
  for (size_t l = 1; l < beta.size(); ++l)
    bj.push_back({{"l", l}, {"fourier", beta[l].size() ? field_json(grid, beta[l]) : nlohmann::json::array()}});
  j["beta"] = bj;
  nlohmann::json qj = nlohmann::json::array();
  for (size_t l = 0; l < dq.size(); ++l)
    qj.push_back({{"l", l}, {"sup", dq[l].size() ? dq[l].abs().maxCoeff() : 0.0},
                  {"fourier", dq[l].size() ? field_json(grid, dq[l]) : nlohmann::json::array()}});
  j["dq"] = qj;
  j["dda_sup"] = dda_sup;
  nlohmann::json sj = nlohmann::json::array();
  for (const auto& s : steps) sj.push_back(s.to_json());
  j["steps"] = sj;
  return j;
}

BoundaryJets apply_ledger(const BoundaryJets& A, const JetRecoveryState& st) {
  BoundaryJets B = A;
  const int m = A.dim();
  if (st.psi0.size() == A.grid.size()) {
    const BoundaryGauge th{st.winding, st.psi0};
    for (int a = 0; a < m; ++a) B.a[a][0] += gauge_form(A.grid, th, a);
  }
  for (size_t l = 1; l < st.beta.size(); ++l) {
    if (st.beta[l].size() != A.grid.size()) continue;
    for (int a = 0; a < m; ++a) B.a[a][l] += A.grid.diff(st.beta[l], a);
  }
  for (size_t l = 0; l < st.dq.size(); ++l)
    if (st.dq[l].size() == A.grid.size()) B.q[l] += st.dq[l];
  return B;
}

JetRecoveryState jet_recovery(const BoundaryJets& A, const PhgSymbol& symB, int J, double tol) {
  if (J < 1 || J > A.J || J > symB.J) throw InvalidArgument("recovery order exceeds the available jets");
  if (symB.grid.periods() != A.grid.periods() || symB.grid.n() != A.grid.n())
    throw InvalidArgument("symbols on different boundary grids");
  const int m = A.dim();
  const int nodes = A.grid.size();
  JetRecoveryState st;
  st.J = J;
  st.grid = A.grid;
  st.beta.assign(J + 1, Eigen::ArrayXcd());
  st.dq.assign(J, Eigen::ArrayXcd::Zero(nodes));
  st.dda_sup.assign(J + 1, 0.0);

  BoundaryJets cur = A;
  PhgSymbol symA = symbol_factorize(cur, J);

  // Degree 0: sub(B) - sub(A) = pi1*(a~ - a) on the boundary.
  {
    JetRecoveryStep rec;
    rec.j = 0;
    const ParitySplit ps = parity_split(symA, [&](int i, const double* xi) {
      return symB.eval(0, i, xi) - symA.eval(0, i, xi);
    });
    rec.parity_residual = std::max(ps.residual, ps.even.abs().maxCoeff());
    const HodgeSplit hs = hodge_split(A.grid, ps.odd);
    rec.dda_sup = hs.curl_sup;
    rec.coexact = hs.coexact_sup;
    st.dda_sup[0] = hs.curl_sup;
    st.psi0 = hs.beta.real().cast<cplx>();
    for (int a = 0; a < m; ++a) {
      const double n = hs.harmonic[a] * A.grid.periods()[a] / (2 * M_PI);
      rec.harmonic = std::max(rec.harmonic, std::abs(n - std::round(n)) * 2 * M_PI / A.grid.periods()[a]);
      st.winding.push_back(static_cast<int>(std::lround(n)));
    }
    if (rec.parity_residual > tol || hs.coexact_sup > tol || rec.harmonic > tol) {
      st.obstruction = true;
      st.obstruction_report = "degree-0 difference is not the lift of a closed one-form with 2 pi Z periods";
      st.steps.push_back(rec);
      return st;
    }
    const BoundaryGauge th{st.winding, st.psi0};
    const PhgSymbol conj = gauge_shift_subprincipal(symA, th);
    for (int a = 0; a < m; ++a) cur.a[a][0] += gauge_form(A.grid, th, a);
    symA = symbol_factorize(cur, J);
    st.conjugation_residual = max_term_difference(conj, symA, -J);
    rec.degree_drop = max_term_difference(symA, symB, 0);
    st.steps.push_back(rec);
    st.step = 0;
  }

  for (int j = 1; j <= J; ++j) {
    JetRecoveryStep rec;
    rec.j = j;
    const ParitySplit ps = parity_split(symA, [&](int i, const double* xi) {
      return symA.eval(-j, i, xi) - symB.eval(-j, i, xi);
    });
    rec.parity_residual = ps.residual;
    const double scale = std::ldexp(1.0, j) / kLowerOrderSign;
    // recovered differences of B relative to the current A
    const Eigen::ArrayXcd dq = -ps.even * scale;
    std::vector<Eigen::ArrayXcd> da;
    for (int a = 0; a < m; ++a) da.push_back(-ps.odd[a] * scale);
    st.dq[j - 1] = dq;
    rec.dq_sup = dq.abs().maxCoeff();
    const HodgeSplit hs = hodge_split(A.grid, da);
    rec.dda_sup = hs.curl_sup;
    st.dda_sup[j] = hs.curl_sup;
    rec.coexact = hs.coexact_sup;
    for (double h : hs.harmonic) rec.harmonic = std::max(rec.harmonic, std::abs(h));
    st.beta[j] = hs.beta.real().cast<cplx>();
    if (ps.residual > tol || hs.coexact_sup > tol || rec.harmonic > tol) {
      st.obstruction = true;
      st.obstruction_report = "normal derivative of order " + std::to_string(j) +
                              " of a~ - a is not exact on the boundary (harmonic " + std::to_string(rec.harmonic) +
                              ", coexact " + std::to_string(hs.coexact_sup) + ")";
      st.steps.push_back(rec);
      return st;
    }
    cur.q[j - 1] += dq;
    for (int a = 0; a < m; ++a) cur.a[a][j] += A.grid.diff(st.beta[j], a);
    symA = symbol_factorize(cur, J);
    rec.degree_drop = max_term_difference(symA, symB, -j);
    st.steps.push_back(rec);
    st.step = j;
  }
  st.ledger_residual = max_term_difference(symbol_factorize(apply_ledger(A, st), J), symB, -J);
  return st;
}

NormalizedJets normalize_normal_component(const BoundaryJets& tangential, const std::vector<Eigen::ArrayXcd>& a_normal) {
  NormalizedJets out;
  out.jets = tangential;
  const int J = tangential.J;
  const int nodes = tangential.grid.size();
  out.phi.assign(J + 2, Eigen::ArrayXcd::Zero(nodes));
  for (int l = 0; l <= J && l < static_cast<int>(a_normal.size()); ++l) out.phi[l + 1] = a_normal[l];
  for (int a = 0; a < tangential.dim(); ++a)
    for (int l = 0; l <= J; ++l) out.jets.a[a][l] -= tangential.grid.diff(out.phi[l], a);
  return out;
}

}  // namespace maglab
