#include "maglab/magnetic_operator.hpp"

#include <cmath>

#include "maglab/errors.hpp"

namespace maglab {

namespace {

void require_torus(const MetricChart& c) {
  if (c.kind() != ChartKind::flat_torus) throw KindMismatch("magnetic operator needs a flat torus or circle chart");
}

}  // namespace

TrigSeries PotentialData::curvature(int j, int k) const { return a[k].derivative(j) - a[j].derivative(k); }

nlohmann::json PotentialData::to_json() const {
  auto series = [](const TrigSeries& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [m, c] : s.coeffs()) arr.push_back({{"mode", m}, {"re", c.real()}, {"im", c.imag()}});
    return arr;
  };
  nlohmann::json j;
  j["chart"] = chart.to_json();
  nlohmann::json aj = nlohmann::json::array();
  for (const auto& s : a) aj.push_back(series(s));
  j["a"] = aj;
  j["q"] = series(q);
  return j;
}

PotentialData make_potential(const MetricChart& chart, std::vector<TrigSeries> a, TrigSeries q) {
  require_torus(chart);
  const int d = chart.dim();
  if (static_cast<int>(a.size()) != d) throw InvalidArgument("one-form needs one series per axis");
  for (const auto& s : a)
    if (s.periods() != chart.periods()) throw InvalidArgument("series periods differ from chart periods");
  if (q.periods() != chart.periods()) throw InvalidArgument("series periods differ from chart periods");
  for (const auto& s : a)
    if (s.reality_defect() > 1e-12) throw InvalidArgument("magnetic potential must be real");
  if (q.reality_defect() > 1e-12) throw InvalidArgument("electric potential must be real");
  return PotentialData{chart, std::move(a), std::move(q)};
}

PotentialData zero_potential(const MetricChart& chart) {
  require_torus(chart);
  std::vector<TrigSeries> a(chart.dim(), TrigSeries(chart.periods()));
  return PotentialData{chart, a, TrigSeries(chart.periods())};
}

cplx GaugeFunction::operator()(const double* x) const {
  double ph = psi.real_at(x);
  for (size_t j = 0; j < winding.size(); ++j) ph += 2 * M_PI * winding[j] * x[j] / psi.periods()[j];
  return std::polar(1.0, ph);
}

TrigSeries GaugeFunction::gauge_form(int j) const {
  TrigSeries s = psi.derivative(j);
  const int w = j < static_cast<int>(winding.size()) ? winding[j] : 0;
  if (w != 0) s = s + TrigSeries::constant(psi.periods(), 2 * M_PI * w / psi.periods()[j]);
  return s;
}

AssemblyReport assemble_schrodinger(const PotentialData& pot, int cutoff) {
  require_torus(pot.chart);
  if (cutoff < 1) throw InvalidArgument("cutoff must be >= 1");
  const int d = pot.chart.dim();
  const auto L = pot.chart.periods();
  AssemblyReport rep;
  int maxmode = pot.q.max_abs_mode();
  for (const auto& s : pot.a) maxmode = std::max(maxmode, s.max_abs_mode());
  if (maxmode > cutoff)
    rep.warnings.push_back("cutoff " + std::to_string(cutoff) + " below the highest potential mode " +
                           std::to_string(maxmode));

  // Enumerate modes |k|_inf <= cutoff, first axis slowest.
  std::vector<int> k(d, -cutoff);
  while (true) {
    rep.modes.push_back(k);
    int j = d - 1;
    while (j >= 0 && k[j] == cutoff) k[j--] = -cutoff;
    if (j < 0) break;
    ++k[j];
  }
  const int n = static_cast<int>(rep.modes.size());

  // Coefficient tables on the difference lattice |m|_inf <= 2 cutoff.
  const int W = 4 * cutoff + 1;
  int tab = 1;
  for (int j = 0; j < d; ++j) tab *= W;
  auto flat = [&](const std::vector<int>& m) {
    int id = 0;
    for (int j = 0; j < d; ++j) {
      if (std::abs(m[j]) > 2 * cutoff) return -1;
      id = id * W + (m[j] + 2 * cutoff);
    }
    return id;
  };
  std::vector<cplx> S(tab, 0.0);
  std::vector<std::vector<cplx>> A(d, std::vector<cplx>(tab, 0.0));
  for (const auto& [m, c] : pot.q.coeffs())
    if (int id = flat(m); id >= 0) S[id] += c;
  for (int j = 0; j < d; ++j) {
    const TrigSeries sq = pot.a[j] * pot.a[j];
    for (const auto& [m, c] : sq.coeffs())
      if (int id = flat(m); id >= 0) S[id] += c;
    for (const auto& [m, c] : pot.a[j].coeffs())
      if (int id = flat(m); id >= 0) A[j][id] += c;
  }

  rep.matrix = Eigen::MatrixXcd::Zero(n, n);
  std::vector<int> m(d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      for (int j = 0; j < d; ++j) m[j] = rep.modes[r][j] - rep.modes[c][j];
      const int id = flat(m);
      cplx v = S[id];
      for (int j = 0; j < d; ++j) {
        const double kr = 2 * M_PI * rep.modes[r][j] / L[j], kc = 2 * M_PI * rep.modes[c][j] / L[j];
        if (r == c) v += kr * kc;
        v += A[j][id] * (kr + kc);
      }
      rep.matrix(r, c) = v;
    }
  rep.hermitian_defect = (rep.matrix - rep.matrix.adjoint()).cwiseAbs().maxCoeff();
  return rep;
}

Spectrum eigenvalues(const Eigen::MatrixXcd& P, int count, bool with_residuals) {
  if (P.rows() != P.cols()) throw InvalidArgument("matrix must be square");
  if (count < 1 || count > P.rows()) throw InsufficientModes("requested more eigenvalues than modes");
  const double defect = (P - P.adjoint()).cwiseAbs().maxCoeff();
  if (defect > 1e-10 * std::max(1.0, P.cwiseAbs().maxCoeff())) throw InvalidArgument("matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(P, with_residuals ? Eigen::ComputeEigenvectors
                                                                        : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("Hermitian eigensolver did not converge");
  Spectrum s;
  s.matrix_norm = es.eigenvalues().cwiseAbs().maxCoeff();
  for (int k = 0; k < count; ++k) {
    s.values.push_back(es.eigenvalues()(k));
    if (with_residuals) {
      const Eigen::VectorXcd v = es.eigenvectors().col(k);
      s.residuals.push_back((P * v - es.eigenvalues()(k) * v).norm() / std::max(1.0, s.matrix_norm));
    }
  }
  return s;
}

PotentialData gauge_conjugate(const PotentialData& pot, const GaugeFunction& theta) {
  if (theta.psi.periods() != pot.chart.periods()) throw InvalidArgument("gauge lives on another chart");
  PotentialData r = pot;
  for (int j = 0; j < pot.chart.dim(); ++j) r.a[j] = pot.a[j] + theta.gauge_form(j);
  return r;
}

double subprincipal(const PotentialData& pot, const double* x, const double* xi) {
  const int d = pot.chart.dim();
  double nrm = 0.0;
  for (int j = 0; j < d; ++j) nrm += xi[j] * xi[j];
  nrm = std::sqrt(nrm);
  if (!(nrm > 0)) throw InvalidArgument("zero covector");
  double s = 0.0;
  for (int j = 0; j < d; ++j) s += pot.a_at(j, x) * xi[j] / nrm;
  return 2.0 * s;
}

double spectral_gap(const PotentialData& p1, const PotentialData& p2, int cutoff, int count) {
  const auto s1 = eigenvalues(assemble_schrodinger(p1, cutoff).matrix, count);
  const auto s2 = eigenvalues(assemble_schrodinger(p2, cutoff).matrix, count);
  double g = 0.0;
  for (int k = 0; k < count; ++k) g = std::max(g, std::abs(s1.values[k] - s2.values[k]));
  return g;
}

double isospectrality_check(const PotentialData& pot, const GaugeFunction& theta, int cutoff, int count) {
  return spectral_gap(pot, gauge_conjugate(pot, theta), cutoff, count);
}

double homology_flux(const std::vector<TrigSeries>& a, int j, const double* base) {
  // Only modes with m_j = 0 survive the integral over one period in x_j.
  const TrigSeries& s = a.at(j);
  const double L = s.periods()[j];
  cplx acc = 0.0;
  for (const auto& [m, c] : s.coeffs()) {
    if (m[j] != 0) continue;
    double ph = 0.0;
    for (int k = 0; k < s.dim(); ++k) ph += s.wavevector(m, k) * base[k];
    acc += c * std::polar(1.0, ph);
  }
  return L * acc.real();
}

}  // namespace maglab
