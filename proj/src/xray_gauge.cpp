#include "maglab/xray_gauge.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "maglab/errors.hpp"

namespace maglab {

ClosedCurve torus_geodesic(const std::vector<double>& periods, const std::vector<int>& winding,
                           const std::vector<double>& base, int samples) {
  const int d = static_cast<int>(periods.size());
  if (static_cast<int>(winding.size()) != d || static_cast<int>(base.size()) != d)
    throw InvalidArgument("winding and base need one entry per axis");
  if (samples < 2) throw InvalidArgument("need at least two samples");
  std::vector<double> v(d);
  double len = 0.0;
  for (int j = 0; j < d; ++j) {
    v[j] = winding[j] * periods[j];
    len += v[j] * v[j];
  }
  len = std::sqrt(len);
  if (!(len > 0)) throw DegenerateOrbit("zero winding");
  ClosedCurve c;
  c.length = len;
  c.label = "torus(";
  for (int j = 0; j < d; ++j) c.label += (j ? "," : "") + std::to_string(winding[j]);
  c.label += ")";
  for (int k = 0; k <= samples; ++k) {
    const double s = static_cast<double>(k) / samples;
    std::vector<double> x(d), t(d);
    for (int j = 0; j < d; ++j) {
      x[j] = base[j] + s * v[j];
      t[j] = v[j] / len;
    }
    c.x.push_back(x);
    c.xdot.push_back(t);
  }
  return c;
}

ClosedCurve axis_curve(const Mat2& g, int samples) {
  const double ell = geodesic_length(g);
  Eigen::EigenSolver<Mat2> es(g);
  const auto ev = es.eigenvalues();
  const int s = std::abs(ev(0).real()) > std::abs(ev(1).real()) ? 0 : 1;
  Mat2 M;
  M.col(0) = es.eigenvectors().col(s).real();
  M.col(1) = es.eigenvectors().col(1 - s).real();
  if (M.determinant() < 0) M.col(1) *= -1.0;
  M /= std::sqrt(M.determinant());
  ClosedCurve c;
  c.length = ell;
  c.label = "axis";
  for (int k = 0; k <= samples; ++k) {
    const double t = ell * k / samples;
    const std::complex<double> w(0.0, std::exp(t));
    const std::complex<double> den = M(1, 0) * w + M(1, 1);
    const std::complex<double> z = (M(0, 0) * w + M(0, 1)) / den;
    const std::complex<double> dz = w / (den * den);
    c.x.push_back({z.real(), z.imag()});
    c.xdot.push_back({dz.real(), dz.imag()});
  }
  return c;
}

namespace {

template <class F>
double periodic_sum(const ClosedCurve& c, F f) {
  const int n = static_cast<int>(c.x.size()) - 1;
  if (n < 1) throw InvalidArgument("empty curve");
  double acc = 0.0;
  for (int k = 0; k < n; ++k) acc += f(k);
  return acc * c.length / n;
}

}  // namespace

double xray_function(const PointFn& q, const ClosedCurve& c) {
  return periodic_sum(c, [&](int k) { return q(c.x[k].data()); });
}

double xray_oneform(const OneFormFn& a, const ClosedCurve& c) {
  std::vector<double> buf(c.x.empty() ? 0 : c.x[0].size());
  return periodic_sum(c, [&](int k) {
    a(c.x[k].data(), buf.data());
    double s = 0.0;
    for (size_t j = 0; j < buf.size(); ++j) s += buf[j] * c.xdot[k][j];
    return s;
  });
}

double xray_function(const TrigSeries& q, const ClosedCurve& c) {
  return xray_function([&](const double* x) { return q.real_at(x); }, c);
}

double xray_oneform(const std::vector<TrigSeries>& a, const ClosedCurve& c) {
  return xray_oneform(
      [&](const double* x, double* out) {
        for (size_t j = 0; j < a.size(); ++j) out[j] = a[j].real_at(x);
      },
      c);
}

double xray_cohomology(const std::vector<double>& periods, const std::string& word) {
  double s = 0.0;
  for (int l : parse_word(word)) {
    const int g = std::abs(l) - 1;
    if (g >= static_cast<int>(periods.size())) throw InvalidArgument("no period for generator in word");
    s += (l > 0 ? 1.0 : -1.0) * periods[g];
  }
  return s;
}

nlohmann::json XRayRecord::to_json() const {
  return {{"geodesic", geodesic}, {"length", length}, {"xray_f0", xray_f0}, {"xray_f1", xray_f1}, {"combined", combined}};
}

std::vector<XRayRecord> xray_records(const PointFn& f0, const OneFormFn& f1, const std::vector<ClosedCurve>& curves) {
  std::vector<XRayRecord> out;
  for (const auto& c : curves) {
    XRayRecord r;
    r.geodesic = c.label;
    r.length = c.length;
    r.xray_f0 = xray_function(f0, c);
    r.xray_f1 = xray_oneform(f1, c);
    r.combined = r.xray_f0 + r.xray_f1;
    out.push_back(r);
  }
  return out;
}

double xray_vanishing_check(const PointFn& f0, const OneFormFn& f1, const std::vector<ClosedCurve>& curves) {
  double m = 0.0;
  for (const auto& r : xray_records(f0, f1, curves)) m = std::max(m, std::abs(r.combined));
  return m;
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::equivalent: return "equivalent";
    case Verdict::not_equivalent: return "not_equivalent";
    default: return "inconclusive";
  }
}

nlohmann::json GaugeDecision::to_json() const {
  nlohmann::json j{{"verdict", verdict_name(verdict)},
                   {"curl_defect", curl_defect},
                   {"flux_defects", flux_defects},
                   {"windings", windings},
                   {"reason", reason}};
  if (witness) {
    nlohmann::json psi = nlohmann::json::array();
    for (const auto& [m, c] : witness->psi.coeffs()) psi.push_back({{"mode", m}, {"re", c.real()}, {"im", c.imag()}});
    j["witness"] = {{"winding", witness->winding}, {"psi", psi}};
  }
  return j;
}

TrigSeries hodge_potential(const std::vector<TrigSeries>& w) {
  if (w.empty()) throw InvalidArgument("empty one-form");
  const auto& L = w[0].periods();
  std::set<TrigSeries::Mode> modes;
  for (const auto& s : w)
    for (const auto& [m, c] : s.coeffs()) modes.insert(m);
  TrigSeries psi(L);
  for (const auto& m : modes) {
    double k2 = 0.0;
    cplx num = 0.0;
    for (size_t j = 0; j < w.size(); ++j) {
      const double kj = w[0].wavevector(m, static_cast<int>(j));
      k2 += kj * kj;
      num += kj * w[j].coeff(m);
    }
    if (k2 == 0.0) continue;
    psi.add(m, cplx(0, -1) * num / k2);
  }
  return psi;
}

GaugeDecision gauge_equivalence_decision(const std::vector<TrigSeries>& a, const std::vector<TrigSeries>& a_tilde,
                                         const std::vector<std::vector<int>>& windings, double tol) {
  if (a.empty() || a.size() != a_tilde.size()) throw InvalidArgument("one-forms of different dimension");
  const int d = static_cast<int>(a.size());
  const auto& L = a[0].periods();
  for (int j = 0; j < d; ++j)
    if (a[j].periods() != L || a_tilde[j].periods() != L) throw InvalidArgument("one-forms on different tori");
  std::vector<TrigSeries> w;
  int maxmode = 0;
  for (int j = 0; j < d; ++j) {
    w.push_back(a_tilde[j] - a[j]);
    maxmode = std::max(maxmode, w.back().max_abs_mode());
  }
  GaugeDecision dec;
  dec.windings = windings;
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k)
      dec.curl_defect = std::max(dec.curl_defect, (w[k].derivative(j) - w[j].derivative(k)).l1_norm());

  bool flux_ok = true;
  for (const auto& m : windings) {
    int span = 0;
    for (int v : m) span += std::abs(v);
    const auto c = torus_geodesic(L, m, std::vector<double>(d, 0.0), 64 + 4 * maxmode * span);
    const double f = xray_oneform(w, c);
    const double def = std::abs(f - 2 * M_PI * std::round(f / (2 * M_PI)));
    dec.flux_defects.push_back(def);
    if (def > tol) flux_ok = false;
  }
  if (dec.curl_defect > tol) {
    dec.verdict = Verdict::not_equivalent;
    dec.reason = "d(a - a~) is not zero";
    return dec;
  }
  if (!flux_ok) {
    dec.verdict = Verdict::not_equivalent;
    dec.reason = "a flux of a~ - a lies off 2 pi Z";
    return dec;
  }
  int rank = 0;
  if (!windings.empty()) {
    Eigen::MatrixXd W(windings.size(), d);
    for (size_t r = 0; r < windings.size(); ++r) {
      if (static_cast<int>(windings[r].size()) != d) throw InvalidArgument("winding of wrong dimension");
      for (int j = 0; j < d; ++j) W(r, j) = windings[r][j];
    }
    rank = static_cast<int>(Eigen::FullPivLU<Eigen::MatrixXd>(W).rank());
  }
  if (rank < d) {
    dec.verdict = Verdict::inconclusive;
    dec.reason = "windings do not span the homology";
    return dec;
  }
  // Integer fluxes on a spanning set do not yet fix each basis flux when the set has index > 1;
  // the constant part must be a lattice point itself.
  GaugeFunction th;
  th.psi = hodge_potential(w);
  for (int j = 0; j < d; ++j) {
    const double n = L[j] * w[j].mean() / (2 * M_PI);
    if (std::abs(n - std::round(n)) * 2 * M_PI > tol) {
      dec.verdict = Verdict::not_equivalent;
      dec.reason = "basis flux of a~ - a lies off 2 pi Z";
      return dec;
    }
    th.winding.push_back(static_cast<int>(std::lround(n)));
  }
  dec.verdict = Verdict::equivalent;
  dec.reason = "closed difference with fluxes in 2 pi Z";
  dec.witness = th;
  return dec;
}

}  // namespace maglab
