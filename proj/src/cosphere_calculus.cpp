#include "maglab/cosphere_calculus.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <random>

#include <Eigen/Dense>

#include "maglab/errors.hpp"
#include "maglab/hyperbolic_dynamics.hpp"

namespace maglab {

namespace {

bool interior(const Grid& g, int idx, int margin, int naxes) {
  if (margin <= 0) return true;
  const auto iv = g.unravel(idx);
  for (int a = 0; a < naxes; ++a)
    if (!g.axis(a).periodic && (iv[a] < margin || iv[a] >= g.extent(a) - margin)) return false;
  return true;
}

void require_2d(const MetricChart& c) {
  if (c.dim() != 2 || c.kind() == ChartKind::general_nd) throw KindMismatch("angle-grid fields need a 2D conformal chart");
}

}  // namespace

// ---------------------------------------------------------------------------
// 2D fields
// ---------------------------------------------------------------------------

CosphereField::CosphereField(const MetricChart& chart, int n_theta) : chart_(chart) {
  require_2d(chart);
  if (n_theta < 3) throw InvalidArgument("need at least 3 fiber angles");
  auto axes = chart.axes();
  axes.push_back(Axis{true, 0.0, 2 * M_PI});
  auto res = chart.resolution();
  res.push_back(n_theta);
  grid_ = Grid(axes, res);
  values.assign(grid_.size(), 0.0);
}

CosphereField CosphereField::like() const {
  CosphereField r(*this);
  std::fill(r.values.begin(), r.values.end(), cplx(0.0));
  r.kind = ValueKind::scalar;
  r.circle_valued = false;
  return r;
}

CosphereField CosphereField::sample(const MetricChart& chart, int n_theta, const FieldFn2D& f) {
  CosphereField u(chart, n_theta);
  double x[2];
  for (int i = 0; i < u.size(); ++i) {
    x[0] = u.grid_.coord(i, 0);
    x[1] = u.grid_.coord(i, 1);
    u.values[i] = f(x, u.theta(i));
  }
  return u;
}

CosphereField CosphereField::operator+(const CosphereField& o) const {
  CosphereField r = like();
  for (int i = 0; i < size(); ++i) r.values[i] = values[i] + o.values[i];
  return r;
}
CosphereField CosphereField::operator-(const CosphereField& o) const { return *this + o.scaled(-1.0); }
CosphereField CosphereField::operator*(const CosphereField& o) const {
  CosphereField r = like();
  for (int i = 0; i < size(); ++i) r.values[i] = values[i] * o.values[i];
  return r;
}
CosphereField CosphereField::scaled(cplx s) const {
  CosphereField r = like();
  for (int i = 0; i < size(); ++i) r.values[i] = s * values[i];
  return r;
}
CosphereField CosphereField::conj() const {
  CosphereField r = like();
  for (int i = 0; i < size(); ++i) r.values[i] = std::conj(values[i]);
  return r;
}

double CosphereField::sup_norm(int margin) const {
  double m = 0.0;
  for (int i = 0; i < size(); ++i)
    if (interior(grid_, i, margin, 2)) m = std::max(m, std::abs(values[i]));
  return m;
}

double CosphereField::max_imag() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, std::abs(v.imag()));
  return m;
}

cplx CosphereField::inner(const CosphereField& o) const {
  const auto w = grid_.weights();
  const auto& geo = chart_.node_geometry();
  cplx s = 0.0;
  for (int i = 0; i < size(); ++i) s += w[i] * std::exp(2.0 * geo[base_index(i)].phi) * values[i] * std::conj(o.values[i]);
  return s;
}

CosphereField CosphereField::fiber_mean() const {
  CosphereField r = like();
  const int nt = n_theta();
  for (int b = 0; b < size() / nt; ++b) {
    cplx s = 0.0;
    for (int k = 0; k < nt; ++k) s += values[b * nt + k];
    s /= static_cast<double>(nt);
    for (int k = 0; k < nt; ++k) r.values[b * nt + k] = s;
  }
  return r;
}

namespace {

// e^{-phi}(c1 d1 + c2 d2 + c3 dtheta) with angle-dependent coefficients supplied per node.
template <typename Coef>
CosphereField horizontal(const CosphereField& u, Coef coef) {
  const auto d1 = u.grid().diff(u.values, 0);
  const auto d2 = u.grid().diff(u.values, 1);
  const auto dt = u.grid().diff(u.values, 2);
  const auto& geo = u.chart().node_geometry();
  CosphereField r = u.like();
  for (int i = 0; i < u.size(); ++i) {
    const LocalGeometry& G = geo[u.base_index(i)];
    double c[3];
    coef(G, u.theta(i), c);
    r.values[i] = std::exp(-G.phi) * (c[0] * d1[i] + c[1] * d2[i] + c[2] * dt[i]);
  }
  return r;
}

}  // namespace

CosphereField apply_H(const CosphereField& u) {
  return horizontal(u, [](const LocalGeometry& G, double th, double* c) {
    const double s = std::sin(th), co = std::cos(th);
    c[0] = co;
    c[1] = s;
    c[2] = -s * G.dphi[0] + co * G.dphi[1];
  });
}

CosphereField apply_Hperp(const CosphereField& u) {
  return horizontal(u, [](const LocalGeometry& G, double th, double* c) {
    const double s = std::sin(th), co = std::cos(th);
    c[0] = s;
    c[1] = -co;
    c[2] = co * G.dphi[0] + s * G.dphi[1];
  });
}

CosphereField apply_V(const CosphereField& u) {
  CosphereField r = u.like();
  r.values = u.grid().diff(u.values, 2);
  return r;
}

CosphereField curvature_field(const CosphereField& like) {
  CosphereField r = like.like();
  const auto& geo = like.chart().node_geometry();
  for (int i = 0; i < r.size(); ++i) r.values[i] = geo[r.base_index(i)].gauss_K;
  return r;
}

// ---------------------------------------------------------------------------
// Polynomial fields
// ---------------------------------------------------------------------------

int MonomialBasis::index(const std::array<int, 3>& e) const {
  // Lexicographic layout within each total degree; small, so a linear scan of the degree block is fine.
  const int d = e[0] + e[1] + e[2];
  if (d > degree || d < 0) return -1;
  for (size_t i = 0; i < exps.size(); ++i)
    if (exps[i] == e) return static_cast<int>(i);
  return -1;
}

const MonomialBasis& MonomialBasis::get(int nvars, int degree) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<MonomialBasis>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{nvars, degree}];
  if (!slot) {
    slot = std::make_unique<MonomialBasis>();
    slot->nvars = nvars;
    slot->degree = degree;
    for (int d = 0; d <= degree; ++d)
      for (int a = d; a >= 0; --a)
        for (int b = d - a; b >= 0; --b) {
          const int c = d - a - b;
          if (nvars == 2 && c != 0) continue;
          slot->exps.push_back({a, b, c});
        }
  }
  return *slot;
}

namespace {

// Sparse term algebra: for each node, accumulate contributions keyed by exponent.
struct TermTable {
  const MonomialBasis* basis;
  std::map<std::array<int, 3>, int> idx;
  explicit TermTable(const MonomialBasis& b) : basis(&b) {
    for (size_t i = 0; i < b.exps.size(); ++i) idx[b.exps[i]] = static_cast<int>(i);
  }
  int operator()(const std::array<int, 3>& e) const { return idx.at(e); }
};

std::array<int, 3> shift(std::array<int, 3> e, int down, int up) {
  if (down >= 0) --e[down];
  if (up >= 0) ++e[up];
  return e;
}

}  // namespace

FiberPolyField::FiberPolyField(const MetricChart& chart, int degree)
    : chart_(std::make_shared<MetricChart>(chart)), degree_(degree) {
  if (chart.dim() < 2 || chart.dim() > 3) throw KindMismatch("fiber polynomials need dim 2 or 3");
  if (degree < 0) throw InvalidArgument("negative degree");
  basis_ = &MonomialBasis::get(chart.dim(), degree);
  nodes_ = chart.grid().size();
  c.assign(static_cast<size_t>(nodes_) * nterms(), 0.0);
}

FiberPolyField FiberPolyField::from_function(const MetricChart& chart, const std::function<cplx(const double*)>& f) {
  FiberPolyField u(chart, 0);
  const Grid g = chart.grid();
  double x[3];
  for (int i = 0; i < u.nodes_; ++i) {
    for (int a = 0; a < chart.dim(); ++a) x[a] = g.coord(i, a);
    u.c[i] = f(x);
  }
  return u;
}

FiberPolyField FiberPolyField::theta_lower(const MetricChart& chart, int k) {
  FiberPolyField u(chart, 1);
  std::array<int, 3> e{0, 0, 0};
  e[k] = 1;
  const int t = u.basis().index(e);
  for (int i = 0; i < u.nodes_; ++i) u.c[static_cast<size_t>(i) * u.nterms() + t] = 1.0;
  return u;
}

FiberPolyField FiberPolyField::theta_upper(const MetricChart& chart, int k) {
  FiberPolyField u(chart, 1);
  const auto& geo = chart.node_geometry();
  const int n = chart.dim();
  for (int i = 0; i < u.nodes_; ++i)
    for (int l = 0; l < n; ++l) {
      std::array<int, 3> e{0, 0, 0};
      e[l] = 1;
      u.c[static_cast<size_t>(i) * u.nterms() + u.basis().index(e)] = geo[i].ginv[k][l];
    }
  return u;
}

FiberPolyField FiberPolyField::one_form(const MetricChart& chart,
                                        const std::vector<std::function<double(const double*)>>& a) {
  const int n = chart.dim();
  if (static_cast<int>(a.size()) != n) throw InvalidArgument("one-form needs dim components");
  FiberPolyField r(chart, 1);
  for (int j = 0; j < n; ++j) r = r + from_function(chart, [&](const double* x) { return cplx(a[j](x)); }) * theta_upper(chart, j);
  return r;
}

namespace {

FiberPolyField padded(const FiberPolyField& u, int D) {
  if (D == u.degree()) return u;
  FiberPolyField r(u.chart(), D);
  const auto& from = u.basis();
  const TermTable to(r.basis());
  std::vector<int> map(from.exps.size());
  for (size_t t = 0; t < from.exps.size(); ++t) map[t] = to(from.exps[t]);
  for (int i = 0; i < u.nodes(); ++i)
    for (int t = 0; t < u.nterms(); ++t)
      r.c[static_cast<size_t>(i) * r.nterms() + map[t]] = u.c[static_cast<size_t>(i) * u.nterms() + t];
  return r;
}

}  // namespace

FiberPolyField FiberPolyField::operator+(const FiberPolyField& o) const {
  const int D = std::max(degree_, o.degree_);
  FiberPolyField a = padded(*this, D);
  const FiberPolyField b = padded(o, D);
  for (size_t k = 0; k < a.c.size(); ++k) a.c[k] += b.c[k];
  return a;
}

FiberPolyField FiberPolyField::operator-(const FiberPolyField& o) const { return *this + o.scaled(-1.0); }

FiberPolyField FiberPolyField::operator*(const FiberPolyField& o) const {
  FiberPolyField r(*chart_, degree_ + o.degree_);
  const auto& ea = basis().exps;
  const auto& eb = o.basis().exps;
  const TermTable to(r.basis());
  std::vector<int> prod(ea.size() * eb.size());
  for (size_t s = 0; s < ea.size(); ++s)
    for (size_t t = 0; t < eb.size(); ++t)
      prod[s * eb.size() + t] = to({ea[s][0] + eb[t][0], ea[s][1] + eb[t][1], ea[s][2] + eb[t][2]});
  const int na = nterms(), nb = o.nterms(), nr = r.nterms();
  for (int i = 0; i < nodes_; ++i)
    for (int s = 0; s < na; ++s) {
      const cplx cs = c[static_cast<size_t>(i) * na + s];
      if (cs == 0.0) continue;
      for (int t = 0; t < nb; ++t) r.c[static_cast<size_t>(i) * nr + prod[s * nb + t]] += cs * o.c[static_cast<size_t>(i) * nb + t];
    }
  return r;
}

FiberPolyField FiberPolyField::scaled(cplx s) const {
  FiberPolyField r(*this);
  for (auto& v : r.c) v *= s;
  return r;
}

FiberPolyField FiberPolyField::conj() const {
  FiberPolyField r(*this);
  for (auto& v : r.c) v = std::conj(v);
  return r;
}

FiberPolyField FiberPolyField::homogenized(int m) const {
  const int n = chart_->dim();
  FiberPolyField q(*chart_, 2);
  const auto& geo = chart_->node_geometry();
  for (int i = 0; i < nodes_; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        std::array<int, 3> e{0, 0, 0};
        ++e[a];
        ++e[b];
        q.c[static_cast<size_t>(i) * q.nterms() + q.basis().index(e)] += geo[i].ginv[a][b];
      }
  FiberPolyField r(*this);
  for (int k = 0; k < m; ++k) r = r * q;
  return r;
}

cplx FiberPolyField::eval(int node, const double* xi) const {
  const auto& ex = basis().exps;
  cplx s = 0.0;
  for (size_t t = 0; t < ex.size(); ++t) {
    const cplx ct = c[static_cast<size_t>(node) * ex.size() + t];
    if (ct == 0.0) continue;
    double m = 1.0;
    for (int a = 0; a < chart_->dim(); ++a)
      for (int p = 0; p < ex[t][a]; ++p) m *= xi[a];
    s += ct * m;
  }
  return s;
}

double FiberPolyField::coeff_sup() const {
  double m = 0.0;
  for (const auto& v : c) m = std::max(m, std::abs(v));
  return m;
}

FiberPolyField apply_nabla(const FiberPolyField& u, int j) {
  const MetricChart& ch = u.chart();
  const int n = ch.dim();
  if (j < 0 || j >= n) throw InvalidArgument("direction out of range");
  FiberPolyField r(u);
  r.c = ch.grid().diff(u.c, j, u.nterms());
  const auto& geo = ch.node_geometry();
  const auto& ex = u.basis().exps;
  const TermTable tt(u.basis());
  const int nt = u.nterms();
  // Gamma^l_{jk} xi_l d/dxi_k
  std::vector<std::array<int, 3>> target(ex.size() * 9, {-1, -1, -1});
  for (size_t t = 0; t < ex.size(); ++t)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        if (ex[t][k] > 0) target[t * 9 + k * 3 + l] = shift(ex[t], k, l);
  std::vector<int> tidx(target.size(), -1);
  for (size_t q = 0; q < target.size(); ++q)
    if (target[q][0] >= 0) tidx[q] = tt(target[q]);
  for (int i = 0; i < u.nodes(); ++i) {
    const LocalGeometry& G = geo[i];
    for (int t = 0; t < nt; ++t) {
      const cplx ct = u.c[static_cast<size_t>(i) * nt + t];
      if (ct == 0.0) continue;
      for (int k = 0; k < n; ++k) {
        if (ex[t][k] == 0) continue;
        for (int l = 0; l < n; ++l)
          r.c[static_cast<size_t>(i) * nt + tidx[t * 9 + k * 3 + l]] += G.gamma[l][j][k] * double(ex[t][k]) * ct;
      }
    }
  }
  return r;
}

FiberPolyField apply_Vj(const FiberPolyField& u, int j) {
  // On the homogeneous part P of degree m: g_{jk} dP/dxi_k |xi|^2 - m P xi_j, the degree-0 extension
  // rule rewritten with the same value on S*M and degree m+1.
  const MetricChart& ch = u.chart();
  const int n = ch.dim();
  if (j < 0 || j >= n) throw InvalidArgument("direction out of range");
  FiberPolyField r(ch, u.degree() + 1);
  const auto& geo = ch.node_geometry();
  const auto& ex = u.basis().exps;
  const TermTable tt(r.basis());
  const int nt = u.nterms(), nr = r.nterms();
  // target[t][k][a][b] for the |xi|^2 d/dxi_k part, euler[t] for the -m P xi_j part
  std::vector<int> target(static_cast<size_t>(nt) * 27, -1), euler(nt, -1);
  for (int t = 0; t < nt; ++t) {
    const auto& e = ex[t];
    for (int k = 0; k < n; ++k) {
      if (e[k] == 0) continue;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          auto f = shift(e, k, a);
          ++f[b];
          target[t * 27 + k * 9 + a * 3 + b] = tt(f);
        }
    }
    if (e[0] + e[1] + e[2] > 0) euler[t] = tt(shift(e, -1, j));
  }
  for (int i = 0; i < u.nodes(); ++i) {
    const LocalGeometry& G = geo[i];
    cplx* ri = r.c.data() + static_cast<size_t>(i) * nr;
    for (int t = 0; t < nt; ++t) {
      const cplx ct = u.c[static_cast<size_t>(i) * nt + t];
      if (ct == 0.0) continue;
      const auto& e = ex[t];
      for (int k = 0; k < n; ++k) {
        if (e[k] == 0) continue;
        const cplx dk = ct * double(e[k]) * G.g[j][k];
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) ri[target[t * 27 + k * 9 + a * 3 + b]] += dk * G.ginv[a][b];
      }
      if (euler[t] >= 0) ri[euler[t]] -= double(e[0] + e[1] + e[2]) * ct;
    }
  }
  return r;
}

FiberPolyField apply_H(const FiberPolyField& u) {
  const MetricChart& ch = u.chart();
  FiberPolyField r(ch, u.degree() + 1);
  for (int j = 0; j < ch.dim(); ++j) r = r + FiberPolyField::theta_upper(ch, j) * apply_nabla(u, j);
  return r;
}

FiberPolyField curvature_action(const FiberPolyField& u, int j, int k) {
  const MetricChart& ch = u.chart();
  const int n = ch.dim();
  FiberPolyField r(u);
  std::fill(r.c.begin(), r.c.end(), cplx(0.0));
  const auto& geo = ch.node_geometry();
  const auto& ex = u.basis().exps;
  const TermTable tt(u.basis());
  const int nt = u.nterms();
  for (int i = 0; i < u.nodes(); ++i) {
    const LocalGeometry& G = geo[i];
    for (int t = 0; t < nt; ++t) {
      const cplx ct = u.c[static_cast<size_t>(i) * nt + t];
      if (ct == 0.0) continue;
      for (int m = 0; m < n; ++m) {
        if (ex[t][m] == 0) continue;
        for (int l = 0; l < n; ++l)
          r.c[static_cast<size_t>(i) * nt + tt(shift(ex[t], m, l))] += G.riemann[l][m][j][k] * double(ex[t][m]) * ct;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Fiber quadrature and samples
// ---------------------------------------------------------------------------

FiberQuadrature FiberQuadrature::make(int n, int exact_degree) {
  FiberQuadrature q;
  q.n = n;
  if (n == 2) {
    const int m = exact_degree + 1;
    for (int k = 0; k < m; ++k) {
      const double t = 2 * M_PI * k / m;
      q.omega.push_back({std::cos(t), std::sin(t), 0.0});
      q.w.push_back(2 * M_PI / m);
    }
    return q;
  }
  if (n != 3) throw InvalidArgument("fiber quadrature for n = 2 or 3 only");
  // Gauss-Legendre in z (Golub-Welsch), trapezoid in azimuth.
  const int p = exact_degree / 2 + 1;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(p, p);
  for (int k = 1; k < p; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const int m = exact_degree + 1;
  for (int a = 0; a < p; ++a) {
    const double z = es.eigenvalues()(a);
    const double wz = 2.0 * es.eigenvectors()(0, a) * es.eigenvectors()(0, a);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int k = 0; k < m; ++k) {
      const double t = 2 * M_PI * k / m;
      q.omega.push_back({r * std::cos(t), r * std::sin(t), z});
      q.w.push_back(wz * 2 * M_PI / m);
    }
  }
  return q;
}

FiberSamples::FiberSamples(const MetricChart& chart, const FiberQuadrature& q) : chart_(chart), q_(q) {
  const int n = chart.dim();
  if (q.n != n) throw InvalidArgument("quadrature dimension mismatch");
  const auto& geo = chart.node_geometry();
  nodes_ = static_cast<int>(geo.size());
  const auto gw = chart.grid().weights();
  theta_.resize(static_cast<size_t>(nodes_) * fiber());
  bw_.resize(nodes_);
  for (int i = 0; i < nodes_; ++i) {
    Eigen::MatrixXd g(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) g(a, b) = geo[i].g[a][b];
    const Eigen::MatrixXd L = g.llt().matrixL();
    for (int f = 0; f < fiber(); ++f) {
      std::array<double, 3> th{0, 0, 0};
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) th[a] += L(a, b) * q.omega[f][b];
      theta_[static_cast<size_t>(i) * fiber() + f] = th;
    }
    bw_[i] = std::sqrt(geo[i].det) * gw[i];
  }
}

std::vector<cplx> FiberSamples::eval(const FiberPolyField& u) const {
  std::vector<cplx> out(static_cast<size_t>(nodes_) * fiber());
  const auto& ex = u.basis().exps;
  const int nt = static_cast<int>(ex.size()), D = u.degree();
  std::vector<double> pw(3 * (D + 1));
  for (int i = 0; i < nodes_; ++i) {
    const cplx* ci = u.c.data() + static_cast<size_t>(i) * nt;
    for (int f = 0; f < fiber(); ++f) {
      const auto& th = theta(i, f);
      for (int a = 0; a < 3; ++a) {
        pw[a * (D + 1)] = 1.0;
        for (int p = 1; p <= D; ++p) pw[a * (D + 1) + p] = pw[a * (D + 1) + p - 1] * th[a];
      }
      cplx s = 0.0;
      for (int t = 0; t < nt; ++t)
        s += ci[t] * (pw[ex[t][0]] * pw[(D + 1) + ex[t][1]] * pw[2 * (D + 1) + ex[t][2]]);
      out[static_cast<size_t>(i) * fiber() + f] = s;
    }
  }
  return out;
}

double FiberSamples::integrate(const std::vector<cplx>& a, const std::vector<cplx>& b) const {
  double s = 0.0;
  for (int i = 0; i < nodes_; ++i)
    for (int f = 0; f < fiber(); ++f) {
      const size_t k = static_cast<size_t>(i) * fiber() + f;
      s += bw_[i] * q_.w[f] * (a[k] * std::conj(b[k])).real();
    }
  return s;
}

double FiberSamples::integrate_metric(const std::vector<std::vector<cplx>>& a,
                                      const std::vector<std::vector<cplx>>& b) const {
  const auto& geo = chart_.node_geometry();
  const int n = chart_.dim();
  double s = 0.0;
  for (int i = 0; i < nodes_; ++i)
    for (int f = 0; f < fiber(); ++f) {
      const size_t k = static_cast<size_t>(i) * fiber() + f;
      double v = 0.0;
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) v += geo[i].ginv[p][q] * (a[p][k] * std::conj(b[q][k])).real();
      s += bw_[i] * q_.w[f] * v;
    }
  return s;
}

namespace {

double sample_sup(const FiberSamples& s, const std::vector<cplx>& v, int margin) {
  const Grid g = s.chart().grid();
  double m = 0.0;
  for (int i = 0; i < s.nodes(); ++i) {
    if (!interior(g, i, margin, s.chart().dim())) continue;
    for (int f = 0; f < s.fiber(); ++f) m = std::max(m, std::abs(v[static_cast<size_t>(i) * s.fiber() + f]));
  }
  return m;
}

double field_sup(const FiberSamples& s, const FiberPolyField& u, int margin) { return sample_sup(s, s.eval(u), margin); }

}  // namespace

// ---------------------------------------------------------------------------
// Residual suites
// ---------------------------------------------------------------------------

nlohmann::json to_json(const ResidualRecord& r) {
  return {{"identity_name", r.identity_name},
          {"chart", r.chart},
          {"resolution", r.resolution},
          {"residual", r.residual},
          {"convergence_order", r.convergence_order}};
}

namespace {

std::string chart_name(const MetricChart& c) { return c.label(); }

}  // namespace

std::vector<ResidualRecord> bracket_residuals(const MetricChart& chart, int n_theta,
                                              const std::vector<FieldFn2D>& test_fields, int margin) {
  double r_vhp = 0, r_hph = 0, r_hv = 0;
  for (const auto& fn : test_fields) {
    const CosphereField u = CosphereField::sample(chart, n_theta, fn);
    const CosphereField Hu = apply_H(u), Pu = apply_Hperp(u), Vu = apply_V(u);
    const CosphereField K = curvature_field(u);
    r_vhp = std::max(r_vhp, (apply_V(Pu) - apply_Hperp(Vu) - Hu).sup_norm(margin));
    r_hph = std::max(r_hph, (apply_Hperp(Hu) - apply_H(Pu) - K * Vu).sup_norm(margin));
    r_hv = std::max(r_hv, (apply_H(Vu) - apply_V(Hu) - Pu).sup_norm(margin));
  }
  const std::string name = chart_name(chart);
  const int res = chart.resolution()[0];
  return {{"[V,Hperp]=H", name, res, r_vhp, 0.0},
          {"[Hperp,H]=KV", name, res, r_hph, 0.0},
          {"[H,V]=Hperp", name, res, r_hv, 0.0}};
}

std::vector<ResidualRecord> bracket_residuals(const MetricChart& chart, const std::vector<PolyFieldFn>& test_fields,
                                              int margin) {
  const int n = chart.dim();
  const FiberSamples S(chart, FiberQuadrature::make(n, 8));
  double r_euler = 0, r_vt = 0, r_vv = 0, r_struct = 0, r_ext = 0;
  std::vector<FiberPolyField> th_lo, th_up;
  for (int k = 0; k < n; ++k) {
    th_lo.push_back(FiberPolyField::theta_lower(chart, k));
    th_up.push_back(FiberPolyField::theta_upper(chart, k));
  }
  const auto& geo = chart.node_geometry();
  for (const auto& make : test_fields) {
    const FiberPolyField u = make(chart);
    std::vector<FiberPolyField> V, N;
    for (int j = 0; j < n; ++j) {
      V.push_back(apply_Vj(u, j));
      N.push_back(apply_nabla(u, j));
    }
    FiberPolyField euler(chart, 0);
    for (int k = 0; k < n; ++k) euler = euler + th_up[k] * V[k];
    r_euler = std::max(r_euler, field_sup(S, euler, margin));
    const FiberPolyField uh = u.homogenized(1);
    for (int j = 0; j < n; ++j) {
      r_ext = std::max(r_ext, field_sup(S, apply_Vj(uh, j) - V[j], margin));
      for (int k = 0; k < n; ++k) {
        FiberPolyField gjk = FiberPolyField(chart, 0);
        for (int i = 0; i < gjk.nodes(); ++i) gjk.c[i] = geo[i].g[j][k];
        const FiberPolyField lhs = apply_Vj(th_lo[k] * u, j) - th_lo[k] * V[j];
        r_vt = std::max(r_vt, field_sup(S, lhs - (gjk - th_lo[j] * th_lo[k]) * u, margin));
        if (k <= j) continue;
        const FiberPolyField vv = apply_Vj(V[k], j) - apply_Vj(V[j], k) - (th_lo[j] * V[k] - th_lo[k] * V[j]);
        r_vv = std::max(r_vv, field_sup(S, vv, margin));
        const FiberPolyField st = apply_nabla(N[k], j) - apply_nabla(N[j], k) - curvature_action(u, j, k);
        r_struct = std::max(r_struct, field_sup(S, st, margin));
      }
    }
  }
  const std::string name = chart_name(chart);
  const int res = chart.resolution()[0];
  return {{"euler_relation", name, res, r_euler, 0.0},
          {"[V_j,theta_k]=g_jk-theta_j theta_k", name, res, r_vt, 0.0},
          {"[V_j,V_k]=theta_j V_k-theta_k V_j", name, res, r_vv, 0.0},
          {"structure_equation", name, res, r_struct, 0.0},
          {"homogeneous_extension_consistency", name, res, r_ext, 0.0}};
}

namespace {

std::vector<ResidualRecord> with_orders(std::vector<ResidualRecord> a, std::vector<ResidualRecord> b) {
  for (size_t k = 0; k < a.size(); ++k) {
    const double ord = (a[k].residual > 0 && b[k].residual > 0) ? std::log2(a[k].residual / b[k].residual) : 0.0;
    a[k].convergence_order = b[k].convergence_order = ord;
  }
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

std::vector<ResidualRecord> bracket_convergence(const std::function<MetricChart(int)>& make_chart, int base_res,
                                                int n_theta, const std::vector<FieldFn2D>& test_fields) {
  return with_orders(bracket_residuals(make_chart(base_res), n_theta, test_fields),
                     bracket_residuals(make_chart(2 * base_res), 2 * n_theta, test_fields));
}

std::vector<ResidualRecord> bracket_convergence(const std::function<MetricChart(int)>& make_chart, int base_res,
                                                const std::vector<PolyFieldFn>& test_fields) {
  return with_orders(bracket_residuals(make_chart(base_res), test_fields),
                     bracket_residuals(make_chart(2 * base_res), test_fields));
}

bool converged_on_doubling(double coarse, double fine, double factor, double floor) {
  if (coarse < floor && fine < floor) return true;
  return fine * factor <= coarse;
}

namespace {

// Smooth scalar built from a few modes: integer wavenumbers on periodic axes, mild real ones on intervals.
struct ModeSum {
  struct Mode {
    double k[3];
    int ktheta;
    cplx c;
  };
  std::vector<Mode> modes;
  cplx operator()(const double* x, int dim, double theta) const {
    cplx s = 0.0;
    for (const auto& m : modes) {
      double ph = m.ktheta * theta;
      for (int a = 0; a < dim; ++a) ph += m.k[a] * x[a];
      s += m.c * std::polar(1.0, ph);
    }
    return s;
  }
};

ModeSum make_modes(const std::vector<Axis>& axes, std::mt19937_64& rng, int count, int max_theta) {
  std::uniform_int_distribution<int> ik(-2, 2), it(-max_theta, max_theta);
  std::uniform_real_distribution<double> rk(-1.5, 1.5);
  std::normal_distribution<double> nd(0.0, 1.0);
  ModeSum s;
  for (int q = 0; q < count; ++q) {
    ModeSum::Mode m{};
    for (size_t a = 0; a < axes.size(); ++a)
      m.k[a] = axes[a].periodic ? 2 * M_PI * ik(rng) / axes[a].length() : rk(rng);
    m.ktheta = it(rng);
    m.c = cplx(nd(rng), nd(rng)) / static_cast<double>(count);
    s.modes.push_back(m);
  }
  return s;
}

}  // namespace

FieldFn2D random_test_field(const MetricChart& chart, unsigned seed, int modes) {
  std::mt19937_64 rng(seed);
  const ModeSum s = make_modes(chart.axes(), rng, modes, 3);
  return [s](const double* x, double th) { return s(x, 2, th); };
}

PolyFieldFn random_poly_field(int degree, unsigned seed, int modes) {
  return [=](const MetricChart& chart) {
    std::mt19937_64 rng(seed);
    FiberPolyField u(chart, degree);
    const Grid g = chart.grid();
    const int n = chart.dim();
    double x[3];
    for (int t = 0; t < u.nterms(); ++t) {
      const ModeSum s = make_modes(chart.axes(), rng, modes, 0);
      for (int i = 0; i < u.nodes(); ++i) {
        for (int a = 0; a < n; ++a) x[a] = g.coord(i, a);
        u.c[static_cast<size_t>(i) * u.nterms() + t] = s(x, n, 0.0);
      }
    }
    return u;
  };
}

// ---------------------------------------------------------------------------
// Adjoint and special forms
// ---------------------------------------------------------------------------

double vertical_adjoint_residual(const MetricChart& chart, const FiberPolyField& phi, const FiberPolyField& psi, int j,
                                 int quad_degree) {
  const int n = chart.dim();
  const FiberSamples S(chart, FiberQuadrature::make(n, quad_degree));
  const auto Vphi = S.eval(apply_Vj(phi, j)), Vpsi = S.eval(apply_Vj(psi, j));
  const auto p = S.eval(phi), q = S.eval(psi);
  const auto th = S.eval(FiberPolyField::theta_lower(chart, j) * phi);
  // Complex pairings: integrate real and imaginary parts separately.
  auto pair = [&](const std::vector<cplx>& a, const std::vector<cplx>& b) {
    std::vector<cplx> ib(b.size());
    for (size_t k = 0; k < b.size(); ++k) ib[k] = cplx(0, 1) * b[k];
    return cplx(S.integrate(a, b), S.integrate(a, ib));
  };
  const cplx r = pair(Vphi, q) + pair(p, Vpsi) - double(n - 1) * pair(th, q);
  return std::abs(r);
}

cplx AffineFiberFunction::eval(const LocalGeometry& G, const double* x, const double* theta_lower) const {
  cplx s = f0 ? f0(x) : 0.0;
  for (size_t j = 0; j < f1.size(); ++j) {
    if (!f1[j]) continue;
    const double aj = f1[j](x);
    for (int k = 0; k < G.n; ++k) s += aj * G.ginv[j][k] * theta_lower[k];
  }
  return s;
}

namespace {

FiberPolyField affine_poly(const MetricChart& chart, const AffineFiberFunction& f) {
  FiberPolyField r(chart, 1);
  if (f.f0) r = r + FiberPolyField::from_function(chart, [&](const double* x) { return cplx(f.f0(x)); });
  if (!f.f1.empty()) {
    std::vector<std::function<double(const double*)>> a(chart.dim());
    for (int j = 0; j < chart.dim(); ++j)
      a[j] = (j < static_cast<int>(f.f1.size()) && f.f1[j]) ? f.f1[j] : [](const double*) { return 0.0; };
    r = r + FiberPolyField::one_form(chart, a);
  }
  return r;
}

}  // namespace

SpecialFormNorms special_form_norms(const MetricChart& chart, const AffineFiberFunction& f, int quad_degree) {
  const int n = chart.dim();
  const FiberSamples S(chart, FiberQuadrature::make(n, quad_degree));
  AffineFiberFunction only0{f.f0, {}}, only1{nullptr, f.f1};
  const FiberPolyField F = affine_poly(chart, f);
  const auto fv = S.eval(F);
  const auto f0v = S.eval(affine_poly(chart, only0));
  const auto f1v = S.eval(affine_poly(chart, only1));
  std::vector<std::vector<cplx>> Vf;
  for (int j = 0; j < n; ++j) Vf.push_back(S.eval(apply_Vj(F, j)));
  return {S.integrate(fv, fv), S.integrate(f0v, f0v), S.integrate(f1v, f1v), S.integrate_metric(Vf, Vf)};
}

// ---------------------------------------------------------------------------
// Transport, alpha/beta, Pestov
// ---------------------------------------------------------------------------

TransportSolution solve_transport_along_orbit(const MetricChart& chart, const Orbit& orbit, const AffineFiberFunction& f,
                                              cplx u0, double closure_tol) {
  if (!orbit.closed() || orbit.closure_defect > closure_tol)
    throw NotClosed("orbit does not close (defect " + std::to_string(orbit.closure_defect) + ")");
  const size_t N = orbit.t.size();
  if (N < 3) throw InvalidArgument("orbit needs at least 3 samples");
  std::vector<double> fv(N);
  for (size_t k = 0; k < N; ++k) {
    const LocalGeometry G = chart.geometry(orbit.x[k].data());
    fv[k] = f.eval(G, orbit.x[k].data(), orbit.xi[k].data()).real();
  }
  TransportSolution s;
  s.t = orbit.t;
  s.u.resize(N);
  // Exponential of the cumulative trapezoid integral: second-order Magnus, |u| preserved exactly.
  double I = 0.0;
  s.u[0] = u0;
  for (size_t k = 1; k < N; ++k) {
    I += 0.5 * (orbit.t[k] - orbit.t[k - 1]) * (fv[k] + fv[k - 1]);
    s.u[k] = u0 * std::polar(1.0, -I);
  }
  s.line_integral = I;
  s.periodicity_defect = std::abs(std::remainder(I, 2 * M_PI));
  return s;
}

AlphaBeta build_alpha_beta(const CosphereField& u) {
  for (const auto& v : u.values)
    if (std::abs(std::abs(v) - 1.0) > 1e-10) throw InvalidArgument("u is not circle-valued");
  const cplx I(0, 1);
  const CosphereField ub = u.conj();
  AlphaBeta ab;
  ab.alpha = (ub * apply_Hperp(u)).scaled(I);
  ab.beta = (ub * apply_V(u)).scaled(I);
  ab.f = (ub * apply_H(u)).scaled(I);
  ab.alpha.kind = ValueKind::horizontal_vector;
  ab.beta.kind = ValueKind::vertical_vector;
  ab.max_imag = std::max(ab.alpha.max_imag(), ab.beta.max_imag());
  return ab;
}

AlphaBetaND build_alpha_beta(const FiberPolyField& u, const FiberSamples& s) {
  const auto uv = s.eval(u);
  for (const auto& v : uv)
    if (std::abs(std::abs(v) - 1.0) > 1e-10) throw InvalidArgument("u is not circle-valued");
  const int n = u.chart().dim();
  const cplx I(0, 1);
  const FiberPolyField ub = u.conj();
  AlphaBetaND r;
  for (int j = 0; j < n; ++j) {
    r.alpha.push_back(s.eval((ub * apply_nabla(u, j)).scaled(-I)));
    r.beta.push_back(s.eval((ub * apply_Vj(u, j)).scaled(I)));
  }
  r.f = s.eval((ub * apply_H(u)).scaled(I));
  const auto& geo = u.chart().node_geometry();
  for (int i = 0; i < s.nodes(); ++i)
    for (int f = 0; f < s.fiber(); ++f) {
      const size_t k = static_cast<size_t>(i) * s.fiber() + f;
      cplx c = r.f[k];
      for (int j = 0; j < n; ++j) {
        double thj = 0.0;
        for (int l = 0; l < n; ++l) thj += geo[i].ginv[j][l] * s.theta(i, f)[l];
        c += thj * r.alpha[j][k];
        r.max_imag = std::max({r.max_imag, std::abs(r.alpha[j][k].imag()), std::abs(r.beta[j][k].imag())});
      }
      r.contraction_residual = std::max(r.contraction_residual, std::abs(c));
    }
  return r;
}

PestovReport pestov_residual(const CosphereField& u, const CosphereField& f, double transport_tol) {
  const CosphereField Hu = apply_H(u);
  const double viol = (Hu + (f * u).scaled(cplx(0, 1))).sup_norm(4);
  if (viol > transport_tol) throw PreconditionError("transport equation violated", viol);
  PestovReport r;
  r.transport_violation = viol;
  const CosphereField beta = (u.conj() * apply_V(u)).scaled(cplx(0, 1));
  const CosphereField Hb = apply_H(beta);
  r.beta_norm = std::sqrt(beta.norm2());
  r.Hbeta_norm2 = Hb.norm2();
  r.Kbeta = (curvature_field(beta) * beta).inner(beta).real();
  r.Vf_norm2 = apply_V(f).norm2();
  r.f_norm2 = f.norm2();
  r.f0_norm2 = f.fiber_mean().norm2();
  r.full_residual = std::abs(-r.Hbeta_norm2 + r.Kbeta + r.Vf_norm2 - r.f_norm2);
  r.rearranged_residual = std::abs(r.f0_norm2 - (-r.Hbeta_norm2 + r.Kbeta));
  return r;
}

PestovReport pestov_residual(const CosphereField& u, const AffineFiberFunction& f, double transport_tol) {
  const MetricChart& ch = u.chart();
  const auto& geo = ch.node_geometry();
  CosphereField F = u.like();
  double x[2];
  for (int i = 0; i < F.size(); ++i) {
    const LocalGeometry& G = geo[F.base_index(i)];
    x[0] = F.grid().coord(i, 0);
    x[1] = F.grid().coord(i, 1);
    const double e = std::exp(G.phi), th = F.theta(i);
    const double xi[2] = {e * std::cos(th), e * std::sin(th)};
    F.values[i] = f.eval(G, x, xi);
  }
  return pestov_residual(u, F, transport_tol);
}

PestovReport pestov_residual(const FiberPolyField& u, const AffineFiberFunction& f, double transport_tol,
                             int quad_degree) {
  const MetricChart& ch = u.chart();
  const int n = ch.dim();
  const FiberSamples S(ch, FiberQuadrature::make(n, quad_degree));
  const FiberPolyField F = affine_poly(ch, f);
  const cplx I(0, 1);
  const double viol = field_sup(S, apply_H(u) + (F * u).scaled(I), 4);
  if (viol > transport_tol) throw PreconditionError("transport equation violated", viol);
  PestovReport r;
  r.transport_violation = viol;

  const FiberPolyField ub = u.conj();
  std::vector<FiberPolyField> beta;
  for (int j = 0; j < n; ++j) beta.push_back((ub * apply_Vj(u, j)).scaled(I));
  // Horizontal derivative of the vertical covector field: H beta_j - theta^k Gamma^m_{kj} beta_m.
  const auto& geo = ch.node_geometry();
  std::vector<std::vector<cplx>> bv, hb;
  for (int j = 0; j < n; ++j) {
    FiberPolyField h = apply_H(beta[j]);
    for (int k = 0; k < n; ++k)
      for (int m = 0; m < n; ++m) {
        FiberPolyField G(ch, 0);
        for (int i = 0; i < G.nodes(); ++i) G.c[i] = geo[i].gamma[m][k][j];
        h = h - FiberPolyField::theta_upper(ch, k) * G * beta[m];
      }
    bv.push_back(S.eval(beta[j]));
    hb.push_back(S.eval(h));
  }
  r.beta_norm = std::sqrt(S.integrate_metric(bv, bv));
  r.Hbeta_norm2 = S.integrate_metric(hb, hb);
  // (R beta | beta) = int R_{abcd} beta^a theta^b conj(beta)^c theta^d
  double rb = 0.0;
  for (int i = 0; i < S.nodes(); ++i) {
    const LocalGeometry& G = geo[i];
    for (int fq = 0; fq < S.fiber(); ++fq) {
      const size_t k = static_cast<size_t>(i) * S.fiber() + fq;
      cplx bu[3]{};
      double tu[3]{};
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          bu[a] += G.ginv[a][b] * bv[b][k];
          tu[a] += G.ginv[a][b] * S.theta(i, fq)[b];
        }
      cplx s = 0.0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            for (int d = 0; d < n; ++d) s += G.lower_riemann(a, b, c, d) * bu[a] * tu[b] * std::conj(bu[c]) * tu[d];
      rb += S.base_weights()[i] * S.quadrature().w[fq] * s.real();
    }
  }
  r.Kbeta = rb;
  AffineFiberFunction only0{f.f0, {}};
  const auto fv = S.eval(F), f0v = S.eval(affine_poly(ch, only0));
  std::vector<std::vector<cplx>> Vf;
  for (int j = 0; j < n; ++j) Vf.push_back(S.eval(apply_Vj(F, j)));
  r.f_norm2 = S.integrate(fv, fv);
  r.f0_norm2 = S.integrate(f0v, f0v);
  r.Vf_norm2 = S.integrate_metric(Vf, Vf);
  r.full_residual = std::abs(-r.Hbeta_norm2 + r.Kbeta + r.Vf_norm2 - double(n - 1) * r.f_norm2);
  r.rearranged_residual = std::abs(double(n - 1) * r.f0_norm2 - (-r.Hbeta_norm2 + r.Kbeta));
  return r;
}

double hamiltonian_decomposition_residual(const MetricChart& chart, const std::function<double(const double*, double)>& u,
                                          int samples, unsigned seed) {
  require_2d(chart);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto& ax = chart.axes();
  const double h = 1e-3;
  // Fourth-order central difference.
  auto d4 = [h](const std::function<double(double)>& g) {
    return (g(-2 * h) - 8 * g(-h) + 8 * g(h) - g(2 * h)) / (12 * h);
  };
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    double x[2];
    for (int a = 0; a < 2; ++a) {
      const double pad = ax[a].periodic ? 0.0 : 0.1 * ax[a].length();
      x[a] = ax[a].lo + pad + U(rng) * (ax[a].length() - 2 * pad);
    }
    const double th = 2 * M_PI * U(rng);
    const LocalGeometry G = chart.geometry(x);
    const double e = std::exp(G.phi);
    const double xi[2] = {e * std::cos(th), e * std::sin(th)};
    // F(x, xi) = u(x, arg xi), p = e^{-2 phi}|xi|^2
    auto F = [&](const double* y, const double* z) { return u(y, std::atan2(z[1], z[0])); };
    double dFx[2], dFxi[2];
    for (int a = 0; a < 2; ++a) {
      dFx[a] = d4([&](double t) {
        double y[2] = {x[0], x[1]};
        y[a] += t;
        return F(y, xi);
      });
      dFxi[a] = d4([&](double t) {
        double z[2] = {xi[0], xi[1]};
        z[a] += t;
        return F(x, z);
      });
    }
    const double e2 = std::exp(-2 * G.phi), p = e2 * (xi[0] * xi[0] + xi[1] * xi[1]);
    double half_Hp = 0.0;
    for (int a = 0; a < 2; ++a) half_Hp += 0.5 * (2 * e2 * xi[a] * dFx[a] - (-2 * G.dphi[a] * p) * dFxi[a]);
    // Direct H on the angle parametrization.
    const double ux1 = dFx[0], ux2 = dFx[1];
    const double ut = d4([&](double t) { return u(x, th + t); });
    const double aphi = -std::sin(th) * G.dphi[0] + std::cos(th) * G.dphi[1];
    const double Hu = std::exp(-G.phi) * (std::cos(th) * ux1 + std::sin(th) * ux2 + aphi * ut);
    worst = std::max(worst, std::abs(half_Hp - Hu));
  }
  return worst;
}

}  // namespace maglab
