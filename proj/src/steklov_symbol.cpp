#include "maglab/steklov_symbol.hpp"

#include <cmath>

#include "maglab/errors.hpp"

namespace maglab {

// ---- boundary grid ---------------------------------------------------------------------------

BoundaryGrid::BoundaryGrid(std::vector<double> periods, int n) : periods_(std::move(periods)), n_(n) {
  if (dim() < 1 || dim() > 2) throw InvalidArgument("boundary torus must have dimension 1 or 2");
  if (n < 4) throw InvalidArgument("boundary grid needs at least 4 points per axis");
  for (double L : periods_)
    if (!(L > 0)) throw InvalidArgument("non-positive period");
  size_ = dim() == 1 ? n : n * n;
  for (int a = 0; a < dim(); ++a) d_[a] = diff_matrix(Axis{true, 0.0, periods_[a]}, n);
}

std::array<double, 2> BoundaryGrid::point(int node) const {
  if (dim() == 1) return {periods_[0] * node / n_, 0.0};
  return {periods_[0] * (node / n_) / n_, periods_[1] * (node % n_) / n_};
}

Eigen::ArrayXcd BoundaryGrid::diff(const Eigen::ArrayXcd& f, int axis) const {
  using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::ArrayXcd out(size_);
  if (dim() == 1) {
    out = (d_[0].cast<cplx>() * f.matrix()).array();
    return out;
  }
  Eigen::Map<const RowMat> F(f.data(), n_, n_);
  Eigen::Map<RowMat> G(out.data(), n_, n_);
  if (axis == 0)
    G = d_[0].cast<cplx>() * F;
  else
    G = F * d_[1].transpose().cast<cplx>();
  return out;
}

Eigen::ArrayXcd BoundaryGrid::sample(const std::function<cplx(const double*)>& f) const {
  Eigen::ArrayXcd v(size_);
  for (int i = 0; i < size_; ++i) {
    const auto p = point(i);
    v(i) = f(p.data());
  }
  return v;
}

std::vector<std::pair<std::vector<int>, cplx>> BoundaryGrid::fourier(const Eigen::ArrayXcd& f, double floor) const {
  std::vector<Axis> axes;
  for (double L : periods_) axes.push_back(Axis{true, 0.0, L});
  Grid g(axes, std::vector<int>(dim(), n_));
  const std::vector<cplx> c = dft_forward(g, std::vector<cplx>(f.data(), f.data() + size_));
  std::vector<std::pair<std::vector<int>, cplx>> out;
  for (int i = 0; i < size_; ++i) {
    if (std::abs(c[i]) < floor) continue;
    std::vector<int> k;
    if (dim() == 1)
      k = {wavenumber(i, n_)};
    else
      k = {wavenumber(i / n_, n_), wavenumber(i % n_, n_)};
    bool nyq = false;
    for (int v : k) nyq = nyq || 2 * std::abs(v) == n_;
    if (!nyq) out.emplace_back(k, c[i]);
  }
  return out;
}

TrigSeries BoundaryGrid::to_series(const Eigen::ArrayXcd& f, double floor) const {
  TrigSeries s(periods_);
  for (const auto& [k, c] : fourier(f, floor)) s.add(k, c);
  return s;
}

// ---- Taylor fields ---------------------------------------------------------------------------

TaylorField TaylorField::constant(int nodes, int order, cplx v) {
  TaylorField f;
  f.t.assign(order + 1, Eigen::ArrayXcd::Zero(nodes));
  f.t[0].setConstant(v);
  return f;
}

TaylorField TaylorField::from_jets(const std::vector<Eigen::ArrayXcd>& jets) {
  TaylorField f;
  double fact = 1.0;
  for (size_t l = 0; l < jets.size(); ++l) {
    if (l > 0) fact *= static_cast<double>(l);
    f.t.push_back(jets[l] / fact);
  }
  return f;
}

Eigen::ArrayXcd TaylorField::jet(int l) const {
  double fact = 1.0;
  for (int k = 2; k <= l; ++k) fact *= k;
  return t.at(l) * fact;
}

TaylorField TaylorField::operator+(const TaylorField& o) const {
  TaylorField r;
  const int n = std::min(order(), o.order());
  for (int l = 0; l <= n; ++l) r.t.push_back(t[l] + o.t[l]);
  return r;
}

TaylorField TaylorField::operator-(const TaylorField& o) const { return *this + o.scaled(-1.0); }

TaylorField TaylorField::operator*(const TaylorField& o) const {
  TaylorField r;
  const int n = std::min(order(), o.order());
  for (int l = 0; l <= n; ++l) {
    Eigen::ArrayXcd acc = t[0] * o.t[l];
    for (int k = 1; k <= l; ++k) acc += t[k] * o.t[l - k];
    r.t.push_back(std::move(acc));
  }
  return r;
}

TaylorField TaylorField::scaled(cplx s) const {
  TaylorField r = *this;
  for (auto& v : r.t) v *= s;
  return r;
}

TaylorField TaylorField::dn() const {
  TaylorField r;
  for (int l = 1; l <= order(); ++l) r.t.push_back(t[l] * static_cast<double>(l));
  return r;
}

TaylorField TaylorField::dx(const BoundaryGrid& g, int axis) const {
  TaylorField r;
  for (const auto& v : t) r.t.push_back(g.diff(v, axis));
  return r;
}

TaylorField TaylorField::reciprocal() const {
  if ((t.at(0).abs() < 1e-300).any()) throw NumericalDegeneracy("reciprocal of a vanishing field");
  TaylorField r;
  const Eigen::ArrayXcd inv = t[0].inverse();
  r.t.push_back(inv);
  for (int l = 1; l <= order(); ++l) {
    Eigen::ArrayXcd acc = Eigen::ArrayXcd::Zero(inv.size());
    for (int k = 1; k <= l; ++k) acc += t[k] * r.t[l - k];
    r.t.push_back(-acc * inv);
  }
  return r;
}

TaylorField TaylorField::truncated(int o) const {
  TaylorField r;
  for (int l = 0; l <= std::min(o, order()); ++l) r.t.push_back(t[l]);
  return r;
}

double TaylorField::sup() const { return t.empty() ? 0.0 : t[0].abs().maxCoeff(); }

// ---- jets ------------------------------------------------------------------------------------

void BoundaryJets::validate() const {
  const int m = dim();
  if (J < 1) throw InvalidArgument("jet order must be >= 1");
  if (static_cast<int>(ginv.size()) != m * m || static_cast<int>(a.size()) != m)
    throw InvalidArgument("jet arrays do not match the boundary dimension");
  for (const auto& g : ginv)
    if (static_cast<int>(g.size()) < J + 2) throw InvalidArgument("metric jets shorter than J + 2");
  for (const auto& v : a)
    if (static_cast<int>(v.size()) < J + 1) throw InvalidArgument("magnetic jets shorter than J + 1");
  if (static_cast<int>(q.size()) < J) throw InvalidArgument("electric jets shorter than J");
  for (int i = 0; i < grid.size(); ++i) {
    Eigen::Matrix2d G = Eigen::Matrix2d::Identity();
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) {
        const cplx v = ginv[r * m + c][0](i);
        if (std::abs(v.imag()) > 1e-12) throw InvalidArgument("metric jets must be real");
        G(r, c) = v.real();
      }
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("metric jets not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(G);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0)) throw InvalidArgument("boundary metric not positive definite");
    if (hi / lo > 1e8) throw NumericalDegeneracy("boundary metric ill-conditioned");
  }
}

nlohmann::json BoundaryJets::to_json() const {
  auto fld = [&](const Eigen::ArrayXcd& f) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [k, c] : grid.fourier(f, 1e-14)) arr.push_back({{"mode", k}, {"re", c.real()}, {"im", c.imag()}});
    return arr;
  };
  nlohmann::json j;
  j["periods"] = grid.periods();
  j["n"] = grid.n();
  j["J"] = J;
  nlohmann::json g = nlohmann::json::array(), av = nlohmann::json::array(), qv = nlohmann::json::array();
  for (const auto& comp : ginv) {
    nlohmann::json l = nlohmann::json::array();
    for (const auto& f : comp) l.push_back(fld(f));
    g.push_back(l);
  }
  for (const auto& comp : a) {
    nlohmann::json l = nlohmann::json::array();
    for (const auto& f : comp) l.push_back(fld(f));
    av.push_back(l);
  }
  for (const auto& f : q) qv.push_back(fld(f));
  j["ginv"] = g;
  j["a"] = av;
  j["q"] = qv;
  return j;
}

BoundaryJets make_jets(const std::vector<double>& periods, int n, int J, const MetricJetFn& ginv,
                       const std::vector<JetFn>& a, const JetFn& q) {
  BoundaryJets jets;
  jets.grid = BoundaryGrid(periods, n);
  jets.J = J;
  const int m = jets.dim();
  if (static_cast<int>(a.size()) != m) throw InvalidArgument("one magnetic jet function per boundary axis");
  jets.ginv.resize(m * m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      for (int l = 0; l <= J + 1; ++l)
        jets.ginv[r * m + c].push_back(jets.grid.sample([&](const double* x) { return cplx(ginv(r, c, l, x)); }));
  jets.a.resize(m);
  for (int al = 0; al < m; ++al)
    for (int l = 0; l <= J; ++l) jets.a[al].push_back(jets.grid.sample([&](const double* x) { return cplx(a[al](l, x)); }));
  for (int l = 0; l <= J; ++l) jets.q.push_back(jets.grid.sample([&](const double* x) { return cplx(q(l, x)); }));
  jets.validate();
  return jets;
}

BoundaryJets flat_jets(const std::vector<double>& periods, int n, int J, const std::vector<JetFn>& a, const JetFn& q) {
  return make_jets(
      periods, n, J, [](int r, int c, int l, const double*) { return (l == 0 && r == c) ? 1.0 : 0.0; }, a, q);
}

double RadialProfile::value(double r) const { return derivative(r, 0); }

double RadialProfile::derivative(double r, int order) const {
  double s = 0.0;
  for (size_t k = order; k < c.size(); ++k) {
    double f = 1.0;
    for (int i = 0; i < order; ++i) f *= static_cast<double>(k - i);
    s += c[k] * f * std::pow(r, static_cast<double>(k - order));
  }
  return s;
}

BoundaryJets disk_jets(const RadialProfile& a_theta, const RadialProfile& q, int J, int n) {
  auto sign = [](int l) { return (l % 2) ? -1.0 : 1.0; };
  return make_jets(
      {2 * M_PI}, n, J,
      [](int, int, int l, const double*) {
        double f = 1.0;
        for (int i = 2; i <= l + 1; ++i) f *= i;
        return f;
      },
      {[&](int l, const double*) { return sign(l) * a_theta.derivative(1.0, l); }},
      [&](int l, const double*) { return sign(l) * q.derivative(1.0, l); });
}

// ---- symbol calculus -------------------------------------------------------------------------

namespace {

int msize(const Multi& a) { return a[0] + a[1]; }

struct Calc {
  const BoundaryGrid& grid;
  int m;
  std::vector<TaylorField> ginv;
  std::vector<std::vector<TaylorField>> dginv;  // [axis][ab], axis == m is the normal direction

  Calc(const BoundaryGrid& g, std::vector<TaylorField> gi) : grid(g), m(g.dim()), ginv(std::move(gi)) {
    dginv.resize(m + 1);
    for (int ax = 0; ax < m; ++ax)
      for (const auto& f : ginv) dginv[ax].push_back(f.dx(grid, ax));
    for (const auto& f : ginv) dginv[m].push_back(f.dn());
  }

  static void add(HomTerm& t, const Multi& al, const TaylorField& f) {
    auto it = t.c.find(al);
    if (it == t.c.end())
      t.c.emplace(al, f);
    else
      it->second = it->second + f;
  }

  HomTerm dxi(const HomTerm& T, int gam) const {
    HomTerm r;
    r.degree = T.degree - 1;
    for (const auto& [al, c] : T.c) {
      if (al[gam] > 0) {
        Multi b = al;
        --b[gam];
        add(r, b, c.scaled(static_cast<double>(al[gam])));
      }
      const int p = T.degree - msize(al);
      if (p != 0)
        for (int d = 0; d < m; ++d) {
          Multi b = al;
          ++b[d];
          add(r, b, (ginv[gam * m + d] * c).scaled(static_cast<double>(p)));
        }
    }
    return r;
  }

  // axis < m tangential, axis == m normal
  HomTerm dx(const HomTerm& T, int axis) const {
    HomTerm r;
    r.degree = T.degree;
    for (const auto& [al, c] : T.c) {
      add(r, al, axis < m ? c.dx(grid, axis) : c.dn());
      const int p = T.degree - msize(al);
      if (p != 0)
        for (int g = 0; g < m; ++g)
          for (int d = 0; d < m; ++d) {
            Multi b = al;
            ++b[g];
            ++b[d];
            add(r, b, (dginv[axis][g * m + d] * c).scaled(0.5 * p));
          }
    }
    return r;
  }

  static HomTerm mul(const HomTerm& A, const HomTerm& B) {
    HomTerm r;
    r.degree = A.degree + B.degree;
    for (const auto& [a1, c1] : A.c)
      for (const auto& [a2, c2] : B.c) add(r, Multi{a1[0] + a2[0], a1[1] + a2[1]}, c1 * c2);
    return r;
  }

  static HomTerm mulf(const HomTerm& A, const TaylorField& f) {
    HomTerm r;
    r.degree = A.degree;
    for (const auto& [al, c] : A.c) r.c.emplace(al, c * f);
    return r;
  }

  static HomTerm scaled(const HomTerm& A, cplx s) {
    HomTerm r;
    r.degree = A.degree;
    for (const auto& [al, c] : A.c) r.c.emplace(al, c.scaled(s));
    return r;
  }

  static void accumulate(HomTerm& into, const HomTerm& t) {
    for (const auto& [al, c] : t.c) add(into, al, c);
  }

  std::vector<Multi> multis(int order) const {
    std::vector<Multi> out;
    if (m == 1) return {Multi{order, 0}};
    for (int i = 0; i <= order; ++i) out.push_back(Multi{i, order - i});
    return out;
  }
};

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

cplx ipow_minus_i(int k) {
  static const cplx v[4] = {1.0, cplx(0, -1), -1.0, cplx(0, 1)};
  return v[k % 4];
}

cplx eval_with(const HomTerm& t, const std::vector<TaylorField>& ginv, int m, int node, const double* xi) {
  double n2 = 0.0;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) n2 += ginv[a * m + b].t[0](node).real() * xi[a] * xi[b];
  const double nrm = std::sqrt(n2);
  cplx s = 0.0;
  for (const auto& [al, c] : t.c) {
    double mono = std::pow(nrm, static_cast<double>(t.degree - msize(al)));
    for (int a = 0; a < m; ++a) mono *= std::pow(xi[a], al[a]);
    s += c.t.at(0)(node) * mono;
  }
  return s;
}

}  // namespace

const HomTerm& PhgSymbol::term(int degree) const {
  for (const auto& t : terms)
    if (t.degree == degree) return t;
  throw InvalidArgument("symbol has no term of degree " + std::to_string(degree));
}

cplx PhgSymbol::eval(int degree, int node, const double* xi) const {
  return eval_with(term(degree), ginv, grid.dim(), node, xi);
}

cplx PhgSymbol::eval_unit(int degree, int node, const double* xi) const {
  const int m = grid.dim();
  double n2 = 0.0;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) n2 += ginv[a * m + b].t[0](node).real() * xi[a] * xi[b];
  const double nrm = std::sqrt(n2);
  double u[2] = {xi[0] / nrm, m > 1 ? xi[1] / nrm : 0.0};
  return eval(degree, node, u);
}

cplx eval_term(const PhgSymbol& s, const HomTerm& t, int node, const double* xi) {
  return eval_with(t, s.ginv, s.grid.dim(), node, xi);
}

nlohmann::json PhgSymbol::to_json() const {
  nlohmann::json j;
  j["periods"] = grid.periods();
  j["n"] = grid.n();
  j["J"] = J;
  j["representation"] = "sum_alpha c_alpha(x) xi^alpha |xi|^(degree-|alpha|)";
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : terms) {
    nlohmann::json cj = nlohmann::json::array();
    for (const auto& [al, c] : t.c) {
      nlohmann::json modes = nlohmann::json::array();
      for (const auto& [k, v] : grid.fourier(c.t.at(0), 1e-13))
        modes.push_back({{"mode", k}, {"re", v.real()}, {"im", v.imag()}});
      if (modes.empty()) continue;
      cj.push_back({{"alpha", std::vector<int>(al.begin(), al.begin() + grid.dim())}, {"fourier", modes}});
    }
    tj.push_back({{"degree", t.degree}, {"coefficients", cj}});
  }
  j["terms"] = tj;
  return j;
}

PhgSymbol symbol_factorize(const BoundaryJets& jets, int J) {
  jets.validate();
  if (J < 1 || J > jets.J) throw InvalidArgument("order J must lie in 1..jet order");
  const int m = jets.dim();
  const int nodes = jets.grid.size();
  std::vector<TaylorField> gi;
  for (const auto& g : jets.ginv) gi.push_back(TaylorField::from_jets(std::vector<Eigen::ArrayXcd>(g.begin(), g.begin() + J + 2)));
  Calc calc(jets.grid, gi);

  // D = det g^{-1}; log delta = -log(D)/2.
  TaylorField D = m == 1 ? gi[0] : gi[0] * gi[3] - gi[1] * gi[2];
  const TaylorField Dinv = D.reciprocal();
  const TaylorField E = (D.dn() * Dinv).scaled(-0.5);
  std::vector<TaylorField> dlog(m);
  for (int al = 0; al < m; ++al) dlog[al] = (D.dx(jets.grid, al) * Dinv).scaled(-0.5);
  std::vector<TaylorField> a(m);
  for (int al = 0; al < m; ++al) a[al] = TaylorField::from_jets(std::vector<Eigen::ArrayXcd>(jets.a[al].begin(), jets.a[al].begin() + J + 1));
  std::vector<Eigen::ArrayXcd> qj(jets.q.begin(), jets.q.begin() + J);
  const TaylorField q = TaylorField::from_jets(qj);

  const cplx I(0, 1);
  // Q = sum of q2 + q1 + q0
  HomTerm q1;
  q1.degree = 1;
  std::vector<TaylorField> ga(m);
  for (int be = 0; be < m; ++be) {
    TaylorField c = TaylorField::constant(nodes, J + 1, 0.0), div = TaylorField::constant(nodes, J + 1, 0.0);
    for (int al = 0; al < m; ++al) {
      c = c + (gi[al * m + be] * a[al]).scaled(2.0);
      div = div + gi[al * m + be].dx(jets.grid, al) + gi[al * m + be] * dlog[al];
    }
    Multi e{0, 0};
    e[be] = 1;
    Calc::add(q1, e, c - div.scaled(I));
    ga[be] = TaylorField::constant(nodes, J + 1, 0.0);
    for (int al = 0; al < m; ++al) ga[be] = ga[be] + gi[be * m + al] * a[al];
  }
  HomTerm q0;
  q0.degree = 0;
  {
    TaylorField c = q;
    TaylorField div = TaylorField::constant(nodes, J + 1, 0.0);
    for (int al = 0; al < m; ++al) {
      c = c + ga[al] * a[al];
      div = div + ga[al].dx(jets.grid, al) + dlog[al] * ga[al];
    }
    Calc::add(q0, Multi{0, 0}, c - div.scaled(I));
  }

  std::map<int, HomTerm> b;
  b[1].degree = 1;
  Calc::add(b[1], Multi{0, 0}, TaylorField::constant(nodes, J + 1, 1.0));

  // caches of d_xi^gamma b_j and d_x^gamma b_k
  std::map<std::pair<int, Multi>, HomTerm> cxi, cx;
  auto dxi_g = [&](int j, const Multi& g) -> const HomTerm& {
    auto key = std::make_pair(j, g);
    auto it = cxi.find(key);
    if (it != cxi.end()) return it->second;
    HomTerm t = b.at(j);
    for (int ax = 0; ax < m; ++ax)
      for (int r = 0; r < g[ax]; ++r) t = calc.dxi(t, ax);
    return cxi.emplace(key, std::move(t)).first->second;
  };
  auto dx_g = [&](int k, const Multi& g) -> const HomTerm& {
    auto key = std::make_pair(k, g);
    auto it = cx.find(key);
    if (it != cx.end()) return it->second;
    HomTerm t = b.at(k);
    for (int ax = 0; ax < m; ++ax)
      for (int r = 0; r < g[ax]; ++r) t = calc.dx(t, ax);
    return cx.emplace(key, std::move(t)).first->second;
  };

  for (int deg = 1; deg >= 1 - J; --deg) {
    // 2|xi| b_{deg-1} = Q_deg - sum' + E b_deg + d_n b_deg
    HomTerm rhs;
    rhs.degree = deg;
    if (deg == 1) Calc::accumulate(rhs, q1);
    if (deg == 0) Calc::accumulate(rhs, q0);
    for (int j = 1; j >= deg; --j)
      for (int k = 1; k >= deg; --k) {
        const int order = j + k - deg;
        if (order < 0) continue;
        if (order == 0 && (j == deg - 1 || k == deg - 1)) continue;
        for (const Multi& g : calc.multis(order)) {
          const double gf = factorial(g[0]) * factorial(g[1]);
          HomTerm prod = Calc::mul(dxi_g(j, g), dx_g(k, g));
          Calc::accumulate(rhs, Calc::scaled(prod, -ipow_minus_i(order) / gf));
        }
      }
    Calc::accumulate(rhs, Calc::mulf(b.at(deg), E));
    Calc::accumulate(rhs, calc.dx(b.at(deg), m));
    HomTerm next = Calc::scaled(rhs, 0.5);
    next.degree = deg - 1;
    b[deg - 1] = std::move(next);
  }

  PhgSymbol s;
  s.grid = jets.grid;
  s.J = J;
  s.ginv = gi;
  for (int deg = 1; deg >= -J; --deg) s.terms.push_back(b.at(deg));
  return s;
}

HomTerm subprincipal_term(const PhgSymbol& s) {
  Calc calc(s.grid, s.ginv);
  HomTerm sub = s.term(0);
  for (int be = 0; be < s.grid.dim(); ++be) {
    const HomTerm t = calc.dx(calc.dxi(s.term(1), be), be);
    Calc::accumulate(sub, Calc::scaled(t, -1.0 / cplx(0, 2)));
  }
  return sub;
}

HomTerm half_density_subprincipal(const PhgSymbol& s) {
  HomTerm sub = subprincipal_term(s);
  const int m = s.grid.dim();
  Eigen::ArrayXcd det = s.ginv[0].value();
  if (m == 2) det = det * s.ginv[3].value() - s.ginv[1].value() * s.ginv[2].value();
  // f = log delta'^(1/2), delta' = det(g_ab)^(1/2) on the boundary
  const Eigen::ArrayXcd f = -0.25 * det.log();
  for (int b = 0; b < m; ++b) {
    Eigen::ArrayXcd c = Eigen::ArrayXcd::Zero(s.grid.size());
    for (int a = 0; a < m; ++a) c += s.grid.diff(f, a) * s.ginv[a * m + b].value();
    Multi e{0, 0};
    e[b] = 1;
    Calc::add(sub, e, TaylorField{{cplx(0, 1) * c}});
  }
  return sub;
}

Eigen::ArrayXcd gauge_form(const BoundaryGrid& g, const BoundaryGauge& theta, int j) {
  if (theta.psi.size() != g.size()) throw InvalidArgument("gauge sampled on another grid");
  Eigen::ArrayXcd w = g.diff(theta.psi, j);
  const int wj = j < static_cast<int>(theta.winding.size()) ? theta.winding[j] : 0;
  return w + 2 * M_PI * wj / g.periods()[j];
}

PhgSymbol gauge_shift_subprincipal(const PhgSymbol& s, const BoundaryGauge& theta) {
  const int m = s.grid.dim();
  const int nodes = s.grid.size();
  std::vector<TaylorField> g0;
  for (const auto& f : s.ginv) g0.push_back(f.truncated(0));
  Calc calc(s.grid, g0);
  std::vector<TaylorField> w(m);
  for (int j = 0; j < m; ++j) w[j] = TaylorField{{gauge_form(s.grid, theta, j)}};

  // P_gamma = conj(theta) D^gamma theta, P_{gamma + e_b} = w_b P_gamma + D_b P_gamma.
  std::map<Multi, TaylorField> P;
  P[Multi{0, 0}] = TaylorField::constant(nodes, 0, 1.0);
  const int maxo = s.J + 2;
  for (int o = 1; o <= maxo; ++o)
    for (const Multi& g : calc.multis(o)) {
      int b = g[0] > 0 ? 0 : 1;
      Multi prev = g;
      --prev[b];
      const TaylorField& pp = P.at(prev);
      P[g] = w[b] * pp + pp.dx(s.grid, b).scaled(cplx(0, -1));
    }

  PhgSymbol r = s;
  r.ginv = g0;
  for (auto& t : r.terms) t.c.clear();
  for (const auto& src : s.terms) {
    HomTerm b0;
    b0.degree = src.degree;
    for (const auto& [al, c] : src.c) b0.c.emplace(al, c.truncated(0));
    for (auto& dst : r.terms) {
      const int o = src.degree - dst.degree;
      if (o < 0) continue;
      for (const Multi& g : calc.multis(o)) {
        HomTerm t = b0;
        for (int ax = 0; ax < m; ++ax)
          for (int k = 0; k < g[ax]; ++k) t = calc.dxi(t, ax);
        Calc::accumulate(dst, Calc::scaled(Calc::mulf(t, P.at(g)), 1.0 / (factorial(g[0]) * factorial(g[1]))));
      }
    }
  }
  return r;
}

std::vector<std::array<double, 2>> unit_covectors(const PhgSymbol& s, int node, int count) {
  const int m = s.grid.dim();
  std::vector<std::array<double, 2>> out;
  if (m == 1) {
    const double g = s.ginv[0].t[0](node).real();
    out.push_back({1.0 / std::sqrt(g), 0.0});
    out.push_back({-1.0 / std::sqrt(g), 0.0});
    return out;
  }
  for (int k = 0; k < count; ++k) {
    const double ph = 2 * M_PI * k / count;
    const double c = std::cos(ph), sn = std::sin(ph);
    double n2 = 0.0;
    const double v[2] = {c, sn};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) n2 += s.ginv[a * 2 + b].t[0](node).real() * v[a] * v[b];
    out.push_back({c / std::sqrt(n2), sn / std::sqrt(n2)});
  }
  return out;
}

ParitySplit parity_split(const PhgSymbol& s, const std::function<cplx(int node, const double* xi)>& f) {
  const int m = s.grid.dim();
  const int nodes = s.grid.size();
  ParitySplit out;
  out.even = Eigen::ArrayXcd::Zero(nodes);
  out.odd.assign(m, Eigen::ArrayXcd::Zero(nodes));
  for (int i = 0; i < nodes; ++i) {
    const auto cov = unit_covectors(s, i);
    const int ns = static_cast<int>(cov.size());
    Eigen::MatrixXd A(ns, 1 + m);
    Eigen::VectorXcd y(ns);
    for (int k = 0; k < ns; ++k) {
      A(k, 0) = 1.0;
      for (int a = 0; a < m; ++a) A(k, 1 + a) = cov[k][a];
      y(k) = f(i, cov[k].data());
    }
    const auto qr = A.colPivHouseholderQr();
    const Eigen::VectorXcd re = qr.solve(y.real()).cast<cplx>();
    const Eigen::VectorXcd im = qr.solve(y.imag()).cast<cplx>();
    const Eigen::VectorXcd x = re + cplx(0, 1) * im;
    out.residual = std::max(out.residual, (A.cast<cplx>() * x - y).cwiseAbs().maxCoeff());
    out.even(i) = x(0);
    // u^b theta_b = v(theta^sharp) = v_a g^{ab} theta_b, so v = g u.
    Eigen::MatrixXd G(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) G(a, b) = s.ginv[a * m + b].t[0](i).real();
    const Eigen::MatrixXd Gl = G.inverse();
    for (int a = 0; a < m; ++a) {
      cplx v = 0.0;
      for (int b = 0; b < m; ++b) v += Gl(a, b) * x(1 + b);
      out.odd[a](i) = v;
    }
  }
  return out;
}

double term_difference(const PhgSymbol& A, const PhgSymbol& B, int degree) {
  double m = 0.0;
  for (int i = 0; i < A.grid.size(); ++i)
    for (const auto& xi : unit_covectors(A, i))
      m = std::max(m, std::abs(A.eval(degree, i, xi.data()) - B.eval(degree, i, xi.data())));
  return m;
}

DifferenceStructure symbol_difference_structure(const PhgSymbol& A, const PhgSymbol& B, const BoundaryJets& jA,
                                                const BoundaryJets& jB, int j, double tol) {
  if (j < 1 || j > std::min(A.J, B.J)) throw InvalidArgument("degree index j outside the stored symbol");
  const int m = A.grid.dim();
  auto diff = [&](int node, const double* xi) { return A.eval(-j, node, xi) - B.eval(-j, node, xi); };
  const ParitySplit ps = parity_split(A, diff);
  DifferenceStructure out;
  out.j = j;
  out.parity_residual = ps.residual;
  const double scale = std::ldexp(1.0, j) / kLowerOrderSign;
  out.dq = ps.even * scale;
  for (int a = 0; a < m; ++a) out.da.push_back(ps.odd[a] * scale);

  const Eigen::ArrayXcd dq = jA.q.at(j - 1) - jB.q.at(j - 1);
  std::vector<Eigen::ArrayXcd> da;
  for (int a = 0; a < m; ++a) da.push_back(jA.a[a].at(j) - jB.a[a].at(j));
  for (int i = 0; i < A.grid.size(); ++i)
    for (const auto& xi : unit_covectors(A, i)) {
      cplx pred = dq(i);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) pred += da[a](i) * A.ginv[a * m + b].t[0](i).real() * xi[b];
      pred *= kLowerOrderSign / std::ldexp(1.0, j);
      out.T = std::max(out.T, std::abs(diff(i, xi.data()) - pred));
    }
  if (ps.residual > tol)
    throw StructureViolation("degree " + std::to_string(-j) + " difference is not of the form f0 + f1(theta), residual " +
                             std::to_string(ps.residual));
  return out;
}

// ---- disk oracle -----------------------------------------------------------------------------

namespace {

double riccati(const RadialProfile& a, const RadialProfile& q, int k, int steps) {
  const double r0 = 1e-3;
  const double t0 = std::log(r0);
  const double alpha = (2.0 * k * (a.c.size() > 2 ? a.c[2] : 0.0) + (q.c.empty() ? 0.0 : q.c[0])) / (2.0 * std::abs(k) + 2.0);
  double s = std::abs(k) + alpha * r0 * r0;
  const double h = -t0 / steps;
  auto f = [&](double t, double y) {
    const double r = std::exp(t);
    const double ka = k + a.value(r);
    return ka * ka - y * y + q.value(r) * r * r;
  };
  double t = t0;
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(t, s);
    const double k2 = f(t + h / 2, s + h / 2 * k1);
    const double k3 = f(t + h / 2, s + h / 2 * k2);
    const double k4 = f(t + h, s + h * k3);
    s += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += h;
    if (!std::isfinite(s) || std::abs(s) > 1e12)
      throw ResonanceError("radial solution vanishes inside the disk for mode " + std::to_string(k));
  }
  return s;
}

}  // namespace

OracleValue disk_dn_oracle(const RadialProfile& a_theta, const RadialProfile& q, int k, int steps) {
  if ((a_theta.c.size() > 0 && a_theta.c[0] != 0.0) || (a_theta.c.size() > 1 && a_theta.c[1] != 0.0))
    throw InvalidArgument("a_theta must vanish to second order at the center");
  if (steps < 16) throw InvalidArgument("too few steps");
  const double coarse = riccati(a_theta, q, k, steps);
  const double fine = riccati(a_theta, q, k, 2 * steps);
  OracleValue v;
  v.k = k;
  v.sigma = fine;
  v.step_change = std::abs(fine - coarse);
  v.extrapolated = fine + (fine - coarse) / 15.0;
  v.steps = 2 * steps;
  if (v.step_change > 1e-6 * std::max(1.0, std::abs(fine)))
    throw ConvergenceFailure("radial ODE not converged under step halving for mode " + std::to_string(k));
  return v;
}

nlohmann::json AsymptoticFit::to_json() const {
  return {{"modes", modes},
          {"terms_used", terms_used},
          {"residual_order", residual_order},
          {"residual_scale", residual_scale},
          {"max_residual", max_residual},
          {"exact", exact},
          {"fitted_minus1", fitted_minus1},
          {"predicted_minus1", predicted_minus1}};
}

AsymptoticFit asymptotic_match(const std::vector<OracleValue>& oracle, const PhgSymbol& s, int terms,
                               const std::map<int, double>& p_override) {
  if (oracle.size() < 8) throw InsufficientModes("asymptotic fit needs at least 8 modes");
  if (terms < 1 || terms > s.J + 2) throw InvalidArgument("terms outside the stored symbol");
  auto p = [&](int d, int sgn) {
    auto it = p_override.find(d);
    if (it != p_override.end()) return it->second;
    const double xi = sgn;
    return s.eval_unit(d, 0, &xi).real();
  };
  AsymptoticFit fit;
  fit.modes = static_cast<int>(oracle.size());
  fit.terms_used = terms;
  fit.predicted_minus1 = s.J >= 1 ? p(-1, 1) : 0.0;
  const int n = fit.modes;
  Eigen::MatrixXd A(n, 2), C(n, 3);
  Eigen::VectorXd y(n), z(n);
  for (int i = 0; i < n; ++i) {
    const int k = oracle[i].k;
    if (k == 0) throw InvalidArgument("mode 0 has no direction");
    const int sg = k > 0 ? 1 : -1;
    const double kk = std::abs(k);
    double sum = 0.0;
    for (int d = 1; d > 1 - terms; --d) sum += p(d, sg) * std::pow(kk, d);
    const double r = oracle[i].extrapolated - sum;
    fit.max_residual = std::max(fit.max_residual, std::abs(r));
    A(i, 0) = 1.0;
    A(i, 1) = std::log(kk);
    y(i) = std::log(std::max(std::abs(r), 1e-300));
    C(i, 0) = 1.0 / kk;
    C(i, 1) = 1.0 / (kk * kk);
    C(i, 2) = 1.0 / (kk * kk * kk);
    z(i) = oracle[i].extrapolated - p(1, sg) * kk - p(0, sg);
  }
  fit.fitted_minus1 = C.colPivHouseholderQr().solve(z)(0);
  if (fit.max_residual < 1e-12) {
    fit.exact = true;
    return fit;
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  fit.residual_order = -c(1);
  fit.residual_scale = std::exp(c(0));
  return fit;
}

}  // namespace maglab
