#include "maglab/geometry_core.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "maglab/errors.hpp"

namespace maglab {

std::string to_string(ChartKind k) {
  switch (k) {
    case ChartKind::flat_torus: return "flat_torus";
    case ChartKind::isothermal_2d: return "isothermal_2d";
    case ChartKind::general_nd: return "general_nd";
  }
  return "unknown";
}

double LocalGeometry::lower_riemann(int a, int b, int c, int d) const {
  double s = 0.0;
  for (int e = 0; e < n; ++e) s += g[a][e] * riemann[e][b][c][d];
  return s;
}

double LocalGeometry::sectional(const double* u, const double* v) const {
  double num = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) num += lower_riemann(a, b, c, d) * u[a] * v[b] * u[c] * v[d];
  double uu = 0, vv = 0, uv = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      uu += g[a][b] * u[a] * u[b];
      vv += g[a][b] * v[a] * v[b];
      uv += g[a][b] * u[a] * v[b];
    }
  return num / (uu * vv - uv * uv);
}

std::vector<double> MetricChart::periods() const {
  std::vector<double> p;
  for (const auto& a : axes_)
    if (a.periodic) p.push_back(a.length());
  return p;
}

bool MetricChart::fully_periodic() const {
  for (const auto& a : axes_)
    if (!a.periodic) return false;
  return true;
}

bool MetricChart::contains(const double* x) const {
  for (int i = 0; i < dim_; ++i)
    if (!std::isfinite(x[i]) || !axes_[i].contains(x[i])) return false;
  return true;
}

double MetricChart::phi(const double* x) const {
  if (kind_ == ChartKind::isothermal_2d) return phi_(seed(x, dim_)).v;
  return 0.0;
}

static void fill_from_metric(LocalGeometry& G, const std::array<std::array<Jet, 3>, 3>& gj) {
  const int n = G.n;
  Eigen::MatrixXd g(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      G.g[j][k] = gj[j][k].v;
      g(j, k) = gj[j][k].v;
      for (int l = 0; l < n; ++l) G.dg[l][j][k] = gj[j][k].d[l];
    }
  G.det = g.determinant();
  if (!std::isfinite(G.det) || G.det <= 1e-14 * std::pow(g.cwiseAbs().maxCoeff(), n))
    throw NumericalDegeneracy("metric is degenerate or not positive definite");
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) throw NumericalDegeneracy("metric is not positive definite");
  const Eigen::MatrixXd gi = g.inverse();
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) G.ginv[j][k] = gi(j, k);

  for (int l = 0; l < n; ++l)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) s -= gi(j, a) * G.dg[l][a][b] * gi(b, k);
        G.dginv[l][j][k] = s;
      }

  // first-kind symbols and their derivatives
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int d = 0; d < n; ++d)
          s += 0.5 * gi(a, d) * (G.dg[b][d][c] + G.dg[c][d][b] - G.dg[d][b][c]);
        G.gamma[a][b][c] = s;
      }
  for (int l = 0; l < n; ++l)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double s = 0.0;
          for (int d = 0; d < n; ++d) {
            const double first = G.dg[b][d][c] + G.dg[c][d][b] - G.dg[d][b][c];
            const double second = gj[d][c].h[l][b] + gj[d][b].h[l][c] - gj[b][c].h[l][d];
            s += 0.5 * (G.dginv[l][a][d] * first + gi(a, d) * second);
          }
          G.dgamma[l][a][b][c] = s;
        }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double s = G.dgamma[j][a][k][b] - G.dgamma[k][a][j][b];
          for (int c = 0; c < n; ++c) s += G.gamma[a][j][c] * G.gamma[c][k][b] - G.gamma[a][k][c] * G.gamma[c][j][b];
          G.riemann[a][b][j][k] = s;
        }
}

LocalGeometry MetricChart::geometry(const double* x) const {
  if (!contains(x)) throw DomainError("point outside chart domain");
  LocalGeometry G;
  G.n = dim_;
  const JetPoint p = seed(x, dim_);
  std::array<std::array<Jet, 3>, 3> gj{};
  switch (kind_) {
    case ChartKind::flat_torus:
      for (int j = 0; j < dim_; ++j) gj[j][j] = Jet(1.0);
      break;
    case ChartKind::isothermal_2d: {
      const Jet f = phi_(p);
      if (!std::isfinite(f.v)) throw NumericalDegeneracy("conformal factor not finite");
      const Jet e2 = exp(2.0 * f);
      gj[0][0] = e2;
      gj[1][1] = e2;
      G.phi = f.v;
      G.dphi = {f.d[0], f.d[1]};
      G.lap_phi = f.h[0][0] + f.h[1][1];
      G.gauss_K = -std::exp(-2.0 * f.v) * G.lap_phi;
      break;
    }
    case ChartKind::general_nd:
      metric_(p, gj);
      break;
  }
  fill_from_metric(G, gj);
  if (kind_ != ChartKind::isothermal_2d && dim_ == 2) G.gauss_K = G.lower_riemann(0, 1, 0, 1) / G.det;
  return G;
}

const std::vector<LocalGeometry>& MetricChart::node_geometry() const {
  std::call_once(cache_->once, [this] {
    const Grid gr = grid();
    std::vector<LocalGeometry> out(gr.size());
    std::vector<double> x(dim_);
    for (int i = 0; i < gr.size(); ++i) {
      for (int a = 0; a < dim_; ++a) x[a] = gr.coord(i, a);
      out[i] = geometry(x.data());
    }
    cache_->nodes = std::move(out);
  });
  return cache_->nodes;
}

nlohmann::json MetricChart::to_json() const {
  nlohmann::json j;
  j["dim"] = dim_;
  j["kind"] = to_string(kind_);
  j["label"] = label_;
  j["periods"] = periods();
  j["resolution"] = res_;
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& a : axes_) axes.push_back({{"periodic", a.periodic}, {"lo", a.lo}, {"hi", a.hi}});
  j["axes"] = axes;

  // Periodic charts store Fourier coefficients of the sampled fields, others store node samples.
  const Grid gr = grid();
  std::vector<std::string> names;
  std::vector<std::vector<cplx>> fields;
  std::vector<double> x(dim_);
  if (kind_ == ChartKind::isothermal_2d) {
    names.push_back("phi");
    fields.emplace_back(gr.size());
    for (int i = 0; i < gr.size(); ++i) {
      for (int a = 0; a < dim_; ++a) x[a] = gr.coord(i, a);
      fields[0][i] = phi(x.data());
    }
  } else if (kind_ == ChartKind::general_nd) {
    const auto& nodes = node_geometry();
    for (int p = 0; p < dim_; ++p)
      for (int q = p; q < dim_; ++q) {
        names.push_back("g" + std::to_string(p + 1) + std::to_string(q + 1));
        fields.emplace_back(gr.size());
        for (int i = 0; i < gr.size(); ++i) fields.back()[i] = nodes[i].g[p][q];
      }
  }
  nlohmann::json fc = nlohmann::json::object();
  const bool spectral = fully_periodic();
  for (size_t f = 0; f < fields.size(); ++f) {
    const std::vector<cplx> data = spectral ? dft_forward(gr, fields[f]) : fields[f];
    std::vector<double> re, im;
    for (const auto& c : data) {
      re.push_back(c.real());
      im.push_back(c.imag());
    }
    fc[names[f]] = {{"representation", spectral ? "fourier" : "samples"}, {"re", re}, {"im", im}};
  }
  j["field_coefficients"] = fc;
  return j;
}

MetricChart make_flat_torus(const std::vector<double>& periods, std::vector<int> resolution) {
  if (periods.empty() || periods.size() > 3) throw InvalidArgument("flat torus needs 1 to 3 periods");
  MetricChart c;
  c.dim_ = static_cast<int>(periods.size());
  c.kind_ = ChartKind::flat_torus;
  for (double p : periods) {
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("torus periods must be positive");
    c.axes_.push_back(Axis{true, 0.0, p});
  }
  if (resolution.empty()) resolution.assign(c.dim_, 16);
  if (static_cast<int>(resolution.size()) != c.dim_) throw InvalidArgument("resolution size mismatch");
  c.res_ = std::move(resolution);
  c.label_ = c.dim_ == 1 ? "circle" : "flat_torus";
  return c;
}

MetricChart make_isothermal_chart(ScalarFn phi, std::vector<Axis> axes, std::vector<int> resolution) {
  if (axes.size() != 2 || resolution.size() != 2) throw InvalidArgument("isothermal chart is two-dimensional");
  MetricChart c;
  c.dim_ = 2;
  c.kind_ = ChartKind::isothermal_2d;
  c.axes_ = std::move(axes);
  c.res_ = std::move(resolution);
  c.phi_ = std::move(phi);
  c.label_ = "isothermal";
  const Grid gr = c.grid();
  double x[2];
  for (int i = 0; i < gr.size(); ++i) {
    x[0] = gr.coord(i, 0);
    x[1] = gr.coord(i, 1);
    const Jet f = c.phi_(seed(x, 2));
    bool ok = std::isfinite(f.v);
    for (int a = 0; a < 2; ++a) ok = ok && std::isfinite(f.d[a]) && std::isfinite(f.h[a][0]) && std::isfinite(f.h[a][1]);
    if (!ok) throw InvalidArgument("conformal factor has non-finite samples");
  }
  return c;
}

MetricChart make_general_chart(MetricFn g, std::vector<Axis> axes, std::vector<int> resolution, std::string label) {
  if (axes.size() < 2 || axes.size() > 3 || resolution.size() != axes.size())
    throw InvalidArgument("general chart needs 2 or 3 axes");
  MetricChart c;
  c.dim_ = static_cast<int>(axes.size());
  c.kind_ = ChartKind::general_nd;
  c.axes_ = std::move(axes);
  c.res_ = std::move(resolution);
  c.metric_ = std::move(g);
  c.label_ = std::move(label);
  return c;
}

MetricChart hyperbolic_patch(int resolution, double ylo, double yhi, double xperiod) {
  auto chart = make_isothermal_chart([](const JetPoint& p) { return -log(p[1]); },
                                     {Axis{true, 0.0, xperiod}, Axis{false, ylo, yhi}}, {resolution, resolution});
  return chart;
}

MetricChart bumpy_torus(int resolution, double eps) {
  return make_isothermal_chart([eps](const JetPoint& p) { return eps * sin(p[0]) * sin(p[1]); },
                               {Axis{true, 0.0, 2 * M_PI}, Axis{true, 0.0, 2 * M_PI}}, {resolution, resolution});
}

MetricChart warped_three_torus(int resolution, double eps) {
  const Axis ax{true, 0.0, 2 * M_PI};
  return make_general_chart(
      [eps](const JetPoint& p, std::array<std::array<Jet, 3>, 3>& g) {
        const Jet f = eps * (sin(p[2]) + 0.5 * cos(p[1]));
        const Jet h = eps * cos(p[2]);
        g[0][0] = exp(2.0 * f);
        g[1][1] = exp(2.0 * h);
        g[2][2] = Jet(1.0);
        g[0][2] = g[2][0] = 0.3 * eps * sin(p[0]);
      },
      {ax, ax, ax}, {resolution, resolution, resolution}, "warped_three_torus");
}

MetricChart hyperbolic_times_circle(int resolution) {
  return make_general_chart(
      [](const JetPoint& p, std::array<std::array<Jet, 3>, 3>& g) {
        const Jet iy2 = 1.0 / (p[1] * p[1]);
        g[0][0] = iy2;
        g[1][1] = iy2;
        g[2][2] = Jet(1.0);
      },
      {Axis{true, 0.0, 2 * M_PI}, Axis{false, 1.0, 2.0}, Axis{true, 0.0, 2 * M_PI}},
      {resolution, resolution, resolution}, "hyperbolic_times_circle");
}

double gauss_curvature(const MetricChart& chart, const double* x) {
  if (chart.dim() != 2) throw KindMismatch("Gauss curvature needs a 2D chart");
  return chart.geometry(x).gauss_K;
}

Tensor4 riemann_tensor(const MetricChart& chart, const double* x) { return chart.geometry(x).riemann; }

double christoffel_compatibility_residual(const LocalGeometry& G) {
  const int n = G.n;
  double r = 0.0;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        double s = G.dginv[l][j][k];
        for (int m = 0; m < n; ++m) s += G.ginv[j][m] * G.gamma[k][l][m] + G.ginv[k][m] * G.gamma[j][l][m];
        r = std::max(r, std::abs(s));
      }
  return r;
}

double riemann_antisymmetry_residual(const LocalGeometry& G) {
  const int n = G.n;
  double r = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) r = std::max(r, std::abs(G.riemann[a][b][j][k] + G.riemann[a][b][k][j]));
  return r;
}

}  // namespace maglab
