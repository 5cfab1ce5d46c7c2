#include "maglab/hyperbolic_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <map>
#include <numeric>
#include <thread>
#include <unordered_map>

namespace maglab {

Mat2 FuchsianGroup::letter(int l) const {
  const int g = std::abs(l) - 1;
  if (l == 0 || g >= static_cast<int>(generators.size())) throw InvalidArgument("bad letter");
  return l > 0 ? generators[g] : Mat2(generators[g].inverse());
}

Mat2 FuchsianGroup::word_matrix(const std::vector<int>& w) const {
  Mat2 m = Mat2::Identity();
  for (int l : w) m = m * letter(l);
  return m;
}

double FuchsianGroup::relator_residual() const {
  const Mat2 r = word_matrix(relator);
  return std::min((r - Mat2::Identity()).cwiseAbs().maxCoeff(), (r + Mat2::Identity()).cwiseAbs().maxCoeff());
}

std::string word_string(const std::vector<int>& w) {
  std::string s;
  for (int l : w) s.push_back(static_cast<char>(l > 0 ? 'a' + l - 1 : 'A' - l - 1));
  return s;
}

std::vector<int> parse_word(const std::string& s) {
  std::vector<int> w;
  for (char ch : s) {
    if (ch >= 'a' && ch <= 'z')
      w.push_back(ch - 'a' + 1);
    else if (ch >= 'A' && ch <= 'Z')
      w.push_back(-(ch - 'A' + 1));
    else
      throw InvalidArgument(std::string("bad letter in word: ") + ch);
  }
  return w;
}

namespace {

using C2 = Eigen::Matrix2cd;

C2 rot(double t) {
  C2 r = C2::Zero();
  r(0, 0) = std::polar(1.0, t / 2);
  r(1, 1) = std::polar(1.0, -t / 2);
  return r;
}

}  // namespace

FuchsianGroup build_genus2_group() {
  // Regular octagon with all angles pi/4 in the disk; side i is the geodesic facing direction i*pi/4.
  // Side i is carried onto side j by rot(j pi/4) * T * rot(pi - i pi/4), T the translation with cosh d = 1 + sqrt 2.
  const double d = std::acosh(1.0 + std::sqrt(2.0));
  C2 T;
  T << std::cosh(d), std::sinh(d), std::sinh(d), std::cosh(d);
  auto pair = [&](int i, int j) -> C2 { return rot(j * M_PI / 4) * T * rot(M_PI - i * M_PI / 4); };
  // Sides in boundary order a b A B c d C D.
  const int side[4][2] = {{0, 2}, {1, 3}, {4, 6}, {5, 7}};
  const int dir[4] = {0, 1, 0, 1};
  C2 Cay;
  Cay << 1.0, cplx(0, -1), 1.0, cplx(0, 1);
  FuchsianGroup G;
  for (int k = 0; k < 4; ++k) {
    const C2 M = dir[k] == 0 ? pair(side[k][1], side[k][0]) : pair(side[k][0], side[k][1]);
    C2 Mr = Cay.inverse() * M * Cay;
    Mr /= std::sqrt(Mr.determinant());
    G.generators.push_back(Mr.real());
  }
  G.relator = {1, 2, -1, -2, 3, 4, -3, -4};
  // Circumradius of the octagon: cosh R = cot^2(pi/8).
  const double ct = 1.0 / std::tan(M_PI / 8);
  G.covering_radius = std::acosh(ct * ct);
  G.label = "genus2_octagon";
  return G;
}

Mat2 hyperbolic_power(const Mat2& m, double s) {
  Eigen::EigenSolver<Mat2> es(m);
  const Eigen::Vector2cd ev = es.eigenvalues();
  if (std::abs(ev(0).imag()) > 1e-12 || std::abs(ev(1).imag()) > 1e-12) throw NotHyperbolic("power needs real eigenvalues");
  const double sign = ev(0).real() < 0 ? -1.0 : 1.0;
  Eigen::Matrix2cd D = Eigen::Matrix2cd::Zero();
  for (int k = 0; k < 2; ++k) D(k, k) = std::pow(std::abs(ev(k).real()), s);
  const Eigen::Matrix2cd V = es.eigenvectors();
  return sign * (V * D * V.inverse()).real();
}

FuchsianGroup twisted_genus2_group(double s1, double s2, double t) {
  FuchsianGroup G = build_genus2_group();
  auto& g = G.generators;
  g[1] = g[1] * hyperbolic_power(g[0], s1);
  g[3] = g[3] * hyperbolic_power(g[2], s2);
  const Mat2 comm = g[0] * g[1] * g[0].inverse() * g[1].inverse();
  const Mat2 h = hyperbolic_power(comm, t);
  g[2] = h * g[2] * h.inverse();
  g[3] = h * g[3] * h.inverse();
  // Twisting moves the orbit of i by at most the twist displacement along each curve.
  const double shift = std::abs(s1) * geodesic_length(build_genus2_group().generators[0]) +
                       std::abs(s2) * geodesic_length(build_genus2_group().generators[2]) +
                       std::abs(t) * geodesic_length(comm);
  G.covering_radius += shift;
  G.label = "genus2_twisted";
  return G;
}

double geodesic_length(const Mat2& m, bool* near_parabolic) {
  const double tr = std::abs(m.trace());
  if (!(tr > 2.0)) throw NotHyperbolic("|trace| <= 2");
  if (near_parabolic) *near_parabolic = tr - 2.0 < 1e-8;
  return 2.0 * std::acosh(tr / 2.0);
}

double displacement(const Mat2& g) { return std::acosh(std::max(1.0, 0.5 * g.squaredNorm())); }

double poincare_det(const ClosedGeodesic& g) {
  const double s = std::sinh(0.5 * g.length);
  return 4.0 * s * s;
}

std::complex<double> trace_invariant(const ClosedGeodesic& g, double sub_integral, int maslov) {
  const double det = poincare_det(g);
  if (!(det > 0.0)) throw DegenerateOrbit("zero Poincare determinant");
  return std::abs(g.primitive_period) * std::polar(1.0, sub_integral) * std::polar(1.0, maslov * M_PI / 2) /
         std::sqrt(det);
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

namespace {

struct Key {
  long long v[4];
  bool operator==(const Key& o) const { return std::equal(v, v + 4, o.v); }
};
struct KeyHash {
  size_t operator()(const Key& k) const {
    size_t h = 1469598103934665603ull;
    for (long long x : k.v) h = (h ^ static_cast<size_t>(x)) * 1099511628211ull;
    return h;
  }
};

// Projective key: sign fixed by the first entry of non-negligible size, entries rounded to 1e-6.
Key pkey(const Mat2& m) {
  const double e[4] = {m(0, 0), m(0, 1), m(1, 0), m(1, 1)};
  double sg = 1.0;
  for (double x : e)
    if (std::abs(x) > 1e-6) {
      sg = x > 0 ? 1.0 : -1.0;
      break;
    }
  Key k;
  for (int i = 0; i < 4; ++i) k.v[i] = std::llround(sg * e[i] * 1e6);
  return k;
}

struct DSU {
  std::vector<int> p;
  explicit DSU(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) p[std::max(a, b)] = std::min(a, b);
  }
};

bool shorter_word(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return word_string(a) < word_string(b);
}

}  // namespace

LengthSpectrum enumerate_closed_geodesics(const FuchsianGroup& group, double L_max, const EnumerationOptions& opt) {
  if (!(L_max > 0.0)) throw InvalidArgument("L_max must be positive");
  const double R = group.covering_radius;
  const double tol = 1e-9;
  const double bound = L_max + 3 * R;
  const int ngen = static_cast<int>(group.generators.size());

  // Breadth-first ball of group elements; children of the last layer decide completeness.
  std::vector<Mat2> elem{Mat2::Identity()};
  std::vector<std::vector<int>> words{{}};
  std::unordered_map<Key, int, KeyHash> index{{pkey(Mat2::Identity()), 0}};
  std::vector<int> layer{0};
  int depth = 0;
  double frontier_radius = std::numeric_limits<double>::infinity();
  while (!layer.empty()) {
    std::vector<int> next;
    const bool probing = depth == opt.word_budget;
    for (int id : layer)
      for (int l = -ngen; l <= ngen; ++l) {
        if (l == 0 || (!words[id].empty() && words[id].back() == -l)) continue;
        const Mat2 m = elem[id] * group.letter(l);
        const double dm = displacement(m);
        if (dm > bound + tol) continue;
        const Key k = pkey(m);
        if (index.count(k)) continue;
        if (probing) {
          frontier_radius = std::min(frontier_radius, dm);
          continue;
        }
        index.emplace(k, static_cast<int>(elem.size()));
        next.push_back(static_cast<int>(elem.size()));
        elem.push_back(m);
        auto w = words[id];
        w.push_back(l);
        words.push_back(std::move(w));
      }
    if (probing) break;
    if (!next.empty()) ++depth;
    layer = std::move(next);
  }
  LengthSpectrum out;
  out.tolerance = opt.gap_tolerance;
  out.elements_explored = static_cast<int>(elem.size());
  out.max_depth = depth;
  out.achieved_radius = std::isfinite(frontier_radius) ? frontier_radius - 3 * R : L_max;
  if (std::isfinite(frontier_radius))
    throw IncompleteEnumeration("word budget exhausted before the displacement ball was covered",
                                std::max(0.0, out.achieved_radius));

  // Candidates: hyperbolic elements with length <= L_max whose axis passes within R of i.
  std::vector<int> cand;
  std::vector<double> clen;
  std::unordered_map<Key, int, KeyHash> cidx;
  std::vector<int> conj;  // elements that can relate two candidates
  for (size_t id = 0; id < elem.size(); ++id) {
    const double dm = displacement(elem[id]);
    if (dm <= L_max + 2 * R + tol) conj.push_back(static_cast<int>(id));
    const double tr = std::abs(elem[id].trace());
    if (tr <= 2.0 + 1e-12) continue;
    const double len = 2.0 * std::acosh(tr / 2.0);
    if (len > L_max + tol) continue;
    const double cosh_axis = std::sinh(0.5 * dm) / std::sinh(0.5 * len);
    if (std::acosh(std::max(1.0, cosh_axis)) > R + tol) continue;
    cidx.emplace(pkey(elem[id]), static_cast<int>(cand.size()));
    cand.push_back(static_cast<int>(id));
    clen.push_back(len);
  }

  // Union conjugates (h g h^-1 for h in the displacement ball) and inverses; parallel over candidates.
  const int nc = static_cast<int>(cand.size());
  std::vector<std::vector<std::pair<int, int>>> links(nc);
  std::vector<Mat2> conj_inv(conj.size());
  for (size_t q = 0; q < conj.size(); ++q) conj_inv[q] = elem[conj[q]].inverse();
  int nthreads = opt.threads > 0 ? opt.threads : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min(nthreads, 16));
  auto work = [&](int t0) {
    for (int c = t0; c < nc; c += nthreads) {
      const Mat2& g = elem[cand[c]];
      auto it = cidx.find(pkey(g.inverse()));
      if (it != cidx.end()) links[c].push_back({c, it->second});
      for (size_t q = 0; q < conj.size(); ++q) {
        const Mat2 m = elem[conj[q]] * g * conj_inv[q];
        auto jt = cidx.find(pkey(m));
        if (jt != cidx.end() && jt->second != c) links[c].push_back({c, jt->second});
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
  for (auto& th : pool) th.join();
  DSU dsu(nc);
  for (const auto& v : links)
    for (const auto& [a, b] : v) dsu.unite(a, b);

  // One representative per class: shortest word, then lexicographic.
  std::map<int, int> rep;
  for (int c = 0; c < nc; ++c) {
    const int r = dsu.find(c);
    auto it = rep.find(r);
    if (it == rep.end() || shorter_word(words[cand[c]], words[cand[it->second]])) rep[r] = c;
  }
  // Iterates: g^m of a class representative lands in another candidate class.
  std::map<int, std::pair<int, int>> iterate_of;  // class root -> (primitive root, m)
  for (const auto& [root, c] : rep) {
    Mat2 p = elem[cand[c]];
    for (int m = 2; m * clen[c] <= L_max + tol; ++m) {
      p = p * elem[cand[c]];
      auto it = cidx.find(pkey(p));
      if (it == cidx.end()) continue;
      const int r2 = dsu.find(it->second);
      if (!iterate_of.count(r2) || iterate_of[r2].second < m) iterate_of[r2] = {root, m};
    }
  }
  for (const auto& [root, c] : rep) {
    ClosedGeodesic g;
    auto it = iterate_of.find(root);
    if (it == iterate_of.end()) {
      g.word = word_string(words[cand[c]]);
      g.element = elem[cand[c]];
      g.length = clen[c];
      g.primitive_period = clen[c];
      g.iterate = 1;
    } else {
      // Iterates are written from the primitive: word repeated m times, length m T#.
      const int pc = rep.at(it->second.first);
      const int m = it->second.second;
      g.word.clear();
      for (int k = 0; k < m; ++k) g.word += word_string(words[cand[pc]]);
      g.element = elem[cand[c]];
      g.primitive_period = clen[pc];
      g.iterate = m;
      g.length = m * clen[pc];
    }
    g.poincare_det = poincare_det(g);
    out.entries.push_back(g);
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const ClosedGeodesic& a, const ClosedGeodesic& b) {
    if (std::abs(a.length - b.length) > 1e-9) return a.length < b.length;
    if (a.word.size() != b.word.size()) return a.word.size() < b.word.size();
    return a.word < b.word;
  });
  out.min_gap = std::numeric_limits<double>::infinity();
  for (size_t k = 1; k < out.entries.size(); ++k)
    out.min_gap = std::min(out.min_gap, out.entries[k].length - out.entries[k - 1].length);
  if (out.entries.size() < 2) out.min_gap = 0.0;
  out.simple = out.entries.size() < 2 || out.min_gap > out.tolerance;
  for (auto& e : out.entries) {
    int mult = 0;
    for (const auto& f : out.entries) mult += std::abs(f.length - e.length) <= out.tolerance;
    e.multiplicity = mult;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flow
// ---------------------------------------------------------------------------

namespace {

struct State {
  std::array<double, 3> x{}, xi{};
};

State rhs(const MetricChart& chart, const State& s) {
  const int n = chart.dim();
  const LocalGeometry G = chart.geometry(s.x.data());
  State d;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) d.x[j] += G.ginv[j][k] * s.xi[k];
  for (int l = 0; l < n; ++l) {
    double v = 0.0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) v += G.dginv[l][j][k] * s.xi[j] * s.xi[k];
    d.xi[l] = -0.5 * v;
  }
  return d;
}

State axpy(const State& a, double h, const State& d) {
  State r;
  for (int k = 0; k < 3; ++k) {
    r.x[k] = a.x[k] + h * d.x[k];
    r.xi[k] = a.xi[k] + h * d.xi[k];
  }
  return r;
}

double cnorm(const MetricChart& chart, const double* x, const double* xi) {
  const LocalGeometry G = chart.geometry(x);
  double s = 0.0;
  for (int j = 0; j < G.n; ++j)
    for (int k = 0; k < G.n; ++k) s += G.ginv[j][k] * xi[j] * xi[k];
  return std::sqrt(s);
}

}  // namespace

Orbit integrate_cogeodesic_flow(const MetricChart& chart, const double* x0, const double* xi0, double T, int steps) {
  const int n = chart.dim();
  if (steps < 1) throw InvalidArgument("steps must be positive");
  if (std::abs(cnorm(chart, x0, xi0) - 1.0) > 1e-10) throw InvalidArgument("initial covector not on the cosphere");
  Orbit o;
  o.dim = n;
  State s;
  for (int k = 0; k < n; ++k) {
    s.x[k] = x0[k];
    s.xi[k] = xi0[k];
  }
  const double h = T / steps;
  o.t.push_back(0.0);
  o.x.push_back(s.x);
  o.xi.push_back(s.xi);
  for (int step = 0; step < steps; ++step) {
    try {
      const State k1 = rhs(chart, s);
      const State k2 = rhs(chart, axpy(s, 0.5 * h, k1));
      const State k3 = rhs(chart, axpy(s, 0.5 * h, k2));
      const State k4 = rhs(chart, axpy(s, h, k3));
      for (int k = 0; k < 3; ++k) {
        s.x[k] += h / 6 * (k1.x[k] + 2 * k2.x[k] + 2 * k3.x[k] + k4.x[k]);
        s.xi[k] += h / 6 * (k1.xi[k] + 2 * k2.xi[k] + 2 * k3.xi[k] + k4.xi[k]);
      }
      const double nrm = cnorm(chart, s.x.data(), s.xi.data());
      o.energy_drift = std::max(o.energy_drift, std::abs(nrm - 1.0));
      for (int k = 0; k < n; ++k) s.xi[k] /= nrm;
    } catch (const DomainError& e) {
      throw OrbitTruncated(std::string("orbit left the chart: ") + e.what(), o);
    }
    if (!std::isfinite(s.x[0]) || !std::isfinite(s.xi[0])) throw OrbitTruncated("integration step failed", o);
    o.t.push_back(h * (step + 1));
    o.x.push_back(s.x);
    o.xi.push_back(s.xi);
  }
  if (chart.fully_periodic()) {
    double d = 0.0;
    for (int k = 0; k < n; ++k) {
      const double L = chart.axes()[k].length();
      d = std::max(d, std::abs(std::remainder(o.x.back()[k] - o.x.front()[k], L)));
      d = std::max(d, std::abs(o.xi.back()[k] - o.xi.front()[k]));
    }
    o.closure_defect = d;
  }
  return o;
}

void moebius_act(const Mat2& g, double* x, double* xi) {
  const cplx z(x[0], x[1]);
  const cplx v = x[1] * x[1] * cplx(xi[0], xi[1]);
  const cplx den = g(1, 0) * z + g(1, 1);
  const cplx w = (g(0, 0) * z + g(0, 1)) / den;
  const cplx v2 = v / (den * den);
  x[0] = w.real();
  x[1] = w.imag();
  xi[0] = v2.real() / (x[1] * x[1]);
  xi[1] = v2.imag() / (x[1] * x[1]);
}

void axis_initial_state(const Mat2& g, double* x, double* xi) {
  const double a = g(0, 0), b = g(0, 1), c = g(1, 0), d = g(1, 1);
  const double tr = a + d;
  if (std::abs(tr) <= 2.0) throw NotHyperbolic("axis needs a hyperbolic element");
  if (std::abs(c) < 1e-14) {
    // Vertical axis through b/(d - a); infinity attracts when |a| > |d|.
    x[0] = b / (d - a);
    x[1] = 1.0;
    xi[0] = 0.0;
    xi[1] = std::abs(a) > std::abs(d) ? 1.0 : -1.0;
    return;
  }
  const double disc = std::sqrt(tr * tr - 4.0);
  const double zp = ((a - d) + disc) / (2 * c), zm = ((a - d) - disc) / (2 * c);
  // Attracting fixed point has |c z + d| > 1.
  const double zatt = std::abs(c * zp + d) > 1.0 ? zp : zm;
  const double m = 0.5 * (zp + zm), r = 0.5 * std::abs(zp - zm);
  x[0] = m;
  x[1] = r;
  xi[0] = (zatt > m ? 1.0 : -1.0) / r;
  xi[1] = 0.0;
}

MetricChart flow_chart_upper_half_plane() { return hyperbolic_patch(8, 1e-9, 1e9, 2 * M_PI); }

Orbit axis_orbit(const MetricChart& chart, const Mat2& g, int steps) {
  double x[3] = {0, 0, 0}, xi[3] = {0, 0, 0};
  axis_initial_state(g, x, xi);
  Orbit o = integrate_cogeodesic_flow(chart, x, xi, geodesic_length(g), steps);
  double xe[2] = {o.x.back()[0], o.x.back()[1]}, xie[2] = {o.xi.back()[0], o.xi.back()[1]};
  moebius_act(g.inverse(), xe, xie);
  o.closure_defect = std::max({std::abs(xe[0] - x[0]), std::abs(xe[1] - x[1]), std::abs(xie[0] - xi[0]),
                               std::abs(xie[1] - xi[1])});
  return o;
}

}  // namespace maglab
