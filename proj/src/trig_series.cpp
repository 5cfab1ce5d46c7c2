#include "maglab/trig_series.hpp"

#include <cmath>

#include "maglab/errors.hpp"

namespace maglab {

TrigSeries TrigSeries::constant(std::vector<double> periods, double c) {
  TrigSeries s(std::move(periods));
  s.add(Mode(s.dim(), 0), c);
  return s;
}

void TrigSeries::add(const Mode& m, cplx v) {
  if (static_cast<int>(m.size()) != dim()) throw InvalidArgument("mode dimension mismatch");
  c_[m] += v;
}

void TrigSeries::add_real(const Mode& m, double a, double b) {
  bool zero = true;
  for (int v : m) zero = zero && v == 0;
  if (zero) {
    add(m, a);
    return;
  }
  Mode neg(m);
  for (auto& v : neg) v = -v;
  // a cos t + b sin t = (a - ib)/2 e^{it} + (a + ib)/2 e^{-it}
  add(m, cplx(0.5 * a, -0.5 * b));
  add(neg, cplx(0.5 * a, 0.5 * b));
}

cplx TrigSeries::coeff(const Mode& m) const {
  auto it = c_.find(m);
  return it == c_.end() ? cplx(0.0) : it->second;
}

double TrigSeries::wavevector(const Mode& m, int j) const { return 2.0 * M_PI * m[j] / periods_[j]; }

cplx TrigSeries::operator()(const double* x) const {
  cplx acc = 0.0;
  for (const auto& [m, c] : c_) {
    double ph = 0.0;
    for (int j = 0; j < dim(); ++j) ph += wavevector(m, j) * x[j];
    acc += c * std::polar(1.0, ph);
  }
  return acc;
}

TrigSeries TrigSeries::derivative(int j) const {
  TrigSeries r(periods_);
  for (const auto& [m, c] : c_) {
    const double k = wavevector(m, j);
    if (k != 0.0) r.c_[m] = c * cplx(0.0, k);
  }
  return r;
}

TrigSeries TrigSeries::operator+(const TrigSeries& o) const {
  TrigSeries r(*this);
  if (o.dim() != dim()) throw InvalidArgument("series dimension mismatch");
  for (const auto& [m, c] : o.c_) r.c_[m] += c;
  r.prune();
  return r;
}

TrigSeries TrigSeries::operator-(const TrigSeries& o) const { return *this + o.scaled(-1.0); }

TrigSeries TrigSeries::operator*(const TrigSeries& o) const {
  if (o.dim() != dim()) throw InvalidArgument("series dimension mismatch");
  TrigSeries r(periods_);
  for (const auto& [m1, c1] : c_)
    for (const auto& [m2, c2] : o.c_) {
      Mode m(m1);
      for (int j = 0; j < dim(); ++j) m[j] += m2[j];
      r.c_[m] += c1 * c2;
    }
  r.prune();
  return r;
}

TrigSeries TrigSeries::scaled(cplx s) const {
  TrigSeries r(*this);
  for (auto& [m, c] : r.c_) c *= s;
  r.prune();
  return r;
}

int TrigSeries::max_abs_mode() const {
  int k = 0;
  for (const auto& [m, c] : c_)
    for (int v : m) k = std::max(k, std::abs(v));
  return k;
}

double TrigSeries::reality_defect() const {
  double e = 0.0;
  for (const auto& [m, c] : c_) {
    Mode neg(m);
    for (auto& v : neg) v = -v;
    e = std::max(e, std::abs(c - std::conj(coeff(neg))));
  }
  return e;
}

double TrigSeries::l1_norm() const {
  double s = 0.0;
  for (const auto& [m, c] : c_) s += std::abs(c);
  return s;
}

void TrigSeries::prune() {
  for (auto it = c_.begin(); it != c_.end();) {
    if (std::abs(it->second) == 0.0)
      it = c_.erase(it);
    else
      ++it;
  }
}

TrigSeries TrigSeries::random_real(std::vector<double> periods, int kmax, double amp, std::mt19937_64& rng) {
  TrigSeries s(std::move(periods));
  std::uniform_real_distribution<double> u(-amp, amp);
  const int d = s.dim();
  Mode m(d, -kmax);
  // Iterate over the half lattice (first nonzero component positive) to keep the series real.
  while (true) {
    int first = 0;
    for (int v : m)
      if (v != 0) {
        first = v;
        break;
      }
    if (first > 0) s.add_real(m, u(rng), u(rng));
    int j = d - 1;
    while (j >= 0 && m[j] == kmax) m[j--] = -kmax;
    if (j < 0) break;
    ++m[j];
  }
  return s;
}

}  // namespace maglab
