#pragma once

// Second-order forward jets: value, gradient and Hessian in up to kJetVars variables.
// Metric data is written once as a function of Jet coordinates and then yields
// exact first and second derivatives at any point.

#include <array>
#include <cmath>

namespace maglab {

constexpr int kJetVars = 4;

struct Jet {
  double v = 0.0;
  std::array<double, kJetVars> d{};
  std::array<std::array<double, kJetVars>, kJetVars> h{};

  Jet() = default;
  Jet(double x) : v(x) {}  // NOLINT: constants promote implicitly

  static Jet variable(double x, int i) {
    Jet j(x);
    j.d[i] = 1.0;
    return j;
  }
};

// Chain rule for a scalar function with derivatives f0, f1, f2 at u.v.
inline Jet chain(const Jet& u, double f0, double f1, double f2) {
  Jet r(f0);
  for (int i = 0; i < kJetVars; ++i) r.d[i] = f1 * u.d[i];
  for (int i = 0; i < kJetVars; ++i)
    for (int j = 0; j < kJetVars; ++j) r.h[i][j] = f1 * u.h[i][j] + f2 * u.d[i] * u.d[j];
  return r;
}

inline Jet operator+(const Jet& a, const Jet& b) {
  Jet r(a.v + b.v);
  for (int i = 0; i < kJetVars; ++i) {
    r.d[i] = a.d[i] + b.d[i];
    for (int j = 0; j < kJetVars; ++j) r.h[i][j] = a.h[i][j] + b.h[i][j];
  }
  return r;
}
inline Jet operator-(const Jet& a) {
  Jet r(-a.v);
  for (int i = 0; i < kJetVars; ++i) {
    r.d[i] = -a.d[i];
    for (int j = 0; j < kJetVars; ++j) r.h[i][j] = -a.h[i][j];
  }
  return r;
}
inline Jet operator-(const Jet& a, const Jet& b) { return a + (-b); }
inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r(a.v * b.v);
  for (int i = 0; i < kJetVars; ++i) {
    r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    for (int j = 0; j < kJetVars; ++j)
      r.h[i][j] = a.h[i][j] * b.v + a.v * b.h[i][j] + a.d[i] * b.d[j] + a.d[j] * b.d[i];
  }
  return r;
}
inline Jet inv(const Jet& a) { return chain(a, 1.0 / a.v, -1.0 / (a.v * a.v), 2.0 / (a.v * a.v * a.v)); }
inline Jet operator/(const Jet& a, const Jet& b) { return a * inv(b); }
inline Jet operator+(const Jet& a, double b) { return a + Jet(b); }
inline Jet operator+(double a, const Jet& b) { return Jet(a) + b; }
inline Jet operator-(const Jet& a, double b) { return a - Jet(b); }
inline Jet operator-(double a, const Jet& b) { return Jet(a) - b; }
inline Jet operator*(const Jet& a, double b) {
  Jet r(a.v * b);
  for (int i = 0; i < kJetVars; ++i) {
    r.d[i] = a.d[i] * b;
    for (int j = 0; j < kJetVars; ++j) r.h[i][j] = a.h[i][j] * b;
  }
  return r;
}
inline Jet operator*(double a, const Jet& b) { return b * a; }
inline Jet operator/(const Jet& a, double b) { return a * (1.0 / b); }
inline Jet operator/(double a, const Jet& b) { return Jet(a) / b; }

inline Jet exp(const Jet& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline Jet log(const Jet& a) { return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Jet sin(const Jet& a) { return chain(a, std::sin(a.v), std::cos(a.v), -std::sin(a.v)); }
inline Jet cos(const Jet& a) { return chain(a, std::cos(a.v), -std::sin(a.v), -std::cos(a.v)); }
inline Jet sqrt(const Jet& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

using JetPoint = std::array<Jet, kJetVars>;

inline JetPoint seed(const double* x, int n) {
  JetPoint p;
  for (int i = 0; i < n; ++i) p[i] = Jet::variable(x[i], i);
  return p;
}

}  // namespace maglab
