#pragma once

#include <complex>
#include <map>
#include <random>
#include <vector>

#include "maglab/spectral.hpp"

namespace maglab {

// Finite Fourier series sum_m c_m exp(i <m, x> 2pi/L) on a torus with the given periods.
class TrigSeries {
 public:
  using Mode = std::vector<int>;

  TrigSeries() = default;
  explicit TrigSeries(std::vector<double> periods) : periods_(std::move(periods)) {}
  static TrigSeries constant(std::vector<double> periods, double c);

  int dim() const { return static_cast<int>(periods_.size()); }
  const std::vector<double>& periods() const { return periods_; }
  const std::map<Mode, cplx>& coeffs() const { return c_; }

  void add(const Mode& m, cplx v);
  // Adds a cos(<m,x>w) + b sin(<m,x>w) keeping the series real.
  void add_real(const Mode& m, double a, double b);

  cplx coeff(const Mode& m) const;
  cplx operator()(const double* x) const;
  double real_at(const double* x) const { return (*this)(x).real(); }
  double wavevector(const Mode& m, int j) const;

  TrigSeries derivative(int j) const;
  TrigSeries operator+(const TrigSeries& o) const;
  TrigSeries operator-(const TrigSeries& o) const;
  TrigSeries operator*(const TrigSeries& o) const;
  TrigSeries scaled(cplx s) const;

  int max_abs_mode() const;
  double mean() const { return coeff(Mode(dim(), 0)).real(); }
  // max |c_m - conj(c_{-m})|; zero for real-valued series.
  double reality_defect() const;
  // Sum of |c_m|, an upper bound for the sup norm.
  double l1_norm() const;

  // Random real trig polynomial with modes |m|_inf <= kmax and coefficients of size amp.
  static TrigSeries random_real(std::vector<double> periods, int kmax, double amp, std::mt19937_64& rng);

 private:
  void prune();
  std::vector<double> periods_;
  std::map<Mode, cplx> c_;
};

}  // namespace maglab
