#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace maglab {

using cplx = std::complex<double>;

// One coordinate direction: periodic of length hi-lo, or a closed interval sampled with endpoints.
struct Axis {
  bool periodic = true;
  double lo = 0.0;
  double hi = 2.0 * M_PI;

  double length() const { return hi - lo; }
  std::vector<double> nodes(int n) const;
  double spacing(int n) const { return periodic ? length() / n : length() / (n - 1); }
  bool contains(double x) const { return periodic || (x >= lo - 1e-12 && x <= hi + 1e-12); }
};

// First-derivative matrix on n nodes: Fourier collocation when periodic,
// fourth-order central differences (one-sided near the ends) otherwise.
Eigen::MatrixXd diff_matrix(const Axis& ax, int n);

// Tensor-product grid; node index is row-major with the last axis fastest.
class Grid {
 public:
  Grid() = default;
  Grid(std::vector<Axis> axes, std::vector<int> sizes);

  int dims() const { return static_cast<int>(axes_.size()); }
  int size() const { return total_; }
  int extent(int a) const { return sizes_[a]; }
  const Axis& axis(int a) const { return axes_[a]; }
  const std::vector<double>& coords(int a) const { return coords_[a]; }
  std::vector<int> unravel(int idx) const;
  double coord(int idx, int a) const;

  // Derivative along axis `a` of a field with `ncomp` interleaved components per node.
  std::vector<cplx> diff(const std::vector<cplx>& f, int a, int ncomp = 1) const;
  std::vector<double> diff(const std::vector<double>& f, int a, int ncomp = 1) const;

  // Quadrature weights for the flat measure (trapezoid, exact for trig polynomials on periodic axes;
  // composite Simpson-like weights are not needed since interval axes are only used for pointwise checks).
  std::vector<double> weights() const;

 private:
  std::vector<Axis> axes_;
  std::vector<int> sizes_;
  std::vector<int> strides_;
  std::vector<std::vector<double>> coords_;
  std::vector<Eigen::MatrixXd> dmat_;
  int total_ = 0;
};

// Forward/inverse DFT on a periodic tensor grid: coefficient of exp(i k.x 2pi/L) for
// wavenumbers in (-n/2, n/2]; Nyquist handled symmetrically by the caller if needed.
std::vector<cplx> dft_forward(const Grid& g, const std::vector<cplx>& f);
std::vector<cplx> dft_inverse(const Grid& g, const std::vector<cplx>& c);
// Signed integer wavenumber of DFT index i on an axis with n points.
inline int wavenumber(int i, int n) { return i <= n / 2 ? i : i - n; }

}  // namespace maglab
