#include "maglab/spectral.hpp"

#include <cmath>

#include "maglab/errors.hpp"

namespace maglab {

std::vector<double> Axis::nodes(int n) const {
  std::vector<double> x(n);
  const double h = spacing(n);
  for (int i = 0; i < n; ++i) x[i] = lo + h * i;
  return x;
}

Eigen::MatrixXd diff_matrix(const Axis& ax, int n) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  if (ax.periodic) {
    // Trefethen's periodic collocation matrix, rescaled from [0, 2pi) to the axis length.
    const double scale = 2.0 * M_PI / ax.length();
    const double h = 2.0 * M_PI / n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const int k = i - j;
        const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        if (n % 2 == 0)
          D(i, j) = 0.5 * sgn / std::tan(k * h / 2.0);
        else
          D(i, j) = 0.5 * sgn / std::sin(k * h / 2.0);
        D(i, j) *= scale;
      }
    return D;
  }
  if (n < 5) throw InvalidArgument("interval axis needs at least 5 nodes");
  const double h = ax.spacing(n);
  // Five-point stencils, all fourth order.
  static const double c0[5] = {-25.0 / 12, 4.0, -3.0, 4.0 / 3, -0.25};
  static const double c1[5] = {-0.25, -5.0 / 6, 1.5, -0.5, 1.0 / 12};
  static const double cc[5] = {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      for (int k = 0; k < 5; ++k) D(i, k) = c0[k] / h;
    } else if (i == 1) {
      for (int k = 0; k < 5; ++k) D(i, k) = c1[k] / h;
    } else if (i == n - 2) {
      for (int k = 0; k < 5; ++k) D(i, n - 1 - k) = -c1[k] / h;
    } else if (i == n - 1) {
      for (int k = 0; k < 5; ++k) D(i, n - 1 - k) = -c0[k] / h;
    } else {
      for (int k = 0; k < 5; ++k) D(i, i - 2 + k) = cc[k] / h;
    }
  }
  return D;
}

Grid::Grid(std::vector<Axis> axes, std::vector<int> sizes) : axes_(std::move(axes)), sizes_(std::move(sizes)) {
  if (axes_.size() != sizes_.size()) throw InvalidArgument("grid axes/sizes mismatch");
  const int d = dims();
  strides_.assign(d, 1);
  for (int a = d - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * sizes_[a + 1];
  total_ = 1;
  for (int a = 0; a < d; ++a) {
    if (sizes_[a] < 1) throw InvalidArgument("grid size must be positive");
    total_ *= sizes_[a];
    coords_.push_back(axes_[a].nodes(sizes_[a]));
    dmat_.push_back(diff_matrix(axes_[a], sizes_[a]));
  }
}

std::vector<int> Grid::unravel(int idx) const {
  std::vector<int> out(dims());
  for (int a = 0; a < dims(); ++a) {
    out[a] = idx / strides_[a];
    idx %= strides_[a];
  }
  return out;
}

double Grid::coord(int idx, int a) const { return coords_[a][(idx / strides_[a]) % sizes_[a]]; }

template <typename T>
static std::vector<T> diff_impl(const std::vector<T>& f, const Eigen::MatrixXd& D, int total, int n, int stride,
                                int ncomp) {
  std::vector<T> out(f.size(), T(0));
  const int outer = total / (n * stride);
  std::vector<T> line(n);
  for (int o = 0; o < outer; ++o)
    for (int s = 0; s < stride; ++s)
      for (int c = 0; c < ncomp; ++c) {
        const int base = o * n * stride + s;
        for (int i = 0; i < n; ++i) line[i] = f[static_cast<size_t>(base + i * stride) * ncomp + c];
        for (int i = 0; i < n; ++i) {
          T acc(0);
          for (int j = 0; j < n; ++j) {
            const double dij = D(i, j);
            if (dij != 0.0) acc += dij * line[j];
          }
          out[static_cast<size_t>(base + i * stride) * ncomp + c] = acc;
        }
      }
  return out;
}

std::vector<cplx> Grid::diff(const std::vector<cplx>& f, int a, int ncomp) const {
  return diff_impl(f, dmat_[a], total_, sizes_[a], strides_[a], ncomp);
}
std::vector<double> Grid::diff(const std::vector<double>& f, int a, int ncomp) const {
  return diff_impl(f, dmat_[a], total_, sizes_[a], strides_[a], ncomp);
}

std::vector<double> Grid::weights() const {
  std::vector<double> w(total_, 1.0);
  for (int idx = 0; idx < total_; ++idx) {
    const auto iv = unravel(idx);
    for (int a = 0; a < dims(); ++a) {
      const double h = axes_[a].spacing(sizes_[a]);
      double wa = h;
      if (!axes_[a].periodic && (iv[a] == 0 || iv[a] == sizes_[a] - 1)) wa = 0.5 * h;
      w[idx] *= wa;
    }
  }
  return w;
}

static std::vector<cplx> dft_axis(const std::vector<cplx>& f, int total, int n, int stride, int sign) {
  std::vector<cplx> out(f.size());
  const int outer = total / (n * stride);
  std::vector<cplx> tw(n);
  for (int k = 0; k < n; ++k) tw[k] = std::polar(1.0, sign * 2.0 * M_PI * k / n);
  for (int o = 0; o < outer; ++o)
    for (int s = 0; s < stride; ++s) {
      const int base = o * n * stride + s;
      for (int k = 0; k < n; ++k) {
        cplx acc = 0.0;
        for (int j = 0; j < n; ++j) acc += f[base + j * stride] * tw[(static_cast<long>(k) * j) % n];
        out[base + k * stride] = acc;
      }
    }
  return out;
}

std::vector<cplx> dft_forward(const Grid& g, const std::vector<cplx>& f) {
  std::vector<cplx> c = f;
  int stride = 1;
  for (int a = g.dims() - 1; a >= 0; --a) {
    if (!g.axis(a).periodic) throw InvalidArgument("DFT requires periodic axes");
    c = dft_axis(c, g.size(), g.extent(a), stride, -1);
    for (auto& v : c) v /= static_cast<double>(g.extent(a));
    stride *= g.extent(a);
  }
  return c;
}

std::vector<cplx> dft_inverse(const Grid& g, const std::vector<cplx>& c) {
  std::vector<cplx> f = c;
  int stride = 1;
  for (int a = g.dims() - 1; a >= 0; --a) {
    f = dft_axis(f, g.size(), g.extent(a), stride, +1);
    stride *= g.extent(a);
  }
  return f;
}

}  // namespace maglab
