#pragma once

#include <array>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "maglab/jet.hpp"
#include "maglab/spectral.hpp"

namespace maglab {

enum class ChartKind { flat_torus, isothermal_2d, general_nd };
std::string to_string(ChartKind k);

using ScalarFn = std::function<Jet(const JetPoint&)>;
// Writes the lower-index metric g_{jk} for j,k < dim.
using MetricFn = std::function<void(const JetPoint&, std::array<std::array<Jet, 3>, 3>&)>;

constexpr int kMaxDim = 3;
using Tensor2 = std::array<std::array<double, kMaxDim>, kMaxDim>;
using Tensor3 = std::array<Tensor2, kMaxDim>;
using Tensor4 = std::array<Tensor3, kMaxDim>;

// Pointwise metric data. Index conventions:
//   dg[l][j][k]        = d_l g_{jk}
//   dginv[l][j][k]     = d_l g^{jk}
//   gamma[a][b][c]     = Gamma^a_{bc}
//   dgamma[l][a][b][c] = d_l Gamma^a_{bc}
//   riemann[a][b][j][k]= R^a_{bjk} = d_j G^a_{kb} - d_k G^a_{jb} + G^a_{jc}G^c_{kb} - G^a_{kc}G^c_{jb}
struct LocalGeometry {
  int n = 0;
  Tensor2 g{}, ginv{};
  double det = 0.0;
  Tensor3 dg{}, dginv{}, gamma{};
  Tensor4 dgamma{}, riemann{};
  // isothermal charts only
  double phi = 0.0;
  std::array<double, 2> dphi{};
  double lap_phi = 0.0;
  double gauss_K = 0.0;

  double lower_riemann(int a, int b, int c, int d) const;  // R_{abcd} = g_{ae} R^e_{bcd}
  double sectional(const double* u, const double* v) const;
};

class MetricChart {
 public:
  MetricChart() = default;

  int dim() const { return dim_; }
  ChartKind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  const std::vector<Axis>& axes() const { return axes_; }
  const std::vector<int>& resolution() const { return res_; }
  std::vector<double> periods() const;
  bool fully_periodic() const;
  Grid grid() const { return Grid(axes_, res_); }

  bool contains(const double* x) const;
  LocalGeometry geometry(const double* x) const;
  double phi(const double* x) const;

  // Geometry at every grid node, computed once and shared between copies.
  const std::vector<LocalGeometry>& node_geometry() const;

  nlohmann::json to_json() const;

  friend MetricChart make_flat_torus(const std::vector<double>&, std::vector<int>);
  friend MetricChart make_isothermal_chart(ScalarFn, std::vector<Axis>, std::vector<int>);
  friend MetricChart make_general_chart(MetricFn, std::vector<Axis>, std::vector<int>, std::string);

 private:
  struct Cache {
    std::once_flag once;
    std::vector<LocalGeometry> nodes;
  };
  int dim_ = 0;
  ChartKind kind_ = ChartKind::flat_torus;
  std::vector<Axis> axes_;
  std::vector<int> res_;
  ScalarFn phi_;
  MetricFn metric_;
  std::string label_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

// Flat torus (or circle when one period is given) with identity metric.
MetricChart make_flat_torus(const std::vector<double>& periods, std::vector<int> resolution = {});
// g = e^{2 phi}(dx1^2 + dx2^2) on the given axes.
MetricChart make_isothermal_chart(ScalarFn phi, std::vector<Axis> axes, std::vector<int> resolution);
MetricChart make_general_chart(MetricFn g, std::vector<Axis> axes, std::vector<int> resolution,
                               std::string label = "general");

// Presets used by tests, CLI and acceptance.
MetricChart hyperbolic_patch(int resolution, double ylo = 1.0, double yhi = 2.0, double xperiod = 2.0 * M_PI);
MetricChart bumpy_torus(int resolution, double eps);             // phi = eps sin x sin y on the 2pi torus
MetricChart warped_three_torus(int resolution, double eps);      // e^{2f}dx1^2 + e^{2h}dx2^2 + dx3^2
MetricChart hyperbolic_times_circle(int resolution);             // (dx^2+dy^2)/y^2 + dz^2

double gauss_curvature(const MetricChart& chart, const double* x);
Tensor4 riemann_tensor(const MetricChart& chart, const double* x);

// max_{j,k,l} |d_l g^{jk} + g^{jm}G^k_{lm} + g^{km}G^j_{lm}|
double christoffel_compatibility_residual(const LocalGeometry& G);
// max |R^a_{bjk} + R^a_{bkj}|
double riemann_antisymmetry_residual(const LocalGeometry& G);

}  // namespace maglab
