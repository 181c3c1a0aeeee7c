#pragma once

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace lab::metric {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Chart coordinates of a point on the surface. The built-in models are all
// two-dimensional charts: (x, y) on the upper half-plane, (r, phi) for warped
// products.
using ChartPoint = Vec2;

// gamma[k](i, j) holds the Christoffel symbol of the second kind Gamma^k_{ij}.
struct Christoffel {
  std::array<Mat2, 2> gamma{Mat2::Zero(), Mat2::Zero()};

  double operator()(int k, int i, int j) const { return gamma[k](i, j); }

  // Gamma^k_{ij} a^i b^j
  Vec2 contract(const Vec2& a, const Vec2& b) const {
    return {a.dot(gamma[0] * b), a.dot(gamma[1] * b)};
  }
};

enum class ModelKind { Hyperbolic, ConformalPerturbed, WarpedProduct, CustomChart };

// Smooth compactly supported bump psi = amplitude * exp(1 - 1/(1 - s)),
// s = |p - center|^2 / radius^2 (Euclidean chart distance), zero for s >= 1.
struct BumpSpec {
  Vec2 center{0.0, 1.0};
  double radius = 0.5;
  double amplitude = 0.1;
};

// Warping function f of dr^2 + f(r)^2 dphi^2, chosen by name from a registry:
//   cosh      f = cosh(a r)                 K = -a^2
//   cosh_mix  f = cosh r + b cosh 2r        K = -(cosh r + 4b cosh 2r)/(cosh r + b cosh 2r)
//   sinh      f = sinh(a r)/a  (r > 0)      K = -a^2
//   sin       f = sin r        (0 < r < pi) K = +1   (sphere fixture)
//   const     f = 1                         K = 0    (flat cylinder)
struct WarpProfile {
  std::string name;
  double a = 1.0;
  double b = 0.25;

  double f(double r) const;
  double df(double r) const;
  double d2f(double r) const;
  double r_min() const;
  double r_max() const;
};

struct SamplingBox {
  Vec2 lo;
  Vec2 hi;
};

struct CurvatureBounds {
  double inf_K = 0.0;
  double sup_K = 0.0;
  double c = 0.0;  // sqrt(-inf_K), zero when inf_K >= 0
  long sample_count = 0;
  int grid = 0;
  SamplingBox domain;
  bool not_negatively_curved = false;  // sup_K >= 0
  double mean_K = 0.0;
  double variance_K = 0.0;
};

// An immutable Riemannian metric on a two-dimensional chart together with its
// connection and curvature oracles. Copies share the underlying definition.
class MetricModel {
 public:
  static MetricModel hyperbolic(double c);
  static MetricModel conformal_perturbed(double c, BumpSpec bump, double epsilon);
  static MetricModel warped_product(WarpProfile profile);
  // Metric tensor from the named registry; derivatives by finite differences.
  // Registry: euclidean, poincare_disk, halfplane_fd.
  static MetricModel custom_chart(const std::string& name, double c = 1.0);

  // Parses "kind:key=value,..." e.g. "hyperbolic:c=2",
  // "warped:profile=cosh_mix,b=0.25", "conformal:c=1,eps=0.1,cx=0,cy=1,radius=0.5,amp=0.1",
  // "custom:name=euclidean".
  static MetricModel parse(std::string_view spec);
  // Canonical spec string; parse(spec_string()) reproduces the model exactly.
  std::string spec_string() const;
  // Short filename-safe label.
  std::string tag() const;

  ModelKind kind() const;
  int dimension() const { return 2; }
  bool in_domain(const ChartPoint& p) const;
  std::string domain_description() const;

  Mat2 metric_tensor(const ChartPoint& p) const;
  Christoffel christoffel(const ChartPoint& p) const;
  double gaussian_curvature(const ChartPoint& p) const;

  // Chart length of one unit of Riemannian length along each coordinate axis.
  Vec2 unit_lengths(const ChartPoint& p) const;

  // Hyperbolic / conformal base curvature parameter; 0 for other kinds.
  double base_c() const;
  double epsilon() const;
  const BumpSpec* bump() const;
  const WarpProfile* profile() const;
  bool constant_curvature() const;

  struct Impl;

 private:
  explicit MetricModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  void require_in_domain(const ChartPoint& p) const;
  std::shared_ptr<const Impl> impl_;
};

// Deterministic grid sampling of the Gaussian curvature: grid x grid points
// including the box corners.
CurvatureBounds curvature_bounds(const MetricModel& model, const SamplingBox& box, int grid);

// Bump value, gradient and Euclidean Laplacian in chart coordinates.
struct BumpValue {
  double psi = 0.0;
  Vec2 grad = Vec2::Zero();
  double laplacian = 0.0;
};
BumpValue evaluate_bump(const BumpSpec& bump, const ChartPoint& p);

}  // namespace lab::metric
