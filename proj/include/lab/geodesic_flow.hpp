#pragma once

#include "lab/metric_models.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace lab::flow {

using metric::ChartPoint;
using metric::MetricModel;
using metric::Vec2;

// A point (p, v) of the unit tangent bundle in chart components.
struct UnitTangentState {
  ChartPoint p;
  Vec2 v;
};

// g_p(a, b)
double inner(const MetricModel& model, const ChartPoint& p, const Vec2& a, const Vec2& b);

// Unit vector at p making the given angle with the first coordinate axis,
// measured in a g-orthonormal basis.
UnitTangentState unit_state(const MetricModel& model, const ChartPoint& p, double angle);

// The g-unit vector orthogonal to the unit vector v (rotation by +90 degrees).
Vec2 rotate_quarter(const MetricModel& model, const ChartPoint& p, const Vec2& v);

struct IntegratorSettings {
  double tol = 1e-10;
  double dense_dt = 0.01;
  double h_max = 0.5;
};

// What the projections after each accepted step had to correct, plus
// stepper statistics.
struct FlowLog {
  double max_speed_drift = 0.0;      // |g(v,v) - 1| before renormalization
  double max_frame_drift = 0.0;      // max Gram-matrix deviation before Gram-Schmidt
  double max_node_speed_error = 0.0; // after correction, over all nodes
  double max_node_frame_error = 0.0;
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

// Time-sampled unit-speed geodesic with its parallel orthonormal frame and the
// curvature matrices R_ij = <R(g', V_i) g', V_j> at each node. Times ascend;
// the base point (t = 0) sits at `base_index`. For surfaces n - 1 = 1, so the
// frame has one vector and R is 1 x 1.
struct OrbitSegment {
  std::vector<double> times;
  std::vector<ChartPoint> positions;
  std::vector<Vec2> velocities;
  std::vector<Vec2> frames;
  std::vector<Eigen::MatrixXd> curvature;
  std::vector<Eigen::MatrixXd> curvature_rate;  // dR/dt at the nodes, optional
  std::vector<char> dense;  // node lies on the requested output grid
  std::size_t base_index = 0;
  IntegratorSettings settings;
  FlowLog log;
  bool chart_exit = false;
  double exit_time = 0.0;

  std::size_t size() const { return times.size(); }
  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  bool has_frame() const { return !frames.empty() && frames.size() == times.size(); }
  bool has_curvature() const { return !curvature.empty() && curvature.size() == times.size(); }
  bool has_curvature_rate() const { return curvature_rate.size() == times.size() && !times.empty(); }
  bool has_dense_flags() const { return dense.size() == times.size(); }
  int normal_dim() const { return has_curvature() ? static_cast<int>(curvature.front().rows()) : 1; }
  UnitTangentState state(std::size_t i) const { return {positions[i], velocities[i]}; }
  std::size_t node_at(double t) const;  // nearest node

  // t -> -t with velocities reversed; frame and curvature are unchanged.
  OrbitSegment time_reversed() const;
  // Times shifted so that node i becomes t = 0.
  OrbitSegment rebased(std::size_t i) const;
  // Nodes with t in [t_lo, t_hi]; the base node must be included.
  OrbitSegment slice(double t_lo, double t_hi) const;
};

// Integrates the geodesic x'' + Gamma(x)(x', x') = 0 together with the
// parallel transport of the frame from theta0 over [0, T] (or [T, 0] when
// T < 0). Nodes are the dense-output grid k*dense_dt plus accepted steps.
// A chart exit returns the partial segment with `chart_exit` set.
OrbitSegment integrate_geodesic(const MetricModel& model, const UnitTangentState& theta0, double T,
                                const IntegratorSettings& settings = {});

// Recomputes the frame by integrating V' + Gamma(g', V) = 0 along the stored
// nodes (cubic Hermite interpolation of the state between nodes) and fills the
// curvature samples.
void transport_frame(const MetricModel& model, OrbitSegment& orbit);

// Horizontal and vertical parts of a tangent-bundle vector in frame components.
struct SasakiVector {
  Eigen::VectorXd horizontal;
  Eigen::VectorXd vertical;
};

double sasaki_norm(const SasakiVector& xi);

// First-order Sasaki distance for nearby states: base distance from the
// midpoint metric, vertical part after first-order parallel transport of v2 to
// p1. Both parts must be at most `max_separation`.
double sasaki_distance_smallscale(const MetricModel& model, const UnitTangentState& a,
                                  const UnitTangentState& b, double max_separation = 0.1);

// CSV schema orbit.v1: t,x0,x1,v0,v1,e0,e1,R11
void write_orbit_csv(std::ostream& os, const OrbitSegment& orbit);

}  // namespace lab::flow
