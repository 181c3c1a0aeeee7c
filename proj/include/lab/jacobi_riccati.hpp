#pragma once

#include "lab/geodesic_flow.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <vector>

namespace lab::jacobi {

using flow::OrbitSegment;
using Matrix = Eigen::MatrixXd;

// Time-sampled matrices on (a subset of) an orbit grid. `derivatives` is
// either empty or holds one entry per node (Y' for Jacobi solutions).
struct MatrixPath {
  std::vector<double> times;
  std::vector<Matrix> values;
  std::vector<Matrix> derivatives;
  double max_asymmetry = 0.0;  // largest |U - U^T| removed (Riccati paths)

  std::size_t size() const { return times.size(); }
  bool has_derivatives() const { return !derivatives.empty() && derivatives.size() == times.size(); }
  std::size_t index_of(double t) const;  // exact node lookup, throws GridMismatch
};

// CSV: t, v11, v12, ..., [d11, ...]
void write_matrix_path_csv(std::ostream& os, const MatrixPath& path, const char* value_prefix = "U");

// Piecewise cubic Hermite interpolant of the curvature samples, node slopes
// from three-point differences on the non-uniform grid.
class CurvatureInterpolant {
 public:
  explicit CurvatureInterpolant(const OrbitSegment& orbit);
  Matrix operator()(double t) const;
  int dim() const { return m_; }

 private:
  std::vector<double> t_;
  std::vector<Matrix> r_, dr_;
  int m_ = 1;
  mutable std::size_t hint_ = 0;
};

struct SolverSettings {
  double tol = 1e-10;
  double h_max = 0.5;
};

// Solves Y' = P, P' = -R(t) Y from the node at time t_start (default: the
// orbit's first node) to both ends of the orbit. Values and derivatives are
// reported at every orbit node.
MatrixPath solve_jacobi_ivp(const OrbitSegment& orbit, const Matrix& Y0, const Matrix& Y0p,
                            const SolverSettings& settings = {});
MatrixPath solve_jacobi_ivp_from(const OrbitSegment& orbit, double t_start, const Matrix& Y0,
                                 const Matrix& Y0p, const SolverSettings& settings = {});

// Boundary-value solution on an orbit covering [s, 0]: Y(0) = I, Y(s) = 0,
// via Z(s) = 0, Z'(s) = I and Y = Z Z(0)^{-1}. Nodes outside [s, 0] are not
// part of the returned path.
struct GreenBvpResult {
  MatrixPath path;
  Matrix U_s;           // Y'(0)
  double det_Z0 = 0.0;
  double det_scale = 0.0;
  double residual_start = 0.0;  // |Y(0) - I|
  double residual_end = 0.0;    // |Y(s)|
};
GreenBvpResult green_bvp(const OrbitSegment& orbit, const SolverSettings& settings = {});

// Produces an orbit covering [-T, 0] with the base point at t = 0.
using OrbitExtender = std::function<OrbitSegment(double T)>;

struct GreenLimitSettings {
  double tol = 1e-8;          // Cauchy gap target
  double T_init = 0.0;        // 0: 5/c
  double T_max = 0.0;         // 0: 200/c
  double bound_slack = 1e-6;  // Green bound |U| <= c + slack
  SolverSettings solver{1e-11, 0.5};
};

struct GapRecord {
  double T = 0.0;
  double u_norm = 0.0;
  double gap = 0.0;  // |U_{-T} - U_{-T/2}|, 0 for the first entry
};

struct GreenLimitResult {
  Matrix U_plus;
  double T_back_used = 0.0;
  double cauchy_gap = 0.0;
  bool converged = false;
  double asymmetry = 0.0;
  double norm = 0.0;  // spectral norm of U_plus
  bool within_green_bound = false;
  std::vector<GapRecord> history;
};

GreenLimitResult green_limit(const OrbitExtender& extender, double c,
                             const GreenLimitSettings& settings = {});
// Same, but NoConvergence when the gap target is not met by T_max.
GreenLimitResult green_limit_strict(const OrbitExtender& extender, double c,
                                    const GreenLimitSettings& settings = {});

// Extenders for a model and base state: integrates backwards for U+, or
// forwards and time-reverses for the stable object U- = -U+(reversed).
// Longer integrations are cached and sliced for shorter requests.
OrbitExtender backward_extender(const metric::MetricModel& model, const flow::UnitTangentState& theta,
                                const flow::IntegratorSettings& settings);
OrbitExtender reversed_forward_extender(const metric::MetricModel& model,
                                        const flow::UnitTangentState& theta,
                                        const flow::IntegratorSettings& settings);

// Stable Riccati datum U-(theta) from the time-reversed orbit.
GreenLimitResult stable_limit(const metric::MetricModel& model, const flow::UnitTangentState& theta,
                              double c, const GreenLimitSettings& settings,
                              const flow::IntegratorSettings& flow_settings);
GreenLimitResult unstable_limit(const metric::MetricModel& model, const flow::UnitTangentState& theta,
                                double c, const GreenLimitSettings& settings,
                                const flow::IntegratorSettings& flow_settings);

struct RiccatiSettings {
  double tol = 1e-10;
  double h_max = 0.5;
  double ceiling = 1e8;
};

// U' + U^2 + R = 0 forward from the node at t_start (default: first node) to
// the end of the orbit. U is symmetrized after every accepted step.
MatrixPath riccati_flow(const OrbitSegment& orbit, const Matrix& U0, const RiccatiSettings& settings = {});
MatrixPath riccati_flow_from(const OrbitSegment& orbit, double t_start, const Matrix& U0,
                             const RiccatiSettings& settings = {});

// Zeros of det Y for Y(t0) = 0, Y'(t0) = I along the whole orbit, bisected to tol.
std::vector<double> detect_conjugate_points(const OrbitSegment& orbit, double tol = 1e-6,
                                            const SolverSettings& settings = {});

}  // namespace lab::jacobi
