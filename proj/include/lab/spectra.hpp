#pragma once

#include "lab/jacobi_riccati.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace lab::spectra {

using flow::OrbitSegment;
using flow::UnitTangentState;
using jacobi::Matrix;
using jacobi::MatrixPath;
using metric::MetricModel;

enum class Bundle { Stable, Unstable };
const char* to_string(Bundle b);

struct GrowthCurve {
  std::vector<double> times;
  std::vector<double> log_norm;       // log Sasaki norm of (J, J')
  std::vector<double> log_base_norm;  // log |J|
  Bundle bundle = Bundle::Unstable;
  // |Z'(0) Z(0)^{-1} - U_init| for stable curves (the anchored solution's
  // slope at the base point against the supplied U-); 0 for unstable curves.
  double anchor_mismatch = 0.0;
};

struct GrowthSettings {
  double tol = 1e-10;
  double h_max = 0.5;
  // Stable curves are anchored at the orbit end and reported up to
  // t_end - stable_margin.
  double stable_margin = 25.0;
};

// Tangent vector field (J, J') with J(0) = w, J'(0) = U_init w along the orbit
// from its base node. Unstable: forward initial-value problem. Stable: the
// Jacobi field vanishing at the orbit end, normalized to J(0) = w, which is the
// numerically stable representative of the same solution.
GrowthCurve tangent_growth(const OrbitSegment& orbit, const Matrix& U_init, const Eigen::VectorXd& w,
                           Bundle bundle, const GrowthSettings& settings = {});

enum class Method { SlopeFit, TraceIntegral, DetDirect };
const char* to_string(Method m);

struct ExponentEstimate {
  double value = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  double residual = 0.0;
  Method method = Method::SlopeFit;
};

// Least-squares slope of log_norm on [t_lo, t_hi]; needs t_hi - t_lo >= min_window.
ExponentEstimate lyapunov_exponent(const GrowthCurve& curve, double t_lo, double t_hi,
                                   double min_window = 5.0);

// Composite Simpson rule on a non-uniform grid over the nodes in [t_lo, t_hi]
// (both ends must be nodes).
double simpson(const std::vector<double>& t, const std::vector<double>& f, double t_lo, double t_hi);

// (1/|window|) * integral of tr U over the window; U path on the orbit grid.
ExponentEstimate det_exponent_via_trace(const OrbitSegment& orbit, const MatrixPath& U_path, double t_lo,
                                        double t_hi);

struct DetDirectEstimate {
  ExponentEstimate estimate;
  double projection_lo = 0.0;  // sqrt(det(I + U^2)) at t_lo
  double projection_hi = 0.0;
  double projection_upper = 0.0;  // (1 + c^2)^{(n-1)/2}
  bool projection_bounds_hold = false;
  double projection_correction = 0.0;  // log ratio of projections / |window|
};

// (1/|window|) [log|det Y(t_hi)| - log|det Y(t_lo)|] for Y(0) = I, Y'(0) = U+.
// Y path must carry derivatives so U = Y' Y^{-1} is available at the ends.
DetDirectEstimate det_exponent_direct(const OrbitSegment& orbit, const MatrixPath& Y_path, double c,
                                      double t_lo, double t_hi);

struct NormDetCheck {
  double lower = 0.0;  // |det A^{-1}|^{-1/m}
  double norm = 0.0;   // |A|
  double upper = 0.0;  // |A^{-1}|^{m-1} / |det A^{-1}|
  bool holds = false;
};
NormDetCheck operator_norm_det_check(const Matrix& A, double rel_tol = 1e-12);

struct RSeries {
  std::vector<double> times;
  std::vector<double> r;
  double bound = 0.0;     // sqrt(1 + c^2) |xi| / |eta|
  double max_r = 0.0;
  bool bounded = false;
  double first_exceed_time = -1.0;  // -1 if never
  double min_increment = 0.0;       // min over t of r(t+h) - r(t)
};

// r(t) = lambda^{-2t} |J_s(t)| / |J_u(t)| on the common grid of both curves.
RSeries r_diagnostic(const GrowthCurve& stable, const GrowthCurve& unstable, double lambda, double c);

// Time average of K along the orbit over the window (Simpson).
double birkhoff_ricci(const OrbitSegment& orbit, double t_lo, double t_hi);

struct PointSettings {
  double T = 50.0;                 // forward horizon for the growth curves
  double window_start_frac = 0.2;  // fit window [frac*T, T]
  double min_window = 5.0;
  flow::IntegratorSettings flow{1e-10, 0.01, 0.5};
  jacobi::GreenLimitSettings green;
  GrowthSettings growth;
  bool unstable = true;  // also compute U+, unstable curve and det exponents
};

struct PointAnalysis {
  UnitTangentState theta;
  jacobi::GreenLimitResult U_minus;
  jacobi::GreenLimitResult U_plus;
  GrowthCurve stable;
  GrowthCurve unstable;
  ExponentEstimate chi_s;
  ExponentEstimate chi_u;
  ExponentEstimate det_trace;
  DetDirectEstimate det_direct;
  double birkhoff = 0.0;
  double orbit_inf_K = 0.0;
  double orbit_sup_K = 0.0;
  double orbit_mean_K = 0.0;
  double orbit_var_K = 0.0;  // population variance over dense nodes in [0, T]
  long orbit_K_samples = 0;
  double max_speed_error = 0.0;
  double max_frame_error = 0.0;
  bool has_unstable = false;
};

// Green limits, growth curves and exponent estimates at one base point.
PointAnalysis analyze_point(const MetricModel& model, const UnitTangentState& theta, double c,
                            const PointSettings& settings);

struct ContractionEstimate {
  double lambda_hat = 0.0;
  double max_rate = 0.0;
  std::vector<PointAnalysis> points;  // successful points, grid order
  std::vector<std::string> skipped;   // reasons, one per skipped point
  std::size_t worst_index = 0;        // into points
  std::size_t grid_size = 0;
};

// lambda_hat = exp(max over the grid of the fitted stable rate). Points whose
// Green limit does not converge are skipped; more than 10% skipped throws
// NoConvergence.
ContractionEstimate contraction_constant(const MetricModel& model, const std::vector<UnitTangentState>& grid,
                                         double c, const PointSettings& settings, int threads = 1);

void write_growth_csv(std::ostream& os, const GrowthCurve& stable, const GrowthCurve& unstable);

}  // namespace lab::spectra
