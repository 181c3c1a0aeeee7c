#include "lab/spectra.hpp"

#include "lab/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace lab::spectra {

const char* to_string(Bundle b) { return b == Bundle::Stable ? "stable" : "unstable"; }

const char* to_string(Method m) {
  switch (m) {
    case Method::SlopeFit: return "slope_fit";
    case Method::TraceIntegral: return "trace_integral";
    case Method::DetDirect: return "det_direct";
  }
  return "unknown";
}

namespace {

double spectral_norm(const Matrix& a) {
  if (a.rows() == 1) return std::abs(a(0, 0));
  return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

// Nodes of the orbit used for quadrature on [t_lo, t_hi]: the dense output
// grid plus the window ends.
std::vector<std::size_t> quadrature_nodes(const OrbitSegment& orbit, double t_lo, double t_hi) {
  if (t_hi <= t_lo) throw LabError(ErrorCode::InvalidArgument, "empty window");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < orbit.size(); ++i) {
    const double t = orbit.times[i];
    const bool end = same_time(t, t_lo) || same_time(t, t_hi);
    if (t < t_lo && !end) continue;
    if (t > t_hi && !end) continue;
    if (end || !orbit.has_dense_flags() || orbit.dense[i]) idx.push_back(i);
  }
  if (idx.size() < 2 || !same_time(orbit.times[idx.front()], t_lo) || !same_time(orbit.times[idx.back()], t_hi))
    throw LabError(ErrorCode::GridMismatch, "window ends are not orbit nodes");
  return idx;
}

double integrate_nodes(const std::vector<double>& t, const std::vector<double>& f) {
  const std::size_t n = t.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
  double sum = 0.0;
  std::size_t i = 0;
  for (; i + 2 < n; i += 2) {
    const double h0 = t[i + 1] - t[i], h1 = t[i + 2] - t[i + 1];
    sum += (h0 + h1) / 6.0 *
           ((2.0 - h1 / h0) * f[i] + (h0 + h1) * (h0 + h1) / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
  }
  if (i + 1 < n) {
    // odd number of intervals: quadratic through the last three nodes
    const double h0 = t[n - 2] - t[n - 3], h1 = t[n - 1] - t[n - 2];
    const double alpha = (2 * h1 * h1 + 3 * h0 * h1) / (6 * (h0 + h1));
    const double beta = (h1 * h1 + 3 * h0 * h1) / (6 * h0);
    const double eta = h1 * h1 * h1 / (6 * h0 * (h0 + h1));
    sum += alpha * f[n - 1] + beta * f[n - 2] - eta * f[n - 3];
  }
  return sum;
}

}  // namespace

GrowthCurve tangent_growth(const OrbitSegment& orbit, const Matrix& U_init, const Eigen::VectorXd& w,
                           Bundle bundle, const GrowthSettings& settings) {
  if (!orbit.has_curvature()) throw LabError(ErrorCode::GridMismatch, "orbit has no curvature samples");
  const int m = orbit.normal_dim();
  if (w.size() != m || U_init.rows() != m) throw LabError(ErrorCode::GridMismatch, "dimension mismatch");
  const OrbitSegment fwd = orbit.slice(0.0, orbit.t_end());
  const jacobi::SolverSettings solver{settings.tol, settings.h_max};
  const Matrix I = Matrix::Identity(m, m);

  GrowthCurve out;
  out.bundle = bundle;
  std::vector<Eigen::VectorXd> J, Jp;
  if (bundle == Bundle::Unstable) {
    const MatrixPath Y = jacobi::solve_jacobi_ivp_from(fwd, 0.0, I, U_init, solver);
    for (std::size_t i = 0; i < Y.size(); ++i) {
      out.times.push_back(Y.times[i]);
      J.push_back(Y.values[i] * w);
      Jp.push_back(Y.derivatives[i] * w);
    }
  } else {
    const double t_stop = fwd.t_end() - settings.stable_margin;
    if (!(t_stop > 0.0))
      throw LabError(ErrorCode::InvalidArgument, "orbit too short for the stable anchoring margin");
    const MatrixPath Z = jacobi::solve_jacobi_ivp_from(fwd, fwd.t_end(), Matrix::Zero(m, m), -I, solver);
    const Matrix Zinv = Z.values.front().inverse();
    out.anchor_mismatch = spectral_norm(Z.derivatives.front() * Zinv - U_init);
    for (std::size_t i = 0; i < Z.size() && Z.times[i] <= t_stop; ++i) {
      out.times.push_back(Z.times[i]);
      J.push_back(Z.values[i] * Zinv * w);
      Jp.push_back(Z.derivatives[i] * Zinv * w);
    }
  }
  for (std::size_t i = 0; i < J.size(); ++i) {
    const double a = J[i].squaredNorm(), b = Jp[i].squaredNorm();
    out.log_norm.push_back(0.5 * std::log(a + b));
    out.log_base_norm.push_back(0.5 * std::log(a));
    if (!std::isfinite(out.log_norm.back()) || !std::isfinite(out.log_base_norm.back()))
      throw LabError(ErrorCode::SingularY, "Jacobi field vanished on the segment");
  }
  return out;
}

ExponentEstimate lyapunov_exponent(const GrowthCurve& curve, double t_lo, double t_hi, double min_window) {
  if (t_hi - t_lo < min_window) {
    std::ostringstream os;
    os << "window [" << t_lo << ", " << t_hi << "] shorter than " << min_window;
    throw LabError(ErrorCode::WindowTooShort, os.str());
  }
  if (curve.times.empty() || t_lo < curve.times.front() - 1e-9 || t_hi > curve.times.back() + 1e-9)
    throw LabError(ErrorCode::GridMismatch, "fit window outside the curve");
  double n = 0, st = 0, sy = 0;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const double t = curve.times[i];
    if (t < t_lo - 1e-9 || t > t_hi + 1e-9) continue;
    n += 1;
    st += t;
    sy += curve.log_norm[i];
  }
  if (n < 3) throw LabError(ErrorCode::GridMismatch, "too few nodes in the fit window");
  const double tm = st / n, ym = sy / n;
  double stt = 0, sty = 0;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const double t = curve.times[i];
    if (t < t_lo - 1e-9 || t > t_hi + 1e-9) continue;
    stt += (t - tm) * (t - tm);
    sty += (t - tm) * (curve.log_norm[i] - ym);
  }
  ExponentEstimate e;
  e.value = sty / stt;
  e.t_lo = t_lo;
  e.t_hi = t_hi;
  e.method = Method::SlopeFit;
  double ss = 0;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const double t = curve.times[i];
    if (t < t_lo - 1e-9 || t > t_hi + 1e-9) continue;
    const double r = curve.log_norm[i] - (ym + e.value * (t - tm));
    ss += r * r;
  }
  e.residual = std::sqrt(ss / n);
  return e;
}

double simpson(const std::vector<double>& t, const std::vector<double>& f, double t_lo, double t_hi) {
  if (t.size() != f.size()) throw LabError(ErrorCode::GridMismatch, "sample count mismatch");
  std::vector<double> ts, fs;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= t_lo - 1e-9 * std::max(1.0, std::abs(t_lo)) && t[i] <= t_hi + 1e-9 * std::max(1.0, std::abs(t_hi))) {
      ts.push_back(t[i]);
      fs.push_back(f[i]);
    }
  if (ts.size() < 2 || !same_time(ts.front(), t_lo) || !same_time(ts.back(), t_hi))
    throw LabError(ErrorCode::GridMismatch, "window ends are not grid nodes");
  return integrate_nodes(ts, fs);
}

ExponentEstimate det_exponent_via_trace(const OrbitSegment& orbit, const MatrixPath& U_path, double t_lo,
                                        double t_hi) {
  if (U_path.size() == 0) throw LabError(ErrorCode::GridMismatch, "empty path");
  const std::size_t offset = orbit.node_at(U_path.times.front());
  if (offset + U_path.size() > orbit.size()) throw LabError(ErrorCode::GridMismatch, "path longer than orbit");
  for (std::size_t k = 0; k < U_path.size(); ++k)
    if (!same_time(U_path.times[k], orbit.times[offset + k]))
      throw LabError(ErrorCode::GridMismatch, "path grid differs from the orbit grid");
  std::vector<double> t, f;
  for (std::size_t i : quadrature_nodes(orbit, t_lo, t_hi)) {
    if (i < offset || i >= offset + U_path.size())
      throw LabError(ErrorCode::GridMismatch, "window outside the path");
    t.push_back(orbit.times[i]);
    f.push_back(U_path.values[i - offset].trace());
  }
  ExponentEstimate e;
  e.value = integrate_nodes(t, f) / (t_hi - t_lo);
  e.t_lo = t_lo;
  e.t_hi = t_hi;
  e.method = Method::TraceIntegral;
  return e;
}

DetDirectEstimate det_exponent_direct(const OrbitSegment& orbit, const MatrixPath& Y_path, double c,
                                      double t_lo, double t_hi) {
  if (!Y_path.has_derivatives()) throw LabError(ErrorCode::GridMismatch, "Y path lacks derivatives");
  if (Y_path.size() != orbit.size()) throw LabError(ErrorCode::GridMismatch, "path grid differs from the orbit grid");
  for (std::size_t k = 0; k < Y_path.size(); ++k)
    if (!same_time(Y_path.times[k], orbit.times[k]))
      throw LabError(ErrorCode::GridMismatch, "path grid differs from the orbit grid");
  const std::size_t lo = Y_path.index_of(t_lo), hi = Y_path.index_of(t_hi);
  int sign = 0;
  for (std::size_t i = lo; i <= hi; ++i) {
    const double d = Y_path.values[i].determinant();
    const int s = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) {
      std::ostringstream os;
      os << "det Y+ vanishes near t = " << Y_path.times[i];
      throw LabError(ErrorCode::SingularY, os.str());
    }
    sign = s;
  }
  const int m = static_cast<int>(Y_path.values.front().rows());
  auto log_abs_det = [&](std::size_t i) {
    return Eigen::PartialPivLU<Matrix>(Y_path.values[i]).matrixLU().diagonal().cwiseAbs().array().log().sum();
  };
  auto projection = [&](std::size_t i) {
    const Matrix U = Y_path.derivatives[i] * Y_path.values[i].inverse();
    const Matrix Us = 0.5 * (U + U.transpose());
    return std::sqrt((Matrix::Identity(m, m) + Us * Us).determinant());
  };
  DetDirectEstimate out;
  out.estimate.value = (log_abs_det(hi) - log_abs_det(lo)) / (t_hi - t_lo);
  out.estimate.t_lo = t_lo;
  out.estimate.t_hi = t_hi;
  out.estimate.method = Method::DetDirect;
  out.projection_lo = projection(lo);
  out.projection_hi = projection(hi);
  out.projection_upper = std::pow(1.0 + c * c, 0.5 * m);
  const double slack = 1e-9;
  out.projection_bounds_hold = out.projection_lo >= 1.0 - slack && out.projection_hi >= 1.0 - slack &&
                               out.projection_lo <= out.projection_upper * (1.0 + slack) &&
                               out.projection_hi <= out.projection_upper * (1.0 + slack);
  out.projection_correction = std::log(out.projection_hi / out.projection_lo) / (t_hi - t_lo);
  return out;
}

NormDetCheck operator_norm_det_check(const Matrix& A, double rel_tol) {
  if (A.rows() != A.cols() || A.rows() == 0) throw LabError(ErrorCode::InvalidArgument, "A must be square");
  const double detA = A.determinant();
  if (detA == 0.0 || !std::isfinite(detA)) throw LabError(ErrorCode::SingularInput, "A is singular");
  const int m = static_cast<int>(A.rows());
  const Matrix Ainv = A.inverse();
  const double det_inv = std::abs(Ainv.determinant());
  NormDetCheck out;
  out.lower = std::pow(det_inv, -1.0 / m);
  out.norm = spectral_norm(A);
  out.upper = std::pow(spectral_norm(Ainv), m - 1) / det_inv;
  out.holds = out.lower <= out.norm * (1.0 + rel_tol) && out.norm <= out.upper * (1.0 + rel_tol);
  return out;
}

RSeries r_diagnostic(const GrowthCurve& stable, const GrowthCurve& unstable, double lambda, double c) {
  if (!(lambda > 0.0)) throw LabError(ErrorCode::InvalidArgument, "lambda must be positive");
  const std::size_t n = std::min(stable.times.size(), unstable.times.size());
  if (n == 0) throw LabError(ErrorCode::GridMismatch, "empty curves");
  for (std::size_t i = 0; i < n; ++i)
    if (!same_time(stable.times[i], unstable.times[i]))
      throw LabError(ErrorCode::GridMismatch, "stable and unstable curves use different grids");
  RSeries out;
  const double ll = std::log(lambda);
  out.bound = std::sqrt(1.0 + c * c) * std::exp(stable.log_norm[0] - unstable.log_norm[0]);
  out.min_increment = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = stable.times[i];
    const double r = std::exp(-2.0 * t * ll + stable.log_base_norm[i] - unstable.log_base_norm[i]);
    out.times.push_back(t);
    out.r.push_back(r);
    out.max_r = std::max(out.max_r, r);
    if (out.first_exceed_time < 0.0 && r > out.bound * (1.0 + 1e-9)) out.first_exceed_time = t;
    if (i > 0) out.min_increment = i == 1 ? r - out.r[i - 1] : std::min(out.min_increment, r - out.r[i - 1]);
  }
  out.bounded = out.first_exceed_time < 0.0;
  return out;
}

double birkhoff_ricci(const OrbitSegment& orbit, double t_lo, double t_hi) {
  if (!orbit.has_curvature()) throw LabError(ErrorCode::GridMismatch, "orbit has no curvature samples");
  std::vector<double> t, f;
  for (std::size_t i : quadrature_nodes(orbit, t_lo, t_hi)) {
    t.push_back(orbit.times[i]);
    f.push_back(orbit.curvature[i].trace());
  }
  return integrate_nodes(t, f) / (t_hi - t_lo);
}

PointAnalysis analyze_point(const MetricModel& model, const UnitTangentState& theta, double c,
                            const PointSettings& settings) {
  PointAnalysis out;
  out.theta = theta;
  const double T = settings.T;
  const double horizon = T + settings.growth.stable_margin;
  const OrbitSegment fwd = flow::integrate_geodesic(model, theta, horizon, settings.flow);
  if (fwd.chart_exit) {
    std::ostringstream os;
    os << "orbit left the chart at t = " << fwd.exit_time;
    throw LabError(ErrorCode::ChartExit, os.str());
  }
  out.max_speed_error = fwd.log.max_node_speed_error;
  out.max_frame_error = fwd.log.max_node_frame_error;
  const int m = fwd.normal_dim();
  const Matrix I = Matrix::Identity(m, m);
  const Eigen::VectorXd w = Eigen::VectorXd::Unit(m, 0);

  // the forward orbit already covers most requests for the stable limit
  const jacobi::OrbitExtender fallback = jacobi::reversed_forward_extender(model, theta, settings.flow);
  const jacobi::OrbitExtender stable_ext = [&fwd, &fallback](double Tb) {
    if (Tb <= fwd.t_end()) return fwd.slice(0.0, Tb).time_reversed();
    return fallback(Tb);
  };
  out.U_minus = jacobi::green_limit(stable_ext, c, settings.green);
  out.U_minus.U_plus = -out.U_minus.U_plus;
  if (!out.U_minus.converged) {
    std::ostringstream os;
    os << "stable Green limit did not converge (gap " << out.U_minus.cauchy_gap << ")";
    throw LabError(ErrorCode::NoConvergence, os.str());
  }
  out.stable = tangent_growth(fwd, out.U_minus.U_plus, w, Bundle::Stable, settings.growth);
  const double t_fit = settings.window_start_frac * T;
  out.chi_s = lyapunov_exponent(out.stable, t_fit, T, settings.min_window);

  std::vector<double> ks;
  for (std::size_t i = 0; i < fwd.size() && fwd.times[i] <= T + 1e-9; ++i)
    if (!fwd.has_dense_flags() || fwd.dense[i]) ks.push_back(model.gaussian_curvature(fwd.positions[i]));
  out.orbit_inf_K = *std::min_element(ks.begin(), ks.end());
  out.orbit_sup_K = *std::max_element(ks.begin(), ks.end());
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double d = ks[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (ks[i] - mean);
  }
  out.orbit_mean_K = mean;
  out.orbit_var_K = m2 / static_cast<double>(ks.size());
  out.orbit_K_samples = static_cast<long>(ks.size());
  out.birkhoff = birkhoff_ricci(fwd, 0.0, T);

  if (!settings.unstable) return out;
  out.U_plus = jacobi::unstable_limit(model, theta, c, settings.green, settings.flow);
  if (!out.U_plus.converged) {
    std::ostringstream os;
    os << "unstable Green limit did not converge (gap " << out.U_plus.cauchy_gap << ")";
    throw LabError(ErrorCode::NoConvergence, os.str());
  }
  out.unstable = tangent_growth(fwd, out.U_plus.U_plus, w, Bundle::Unstable, settings.growth);
  out.chi_u = lyapunov_exponent(out.unstable, t_fit, T, settings.min_window);
  jacobi::RiccatiSettings rs;
  rs.tol = settings.growth.tol;
  rs.h_max = settings.growth.h_max;
  const MatrixPath U_path = jacobi::riccati_flow_from(fwd, 0.0, out.U_plus.U_plus, rs);
  out.det_trace = det_exponent_via_trace(fwd, U_path, 0.0, T);
  const MatrixPath Y_path =
      jacobi::solve_jacobi_ivp_from(fwd, 0.0, I, out.U_plus.U_plus, {settings.growth.tol, settings.growth.h_max});
  out.det_direct = det_exponent_direct(fwd, Y_path, c, 0.0, T);
  out.has_unstable = true;
  return out;
}

ContractionEstimate contraction_constant(const MetricModel& model, const std::vector<UnitTangentState>& grid,
                                         double c, const PointSettings& settings, int threads) {
  if (grid.empty()) throw LabError(ErrorCode::InvalidArgument, "empty theta grid");
  if (settings.T < 2.0 * settings.min_window)
    throw LabError(ErrorCode::WindowTooShort, "T must be at least twice the minimum fit window");
  std::vector<std::optional<PointAnalysis>> results(grid.size());
  std::vector<std::string> reasons(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        results[i] = analyze_point(model, grid[i], c, settings);
      } catch (const LabError& e) {
        if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::GridMismatch) throw;
        std::ostringstream os;
        os << "point " << i << ": " << e.what();
        reasons[i] = os.str();
      }
    }
  };
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(grid.size())));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex mu;
    for (int k = 0; k < nt; ++k)
      pool.emplace_back([&]() {
        try {
          worker();
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  ContractionEstimate out;
  out.grid_size = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (results[i])
      out.points.push_back(std::move(*results[i]));
    else
      out.skipped.push_back(reasons[i]);
  }
  if (out.points.empty() || 10 * out.skipped.size() > grid.size()) {
    std::ostringstream os;
    os << out.skipped.size() << " of " << grid.size() << " grid points skipped";
    if (!out.skipped.empty()) os << "; first: " << out.skipped.front();
    throw LabError(ErrorCode::NoConvergence, os.str());
  }
  out.max_rate = out.points.front().chi_s.value;
  for (std::size_t i = 1; i < out.points.size(); ++i)
    if (out.points[i].chi_s.value > out.max_rate) {
      out.max_rate = out.points[i].chi_s.value;
      out.worst_index = i;
    }
  out.lambda_hat = std::exp(out.max_rate);
  return out;
}

void write_growth_csv(std::ostream& os, const GrowthCurve& stable, const GrowthCurve& unstable) {
  os << "# schema=growth.v1\n";
  os << "t,log_norm_stable,log_base_stable,log_norm_unstable,log_base_unstable\n";
  os.precision(17);
  const std::size_t n = std::max(stable.times.size(), unstable.times.size());
  for (std::size_t i = 0; i < n; ++i) {
    const bool s = i < stable.times.size(), u = i < unstable.times.size();
    os << (s ? stable.times[i] : unstable.times[i]) << ',';
    if (s) os << stable.log_norm[i] << ',' << stable.log_base_norm[i];
    else os << ',';
    os << ',';
    if (u) os << unstable.log_norm[i] << ',' << unstable.log_base_norm[i];
    else os << ',';
    os << '\n';
  }
}

}  // namespace lab::spectra
