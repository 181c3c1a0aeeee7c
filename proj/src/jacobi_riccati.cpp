#include "lab/jacobi_riccati.hpp"

#include "lab/error.hpp"
#include "lab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <sstream>

namespace lab::jacobi {

std::size_t MatrixPath::index_of(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12 * std::max(1.0, std::abs(t)));
  if (it == times.end() || std::abs(*it - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    std::ostringstream os;
    os << "no node at t = " << t;
    throw LabError(ErrorCode::GridMismatch, os.str());
  }
  return static_cast<std::size_t>(it - times.begin());
}

void write_matrix_path_csv(std::ostream& os, const MatrixPath& path, const char* value_prefix) {
  os << "# schema=matrix_path.v1\n";
  os << "t";
  const int m = path.size() ? static_cast<int>(path.values.front().rows()) : 1;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) os << ',' << value_prefix << i + 1 << j + 1;
  if (path.has_derivatives())
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) os << ",d" << value_prefix << i + 1 << j + 1;
  os << '\n';
  os.precision(17);
  for (std::size_t k = 0; k < path.size(); ++k) {
    os << path.times[k];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) os << ',' << path.values[k](i, j);
    if (path.has_derivatives())
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) os << ',' << path.derivatives[k](i, j);
    os << '\n';
  }
}

CurvatureInterpolant::CurvatureInterpolant(const OrbitSegment& orbit) {
  if (!orbit.has_curvature()) throw LabError(ErrorCode::GridMismatch, "orbit has no curvature samples");
  t_ = orbit.times;
  r_ = orbit.curvature;
  m_ = static_cast<int>(r_.front().rows());
  const std::size_t n = t_.size();
  dr_.assign(n, Matrix::Zero(m_, m_));
  if (n < 2) return;
  if (orbit.has_curvature_rate()) {
    dr_ = orbit.curvature_rate;
    return;
  }
  if (n == 2) {
    dr_[0] = dr_[1] = (r_[1] - r_[0]) / (t_[1] - t_[0]);
    return;
  }
  // three-point formula on a non-uniform grid
  auto slope = [&](std::size_t a, std::size_t b, std::size_t c, std::size_t at) {
    const double ta = t_[a], tb = t_[b], tc = t_[c], x = t_[at];
    const double wa = (2 * x - tb - tc) / ((ta - tb) * (ta - tc));
    const double wb = (2 * x - ta - tc) / ((tb - ta) * (tb - tc));
    const double wc = (2 * x - ta - tb) / ((tc - ta) * (tc - tb));
    return (wa * r_[a] + wb * r_[b] + wc * r_[c]).eval();
  };
  dr_[0] = slope(0, 1, 2, 0);
  for (std::size_t i = 1; i + 1 < n; ++i) dr_[i] = slope(i - 1, i, i + 1, i);
  dr_[n - 1] = slope(n - 3, n - 2, n - 1, n - 1);
}

Matrix CurvatureInterpolant::operator()(double t) const {
  const std::size_t n = t_.size();
  if (n == 1) return r_[0];
  std::size_t i = std::min(hint_, n - 2);
  if (!(t_[i] <= t && t <= t_[i + 1])) {
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    i = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
    i = std::min(i, n - 2);
    hint_ = i;
  }
  const double h = t_[i + 1] - t_[i];
  const double s = (t - t_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * r_[i] + (s3 - 2 * s2 + s) * h * dr_[i] + (-2 * s3 + 3 * s2) * r_[i + 1] +
         (s3 - s2) * h * dr_[i + 1];
}

namespace {

using ode::State;

std::size_t node_index(const OrbitSegment& orbit, double t) {
  const std::size_t i = orbit.node_at(t);
  if (std::abs(orbit.times[i] - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    std::ostringstream os;
    os << "t = " << t << " is not an orbit node";
    throw LabError(ErrorCode::GridMismatch, os.str());
  }
  return i;
}

Matrix unpack(const State& y, int m, int block) {
  return Eigen::Map<const Matrix>(y.data() + block * m * m, m, m);
}

void pack(State& y, const Matrix& a, int block) {
  const int m = static_cast<int>(a.rows());
  Eigen::Map<Matrix>(y.data() + block * m * m, m, m) = a;
}

// Integrates from node i0 through the nodes in direction dir, storing the state
// at each node in out[i].
void sweep(const std::vector<double>& times, std::size_t i0, const State& y0, int dir,
           const ode::Rhs& rhs, const ode::Options& opt,
           const std::function<void(ode::DormandPrince45&)>& on_accept, std::vector<State>& out) {
  out[i0] = y0;
  std::vector<double> outs;
  std::vector<std::size_t> idx;
  if (dir > 0)
    for (std::size_t i = i0 + 1; i < times.size(); ++i) outs.push_back(times[i]), idx.push_back(i);
  else
    for (std::size_t i = i0; i-- > 0;) outs.push_back(times[i]), idx.push_back(i);
  if (outs.empty()) return;
  ode::DormandPrince45 stepper(rhs, opt);
  std::size_t k = 0;
  ode::DriveHooks hooks;
  hooks.on_output = [&](double, const State& y) { out[idx[k++]] = y; };
  if (on_accept) hooks.on_accept = on_accept;
  ode::drive(stepper, times[i0], y0, outs.back(), outs, hooks);
}

ode::Options options(double tol, double h_max) {
  if (!(tol > 0.0)) throw LabError(ErrorCode::InvalidArgument, "tolerance must be positive");
  ode::Options opt;
  opt.rtol = tol;
  opt.atol = tol;
  opt.h_max = h_max;
  return opt;
}

ode::Rhs jacobi_rhs(const CurvatureInterpolant& R, int m) {
  return [&R, m](double t, const State& y, State& dy) {
    const Matrix Y = unpack(y, m, 0);
    const Matrix P = unpack(y, m, 1);
    pack(dy, P, 0);
    pack(dy, -R(t) * Y, 1);
  };
}

double spectral_norm(const Matrix& a) {
  if (a.rows() == 1) return std::abs(a(0, 0));
  return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

}  // namespace

MatrixPath solve_jacobi_ivp(const OrbitSegment& orbit, const Matrix& Y0, const Matrix& Y0p,
                            const SolverSettings& settings) {
  if (!orbit.has_curvature()) throw LabError(ErrorCode::GridMismatch, "orbit has no curvature samples");
  return solve_jacobi_ivp_from(orbit, orbit.t_begin(), Y0, Y0p, settings);
}

MatrixPath solve_jacobi_ivp_from(const OrbitSegment& orbit, double t_start, const Matrix& Y0,
                                 const Matrix& Y0p, const SolverSettings& settings) {
  const CurvatureInterpolant R(orbit);
  const int m = R.dim();
  if (Y0.rows() != m || Y0.cols() != m || Y0p.rows() != m || Y0p.cols() != m)
    throw LabError(ErrorCode::GridMismatch, "initial data does not match the normal dimension");
  const std::size_t i0 = node_index(orbit, t_start);
  State y0(2 * m * m);
  pack(y0, Y0, 0);
  pack(y0, Y0p, 1);
  const ode::Rhs rhs = jacobi_rhs(R, m);
  const ode::Options opt = options(settings.tol, settings.h_max);
  std::vector<State> states(orbit.size());
  sweep(orbit.times, i0, y0, +1, rhs, opt, {}, states);
  sweep(orbit.times, i0, y0, -1, rhs, opt, {}, states);
  MatrixPath path;
  path.times = orbit.times;
  for (const State& y : states) {
    path.values.push_back(unpack(y, m, 0));
    path.derivatives.push_back(unpack(y, m, 1));
  }
  return path;
}

GreenBvpResult green_bvp(const OrbitSegment& orbit, const SolverSettings& settings) {
  if (!orbit.has_curvature()) throw LabError(ErrorCode::GridMismatch, "orbit has no curvature samples");
  const std::size_t b = node_index(orbit, 0.0);
  if (b == 0) throw LabError(ErrorCode::InvalidArgument, "green_bvp needs an orbit covering [s, 0] with s < 0");
  const OrbitSegment seg = orbit.slice(orbit.t_begin(), 0.0);
  const CurvatureInterpolant R(seg);
  const int m = R.dim();
  State y0(2 * m * m);
  pack(y0, Matrix::Zero(m, m), 0);
  pack(y0, Matrix::Identity(m, m), 1);
  std::vector<State> states(seg.size());
  sweep(seg.times, 0, y0, +1, jacobi_rhs(R, m), options(settings.tol, settings.h_max), {}, states);

  GreenBvpResult out;
  const Matrix Z0 = unpack(states.back(), m, 0);
  out.det_Z0 = Z0.determinant();
  double scale = 0.0;
  int sign = 0;
  for (std::size_t i = 1; i < states.size(); ++i) {
    const Matrix Z = unpack(states[i], m, 0);
    scale = std::max(scale, std::pow(spectral_norm(Z), m));
    const double d = Z.determinant();
    const int s = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (i + 1 < states.size() && sign != 0 && s != sign) {
      std::ostringstream os;
      os << "det Z changes sign near t = " << seg.times[i];
      throw LabError(ErrorCode::ConjugatePointOnSegment, os.str());
    }
    if (s != 0) sign = s;
  }
  out.det_scale = scale;
  const double threshold = std::max(1e-10, 100.0 * settings.tol) * scale;
  if (!(std::abs(out.det_Z0) > threshold)) {
    std::ostringstream os;
    os << "|det Z(0)| = " << std::abs(out.det_Z0) << " below threshold " << threshold;
    throw LabError(ErrorCode::ConjugatePointOnSegment, os.str());
  }
  const Matrix Zinv = Z0.inverse();
  out.path.times = seg.times;
  for (const State& y : states) {
    out.path.values.push_back(unpack(y, m, 0) * Zinv);
    out.path.derivatives.push_back(unpack(y, m, 1) * Zinv);
  }
  out.U_s = out.path.derivatives.back();
  out.residual_start = (out.path.values.back() - Matrix::Identity(m, m)).norm();
  out.residual_end = out.path.values.front().norm();
  return out;
}

GreenLimitResult green_limit(const OrbitExtender& extender, double c, const GreenLimitSettings& settings) {
  if (!(c > 0.0)) throw LabError(ErrorCode::InvalidArgument, "green_limit needs c > 0");
  const double T_init = settings.T_init > 0.0 ? settings.T_init : 5.0 / c;
  const double T_max = settings.T_max > 0.0 ? settings.T_max : 200.0 / c;
  GreenLimitResult out;
  double T = T_init;
  Matrix U_prev;
  while (true) {
    const OrbitSegment orbit = extender(T);
    const GreenBvpResult bvp = green_bvp(orbit, settings.solver);
    GapRecord rec;
    rec.T = -orbit.t_begin();
    rec.u_norm = spectral_norm(bvp.U_s);
    if (U_prev.size() != 0) rec.gap = spectral_norm(bvp.U_s - U_prev);
    out.history.push_back(rec);
    out.U_plus = bvp.U_s;
    out.T_back_used = rec.T;
    if (U_prev.size() != 0) {
      out.cauchy_gap = rec.gap;
      if (rec.gap <= settings.tol) {
        out.converged = true;
        break;
      }
    }
    U_prev = bvp.U_s;
    if (2.0 * T > T_max * (1.0 + 1e-12)) break;
    T *= 2.0;
  }
  out.asymmetry = (out.U_plus - out.U_plus.transpose()).cwiseAbs().maxCoeff();
  out.norm = spectral_norm(out.U_plus);
  out.within_green_bound = out.norm <= c + settings.bound_slack;
  return out;
}

GreenLimitResult green_limit_strict(const OrbitExtender& extender, double c,
                                    const GreenLimitSettings& settings) {
  GreenLimitResult r = green_limit(extender, c, settings);
  if (!r.converged) {
    std::ostringstream os;
    os << "Cauchy gap " << r.cauchy_gap << " above " << settings.tol << " at T = " << r.T_back_used;
    throw LabError(ErrorCode::NoConvergence, os.str());
  }
  return r;
}

namespace {

OrbitExtender caching_extender(std::function<OrbitSegment(double)> integrate) {
  auto cache = std::make_shared<OrbitSegment>();
  return [cache, integrate](double T) {
    if (cache->size() == 0 || cache->t_begin() > -T * (1.0 + 1e-12)) {
      *cache = integrate(T);
      if (cache->chart_exit) {
        std::ostringstream os;
        os << "orbit left the chart at t = " << cache->exit_time << " while extending to " << -T;
        throw LabError(ErrorCode::ChartExit, os.str());
      }
    }
    return cache->slice(-T, 0.0);
  };
}

}  // namespace

OrbitExtender backward_extender(const metric::MetricModel& model, const flow::UnitTangentState& theta,
                                const flow::IntegratorSettings& settings) {
  return caching_extender([model, theta, settings](double T) {
    return flow::integrate_geodesic(model, theta, -T, settings);
  });
}

OrbitExtender reversed_forward_extender(const metric::MetricModel& model,
                                        const flow::UnitTangentState& theta,
                                        const flow::IntegratorSettings& settings) {
  return caching_extender([model, theta, settings](double T) {
    OrbitSegment fwd = flow::integrate_geodesic(model, theta, T, settings);
    if (fwd.chart_exit) fwd.exit_time = -fwd.exit_time;
    return fwd.time_reversed();
  });
}

GreenLimitResult stable_limit(const metric::MetricModel& model, const flow::UnitTangentState& theta,
                              double c, const GreenLimitSettings& settings,
                              const flow::IntegratorSettings& flow_settings) {
  GreenLimitResult r = green_limit(reversed_forward_extender(model, theta, flow_settings), c, settings);
  r.U_plus = -r.U_plus;
  return r;
}

GreenLimitResult unstable_limit(const metric::MetricModel& model, const flow::UnitTangentState& theta,
                                double c, const GreenLimitSettings& settings,
                                const flow::IntegratorSettings& flow_settings) {
  return green_limit(backward_extender(model, theta, flow_settings), c, settings);
}

MatrixPath riccati_flow(const OrbitSegment& orbit, const Matrix& U0, const RiccatiSettings& settings) {
  if (!orbit.has_curvature()) throw LabError(ErrorCode::GridMismatch, "orbit has no curvature samples");
  return riccati_flow_from(orbit, orbit.t_begin(), U0, settings);
}

MatrixPath riccati_flow_from(const OrbitSegment& orbit, double t_start, const Matrix& U0,
                             const RiccatiSettings& settings) {
  const CurvatureInterpolant R(orbit);
  const int m = R.dim();
  if (U0.rows() != m || U0.cols() != m)
    throw LabError(ErrorCode::GridMismatch, "initial data does not match the normal dimension");
  if ((U0 - U0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, U0.cwiseAbs().maxCoeff()))
    throw LabError(ErrorCode::InvalidArgument, "U0 is not symmetric");
  const std::size_t i0 = node_index(orbit, t_start);
  State y0(m * m);
  pack(y0, 0.5 * (U0 + U0.transpose()), 0);
  auto rhs = [&R, m](double t, const State& y, State& dy) {
    const Matrix U = unpack(y, m, 0);
    pack(dy, -(U * U + R(t)), 0);
  };
  MatrixPath path;
  auto on_accept = [&](ode::DormandPrince45& s) {
    const Matrix U = unpack(s.y(), m, 0);
    const double asym = (U - U.transpose()).cwiseAbs().maxCoeff();
    path.max_asymmetry = std::max(path.max_asymmetry, asym);
    const double norm = spectral_norm(U);
    if (!(norm <= settings.ceiling)) {
      std::ostringstream os;
      os << "|U| = " << norm << " exceeds " << settings.ceiling << " at t = " << s.t();
      throw LabError(ErrorCode::BlowUp, os.str());
    }
    if (asym > 0.0) {
      State y = s.y();
      pack(y, 0.5 * (U + U.transpose()), 0);
      s.replace_state(y);
    }
  };
  const std::vector<double> sub(orbit.times.begin() + static_cast<long>(i0), orbit.times.end());
  std::vector<State> tail(sub.size());
  sweep(sub, 0, y0, +1, rhs, options(settings.tol, settings.h_max), on_accept, tail);
  path.times = sub;
  for (const State& y : tail) path.values.push_back(unpack(y, m, 0));
  return path;
}

std::vector<double> detect_conjugate_points(const OrbitSegment& orbit, double tol,
                                            const SolverSettings& settings) {
  const CurvatureInterpolant R(orbit);
  const int m = R.dim();
  State y0(2 * m * m);
  pack(y0, Matrix::Zero(m, m), 0);
  pack(y0, Matrix::Identity(m, m), 1);
  ode::DormandPrince45 stepper(jacobi_rhs(R, m), options(settings.tol, settings.h_max));
  std::vector<double> found;
  int sign = 0;
  auto det_at = [m](const State& y) { return unpack(y, m, 0).determinant(); };
  ode::DriveHooks hooks;
  hooks.on_accept = [&](ode::DormandPrince45& s) {
    const double d = det_at(s.y());
    const int sg = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (sign != 0 && sg != sign) {
      double lo = s.t_prev(), hi = s.t();
      if (sg != 0) {
        while (hi - lo > tol) {
          const double mid = 0.5 * (lo + hi);
          const double dm = det_at(s.dense(mid));
          if ((dm > 0 ? 1 : -1) == sign)
            lo = mid;
          else
            hi = mid;
        }
      } else {
        lo = hi;
      }
      found.push_back(0.5 * (lo + hi));
    }
    if (sg != 0) sign = sg;
  };
  const std::vector<double> none;
  ode::drive(stepper, orbit.t_begin(), y0, orbit.t_end(), none, hooks);
  return found;
}

}  // namespace lab::jacobi
