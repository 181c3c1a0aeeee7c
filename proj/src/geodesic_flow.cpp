#include "lab/geodesic_flow.hpp"

#include "lab/error.hpp"
#include "lab/ode.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <ostream>
#include <sstream>

namespace lab::flow {

double inner(const MetricModel& model, const ChartPoint& p, const Vec2& a, const Vec2& b) {
  return a.dot(model.metric_tensor(p) * b);
}

Vec2 rotate_quarter(const MetricModel& model, const ChartPoint& p, const Vec2& v) {
  const metric::Mat2 g = model.metric_tensor(p);
  const Vec2 gv = g * v;
  return Vec2(-gv.y(), gv.x()) / std::sqrt(g.determinant());
}

UnitTangentState unit_state(const MetricModel& model, const ChartPoint& p, double angle) {
  const metric::Mat2 g = model.metric_tensor(p);
  const Vec2 e1 = Vec2(1.0, 0.0) / std::sqrt(g(0, 0));
  Vec2 e2(0.0, 1.0);
  e2 -= e1.dot(g * e2) * e1;
  e2 /= std::sqrt(e2.dot(g * e2));
  double cs = std::cos(angle), sn = std::sin(angle);
  if (std::abs(cs) < 1e-15) cs = 0.0;
  if (std::abs(sn) < 1e-15) sn = 0.0;
  return {p, cs * e1 + sn * e2};
}

std::size_t OrbitSegment::node_at(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end()) return times.size() - 1;
  const std::size_t i = static_cast<std::size_t>(it - times.begin());
  if (i > 0 && std::abs(times[i - 1] - t) < std::abs(times[i] - t)) return i - 1;
  return i;
}

OrbitSegment OrbitSegment::time_reversed() const {
  OrbitSegment out = *this;
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = n - 1 - i;
    out.times[i] = -times[j];
    out.positions[i] = positions[j];
    out.velocities[i] = -velocities[j];
    if (has_frame()) out.frames[i] = frames[j];
    if (has_curvature()) out.curvature[i] = curvature[j];
    if (has_curvature_rate()) out.curvature_rate[i] = -curvature_rate[j];
    if (has_dense_flags()) out.dense[i] = dense[j];
  }
  out.base_index = n - 1 - base_index;
  if (chart_exit) out.exit_time = -exit_time;
  return out;
}

OrbitSegment OrbitSegment::rebased(std::size_t i) const {
  OrbitSegment out = *this;
  const double t0 = times.at(i);
  for (double& t : out.times) t -= t0;
  out.times[i] = 0.0;
  out.base_index = i;
  if (chart_exit) out.exit_time -= t0;
  return out;
}

OrbitSegment OrbitSegment::slice(double t_lo, double t_hi) const {
  const double eps = 1e-12 * std::max(1.0, std::max(std::abs(t_lo), std::abs(t_hi)));
  std::size_t lo = 0;
  while (lo < size() && times[lo] < t_lo - eps) ++lo;
  std::size_t hi = size();
  while (hi > lo && times[hi - 1] > t_hi + eps) --hi;
  if (base_index < lo || base_index >= hi)
    throw LabError(ErrorCode::GridMismatch, "slice must contain the base node");
  OrbitSegment out = *this;
  auto cut = [&](auto& v) {
    if (v.size() == times.size()) v = std::vector(v.begin() + lo, v.begin() + hi);
  };
  cut(out.positions);
  cut(out.velocities);
  cut(out.frames);
  cut(out.curvature);
  cut(out.curvature_rate);
  cut(out.dense);
  out.times = std::vector(times.begin() + lo, times.begin() + hi);
  out.base_index = base_index - lo;
  return out;
}

namespace {

struct Node {
  double t;
  ode::State y;
  bool dense;
};

// Renormalizes v and Gram-Schmidts the frame vector; returns the drifts found.
std::pair<double, double> project(const MetricModel& model, ode::State& y) {
  const Vec2 p = y.segment<2>(0);
  const metric::Mat2 g = model.metric_tensor(p);
  Vec2 v = y.segment<2>(2);
  Vec2 e = y.segment<2>(4);
  const double vv = v.dot(g * v);
  const double ev = e.dot(g * v) / std::sqrt(vv);
  const double ee = e.dot(g * e);
  const double speed_drift = std::abs(vv - 1.0);
  const double frame_drift = std::max(std::abs(ee - 1.0), std::abs(ev));
  v /= std::sqrt(vv);
  e -= e.dot(g * v) * v;
  e /= std::sqrt(e.dot(g * e));
  y.segment<2>(2) = v;
  y.segment<2>(4) = e;
  return {speed_drift, frame_drift};
}

Eigen::MatrixXd curvature_matrix(const MetricModel& model, const ChartPoint& p, const Vec2& v,
                                 const Vec2& e) {
  // n = 2: <R(v, e)v, e> = K (|v|^2 |e|^2 - <v,e>^2)
  const metric::Mat2 g = model.metric_tensor(p);
  const double vv = v.dot(g * v), ee = e.dot(g * e), ve = v.dot(g * e);
  Eigen::MatrixXd R(1, 1);
  R(0, 0) = model.gaussian_curvature(p) * (vv * ee - ve * ve);
  return R;
}

// d/dt K(gamma(t)) by a central difference along the chart velocity; the frame
// factor is constant for a parallel orthonormal frame.
Eigen::MatrixXd curvature_rate(const MetricModel& model, const ChartPoint& p, const Vec2& v) {
  const double h = 1e-4;  // v is unit speed, so this is a Riemannian step
  Eigen::MatrixXd dR(1, 1);
  try {
    dR(0, 0) = (model.gaussian_curvature(p + h * v) - model.gaussian_curvature(p - h * v)) / (2.0 * h);
  } catch (const LabError&) {
    dR(0, 0) = std::numeric_limits<double>::quiet_NaN();
  }
  return dR;
}

// Custom charts get their curvature from finite differences already, so a
// further difference would be noise; the interpolant then estimates slopes.
void fill_rates(const MetricModel& model, OrbitSegment& orbit) {
  orbit.curvature_rate.clear();
  if (model.kind() == metric::ModelKind::CustomChart) return;
  orbit.curvature_rate.resize(orbit.size());
  for (std::size_t i = 0; i < orbit.size(); ++i) {
    orbit.curvature_rate[i] = curvature_rate(model, orbit.positions[i], orbit.velocities[i]);
    if (!orbit.curvature_rate[i].allFinite()) {
      orbit.curvature_rate.clear();
      return;
    }
  }
}

std::vector<double> dense_grid(double T, double dt) {
  std::vector<double> out;
  const double dir = T >= 0 ? 1.0 : -1.0;
  const long count = static_cast<long>(std::floor(std::abs(T) / dt * (1.0 + 1e-12)));
  for (long k = 1; k <= count; ++k) out.push_back(dir * k * dt);
  if (out.empty() || std::abs(out.back() - T) > 1e-9 * dt)
    out.push_back(T);
  else
    out.back() = T;
  return out;
}

}  // namespace

OrbitSegment integrate_geodesic(const MetricModel& model, const UnitTangentState& theta0, double T,
                                const IntegratorSettings& settings) {
  if (!(settings.tol > 0.0)) throw LabError(ErrorCode::InvalidArgument, "tolerance must be positive");
  if (!(settings.dense_dt > 0.0)) throw LabError(ErrorCode::InvalidArgument, "dense_dt must be positive");
  const double speed = inner(model, theta0.p, theta0.v, theta0.v);
  if (std::abs(speed - 1.0) > 1e-8)
    throw LabError(ErrorCode::InvalidArgument, "initial state is not a unit vector");

  ode::State y0(6);
  y0.segment<2>(0) = theta0.p;
  y0.segment<2>(2) = theta0.v;
  y0.segment<2>(4) = rotate_quarter(model, theta0.p, theta0.v);
  project(model, y0);

  OrbitSegment orbit;
  orbit.settings = settings;
  std::vector<Node> nodes;
  nodes.push_back({0.0, y0, true});

  if (T != 0.0) {
    auto rhs = [&model](double, const ode::State& y, ode::State& dy) {
      const Vec2 p = y.segment<2>(0);
      const Vec2 v = y.segment<2>(2);
      const Vec2 e = y.segment<2>(4);
      const metric::Christoffel G = model.christoffel(p);
      dy.segment<2>(0) = v;
      dy.segment<2>(2) = -G.contract(v, v);
      dy.segment<2>(4) = -G.contract(v, e);
    };
    ode::Options opt;
    opt.rtol = settings.tol;
    opt.h_max = settings.h_max;
    opt.abs_scale = [&model, tol = settings.tol](const ode::State& y, ode::State& atol) {
      const Vec2 p = y.segment<2>(0);
      const Vec2 ell = model.in_domain(p) ? model.unit_lengths(p) : Vec2(1.0, 1.0);
      for (int k = 0; k < 3; ++k) {
        atol[2 * k] = tol * ell.x();
        atol[2 * k + 1] = tol * ell.y();
      }
    };
    ode::DormandPrince45 stepper(rhs, opt);
    const std::vector<double> outs = dense_grid(T, settings.dense_dt);
    ode::DriveHooks hooks;
    hooks.land_on_outputs = true;
    std::size_t next_out = 0;
    hooks.on_accept = [&](ode::DormandPrince45& s) {
      ode::State y = s.y();
      const auto [sd, fd] = project(model, y);
      orbit.log.max_speed_drift = std::max(orbit.log.max_speed_drift, sd);
      orbit.log.max_frame_drift = std::max(orbit.log.max_frame_drift, fd);
      s.replace_state(y);
      const bool on_grid = next_out < outs.size() && s.t() == outs[next_out];
      if (on_grid) ++next_out;
      nodes.push_back({s.t(), y, on_grid});
    };
    try {
      ode::drive(stepper, 0.0, y0, T, outs, hooks);
    } catch (const LabError& e) {
      // underflow on a smooth chart means the metric degenerates ahead, i.e. a
      // boundary of the chart (the poles of the sphere fixture)
      if (e.code() != ErrorCode::ChartExit && e.code() != ErrorCode::StepSizeUnderflow) throw;
      orbit.chart_exit = true;
      orbit.exit_time = stepper.t();
    }
    orbit.log.accepted = stepper.stats().accepted;
    orbit.log.rejected = stepper.stats().rejected;
    orbit.log.rhs_evals = stepper.stats().rhs_evals;
  }

  // Merge dense and step nodes; step nodes that nearly coincide with a dense
  // node are dropped.
  std::stable_sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.t < b.t; });
  const double min_gap = 1e-3 * settings.dense_dt;
  std::vector<Node> merged;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& nd = nodes[i];
    if (!merged.empty() && nd.t - merged.back().t < min_gap) {
      if (nd.dense && !merged.back().dense) merged.back() = nd;
      continue;
    }
    merged.push_back(nd);
  }

  const std::size_t n = merged.size();
  orbit.times.resize(n);
  orbit.positions.resize(n);
  orbit.velocities.resize(n);
  orbit.frames.resize(n);
  orbit.curvature.resize(n);
  orbit.dense.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& nd = merged[i];
    orbit.times[i] = nd.t;
    orbit.positions[i] = nd.y.segment<2>(0);
    orbit.velocities[i] = nd.y.segment<2>(2);
    orbit.frames[i] = nd.y.segment<2>(4);
    orbit.dense[i] = nd.dense;
    if (nd.t == 0.0) orbit.base_index = i;
    const metric::Mat2 g = model.metric_tensor(orbit.positions[i]);
    const Vec2& v = orbit.velocities[i];
    const Vec2& e = orbit.frames[i];
    orbit.log.max_node_speed_error = std::max(orbit.log.max_node_speed_error, std::abs(v.dot(g * v) - 1.0));
    orbit.log.max_node_frame_error =
        std::max({orbit.log.max_node_frame_error, std::abs(e.dot(g * e) - 1.0), std::abs(e.dot(g * v))});
    orbit.curvature[i] = curvature_matrix(model, orbit.positions[i], v, e);
  }
  fill_rates(model, orbit);
  return orbit;
}

void transport_frame(const MetricModel& model, OrbitSegment& orbit) {
  const std::size_t n = orbit.size();
  if (n == 0) throw LabError(ErrorCode::GridMismatch, "empty orbit");
  if (orbit.positions.size() != n || orbit.velocities.size() != n)
    throw LabError(ErrorCode::GridMismatch, "orbit lacks states");

  std::vector<Vec2> accel(n);
  for (std::size_t i = 0; i < n; ++i)
    accel[i] = -model.christoffel(orbit.positions[i]).contract(orbit.velocities[i], orbit.velocities[i]);

  // cubic Hermite on [t_i, t_{i+1}] for position (slope v) and velocity (slope a)
  auto interval = [&](double t) {
    auto it = std::upper_bound(orbit.times.begin(), orbit.times.end(), t);
    std::size_t i = it == orbit.times.begin() ? 0 : static_cast<std::size_t>(it - orbit.times.begin()) - 1;
    return std::min(i, n - 2);
  };
  auto hermite = [](double s, double h, const Vec2& y0, const Vec2& d0, const Vec2& y1, const Vec2& d1) {
    const double s2 = s * s, s3 = s2 * s;
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 +
            (s3 - s2) * h * d1)
        .eval();
  };
  auto state_at = [&](double t) -> std::pair<Vec2, Vec2> {
    if (n == 1) return {orbit.positions[0], orbit.velocities[0]};
    const std::size_t i = interval(t);
    const double h = orbit.times[i + 1] - orbit.times[i];
    const double s = (t - orbit.times[i]) / h;
    return {hermite(s, h, orbit.positions[i], orbit.velocities[i], orbit.positions[i + 1],
                    orbit.velocities[i + 1]),
            hermite(s, h, orbit.velocities[i], accel[i], orbit.velocities[i + 1], accel[i + 1])};
  };

  orbit.frames.assign(n, Vec2::Zero());
  orbit.curvature.assign(n, Eigen::MatrixXd::Zero(1, 1));
  const std::size_t b = orbit.base_index;
  const UnitTangentState base = orbit.state(b);
  orbit.frames[b] = rotate_quarter(model, base.p, base.v);

  auto gs = [&](const Vec2& p, const Vec2& v, Vec2& e) {
    const metric::Mat2 g = model.metric_tensor(p);
    const Vec2 vn = v / std::sqrt(v.dot(g * v));
    const double drift = std::max(std::abs(e.dot(g * e) - 1.0), std::abs(e.dot(g * vn)));
    e -= e.dot(g * vn) * vn;
    e /= std::sqrt(e.dot(g * e));
    return drift;
  };

  auto rhs = [&](double t, const ode::State& y, ode::State& dy) {
    const auto [p, v] = state_at(t);
    dy = -model.christoffel(p).contract(v, Vec2(y));
  };
  const double tol = orbit.settings.tol;
  ode::Options opt;
  opt.rtol = tol;
  opt.h_max = orbit.settings.h_max;
  opt.abs_scale = [&](const ode::State&, ode::State& atol) { atol.setConstant(tol); };
  double max_drift = 0.0;

  for (int dir : {1, -1}) {
    std::vector<double> outs;
    std::vector<std::size_t> idx;
    if (dir > 0)
      for (std::size_t i = b + 1; i < n; ++i) outs.push_back(orbit.times[i]), idx.push_back(i);
    else
      for (std::size_t i = b; i-- > 0;) outs.push_back(orbit.times[i]), idx.push_back(i);
    if (outs.empty()) continue;
    ode::DormandPrince45 stepper(rhs, opt);
    std::size_t k = 0;
    ode::DriveHooks hooks;
    hooks.on_output = [&](double, const ode::State& y) {
      Vec2 e = y;
      const std::size_t i = idx[k++];
      max_drift = std::max(max_drift, gs(orbit.positions[i], orbit.velocities[i], e));
      orbit.frames[i] = e;
    };
    hooks.on_accept = [&](ode::DormandPrince45& s) {
      const auto [p, v] = state_at(s.t());
      Vec2 e = s.y();
      max_drift = std::max(max_drift, gs(p, v, e));
      s.replace_state(e);
    };
    ode::drive(stepper, orbit.times[b], orbit.frames[b], outs.back(), outs, hooks);
  }
  orbit.log.max_frame_drift = max_drift;
  orbit.log.max_node_frame_error = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const metric::Mat2 g = model.metric_tensor(orbit.positions[i]);
    const Vec2& v = orbit.velocities[i];
    const Vec2& e = orbit.frames[i];
    orbit.log.max_node_frame_error =
        std::max({orbit.log.max_node_frame_error, std::abs(e.dot(g * e) - 1.0), std::abs(e.dot(g * v))});
    orbit.curvature[i] = curvature_matrix(model, orbit.positions[i], v, e);
  }
  fill_rates(model, orbit);
}

double sasaki_norm(const SasakiVector& xi) {
  return std::sqrt(xi.horizontal.squaredNorm() + xi.vertical.squaredNorm());
}

double sasaki_distance_smallscale(const MetricModel& model, const UnitTangentState& a,
                                  const UnitTangentState& b, double max_separation) {
  const Vec2 delta = b.p - a.p;
  const ChartPoint mid = 0.5 * (a.p + b.p);
  if (!model.in_domain(mid))
    throw LabError(ErrorCode::SeparationTooLarge, "midpoint of the two base points leaves the chart");
  const double base = std::sqrt(delta.dot(model.metric_tensor(mid) * delta));
  const Vec2 transported = b.v + model.christoffel(mid).contract(delta, b.v);
  const Vec2 dv = transported - a.v;
  const double vertical = std::sqrt(dv.dot(model.metric_tensor(a.p) * dv));
  if (base > max_separation || vertical > max_separation) {
    std::ostringstream os;
    os << "separation (" << base << ", " << vertical << ") exceeds " << max_separation;
    throw LabError(ErrorCode::SeparationTooLarge, os.str());
  }
  return std::sqrt(base * base + vertical * vertical);
}

void write_orbit_csv(std::ostream& os, const OrbitSegment& orbit) {
  os << "# schema=orbit.v1\n";
  os << "t,x0,x1,v0,v1,e0,e1,R11\n";
  os.precision(17);
  for (std::size_t i = 0; i < orbit.size(); ++i) {
    os << orbit.times[i] << ',' << orbit.positions[i].x() << ',' << orbit.positions[i].y() << ','
       << orbit.velocities[i].x() << ',' << orbit.velocities[i].y() << ',';
    if (orbit.has_frame())
      os << orbit.frames[i].x() << ',' << orbit.frames[i].y() << ',';
    else
      os << ",,";
    if (orbit.has_curvature()) os << orbit.curvature[i](0, 0);
    os << '\n';
  }
}

}  // namespace lab::flow
