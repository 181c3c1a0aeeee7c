// One line per acceptance criterion; exit status 1 if any fails.

#include "lab/error.hpp"
#include "lab/rigidity_experiments.hpp"
#include "lab/spectra.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace ex = lab::experiments;
namespace sp = lab::spectra;
using lab::jacobi::Matrix;
using lab::metric::MetricModel;
using lab::metric::Vec2;

namespace {

struct Line {
  std::string id;
  bool pass;
  std::string detail;
};
std::vector<Line> lines;

void report(const std::string& id, bool pass, const std::string& detail) {
  lines.push_back({id, pass, detail});
  std::printf("%s %s  %s\n", id.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Green-bound bookkeeping over every point analysed below.
double worst_green_excess = -1e300;
int green_limits_seen = 0;
void track(const lab::jacobi::GreenLimitResult& g, double c) {
  if (!g.converged) return;
  ++green_limits_seen;
  worst_green_excess = std::max(worst_green_excess, g.norm - c);
}
void track_point(const sp::PointAnalysis& p, double c) {
  track(p.U_minus, c);
  if (p.has_unstable) track(p.U_plus, c);
}

// r(t) bookkeeping with lambda = lambda_hat.
bool r_all_bounded = true;
int r_series = 0;
int aux_series = 0, aux_exceed = 0;

sp::PointSettings settings(double T) {
  sp::PointSettings ps;
  ps.T = T;
  return ps;
}

std::vector<lab::flow::UnitTangentState> fan(const MetricModel& m, const Vec2& p, int n) {
  ex::GridSpec g;
  g.count = n;
  g.center = p;
  return ex::make_grid(m, g, 0);
}

void ac1_ac4_ac6() {
  bool ac1 = true, ac4 = true, ac6 = true;
  std::string d1, d4, d6;
  for (double c : {1.0, 2.0}) {
    const MetricModel m = MetricModel::hyperbolic(c);
    const auto t0 = std::chrono::steady_clock::now();
    const auto ce = sp::contraction_constant(m, fan(m, {0, 1}, 20), c, settings(50.0), 1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double chi_u_err = 0.0, det_err = 0.0;
    for (const auto& p : ce.points) {
      chi_u_err = std::max(chi_u_err, std::abs(p.chi_u.value - c));
      det_err = std::max(det_err, std::abs(p.det_trace.value - c));
      det_err = std::max(det_err, std::abs(p.det_direct.estimate.value - c));
      track_point(p, c);
      const auto r = sp::r_diagnostic(p.stable, p.unstable, ce.lambda_hat, c);
      ++r_series;
      r_all_bounded = r_all_bounded && r.bounded;
    }
    const double lam_err = std::abs(ce.lambda_hat - std::exp(-c));
    const bool ok = ce.points.size() == 20 && lam_err <= 1e-3 && chi_u_err <= 1e-3 && secs <= 60.0;
    ac1 = ac1 && ok;
    d1 += fmt("c=%g: |lambda-e^-c|=%.2e max|chi_u-c|=%.2e %.1fs; ", c, lam_err, chi_u_err, secs);
    ac4 = ac4 && det_err <= 1e-3;
    d4 += fmt("c=%g: max|det-c|=%.2e; ", c, det_err);
    // sub-critical lambda must break the bound before t = 30
    const auto& p = ce.points[3];
    const auto r = sp::r_diagnostic(p.stable, p.unstable, std::exp(-1.1 * c), c);
    const bool broke = !r.bounded && r.first_exceed_time > 0.0 && r.first_exceed_time < 30.0;
    ac6 = ac6 && broke;
    d6 += fmt("c=%g: r exceeds at t=%.2f with e^{-1.1c}; ", c, r.first_exceed_time);
  }
  report("AC1", ac1, d1);
  report("AC4", ac4, d4);
  lines.push_back({"AC6-sub", ac6, d6});
}

void ac2() {
  ex::ExperimentSpec s;
  s.name = "warped_strict";
  s.kind = ex::ExperimentKind::Inequality;
  s.model = "warped:profile=cosh_mix,b=0.25";
  s.threads = 4;
  const auto rep = ex::run_experiment(s);
  const auto j = rep.to_json();
  if (!j.contains("results")) {
    report("AC2", false, "experiment failed: " + (rep.logs.empty() ? std::string() : rep.logs[0]));
    return;
  }
  const auto& r = j["results"];
  const double c = r["c_hat"], lam = r["lambda_hat"], margin = r["margin"];
  const bool ok = lam >= std::exp(-c) - 1e-3 && margin > 0.0 && rep.verdict == ex::Verdict::InequalityHolds;
  report("AC2", ok, fmt("c_hat=%.6f lambda_hat=%.6f e^-c=%.6f margin=%.6f", c, lam, std::exp(-c), margin) +
                        " verdict=" + ex::to_string(rep.verdict));
  // the experiment applies its own Green-bound and r checks
  if (!r["green"]["holds"].get<bool>()) worst_green_excess = std::max(worst_green_excess, 1.0);
  ++green_limits_seen;
  ++r_series;
  r_all_bounded = r_all_bounded && r["r_diagnostic"]["bounded"].get<bool>();
}

void ac3() {
  const std::vector<std::string> models = {"hyperbolic:c=1", "hyperbolic:c=2", "conformal:c=1,eps=0.2",
                                           "warped:profile=cosh_mix,b=0.25", "warped:profile=cosh,a=2",
                                           "custom:name=halfplane_fd,c=1"};
  bool ok = true;
  std::string detail;
  for (const auto& spec : models) {
    const MetricModel m = MetricModel::parse(spec);
    ex::GridSpec g;
    g.mode = ex::GridMode::Random;
    g.count = 10;
    const auto grid = ex::make_grid(m, g, 17);
    ex::ExperimentSpec es;
    const auto est = ex::estimate_curvature(m, grid, 75.0, es);
    double worst = 0.0;
    int done = 0;
    std::vector<sp::PointAnalysis> pts;
    for (const auto& th : grid) {
      try {
        const auto p = sp::analyze_point(m, th, est.c, settings(50.0));
        worst = std::max(worst, std::abs(p.det_direct.estimate.value - p.det_trace.value) / std::abs(p.det_trace.value));
        track_point(p, est.c);
        pts.push_back(p);
        ++done;
      } catch (const lab::LabError& e) {
        detail += spec + ": " + e.what() + "; ";
      }
    }
    // lambda_hat of this random grid
    double lam = 0.0;
    for (const auto& p : pts) lam = std::max(lam, std::exp(p.chi_s.value));
    for (const auto& p : pts) {
      // informational: a grid maximum of fitted rates is not a uniform constant
      const auto r = sp::r_diagnostic(p.stable, p.unstable, lam, est.c);
      ++aux_series;
      if (!r.bounded) ++aux_exceed;
    }
    ok = ok && done == 10 && worst <= 1e-4;
    detail += spec + fmt(" max rel diff %.2e; ", worst);
  }
  report("AC3", ok, detail);
}

void ac5() {
  // gap decay on constant-curvature models
  bool decay = true;
  double worst_ratio = 1e300;
  for (const char* spec : {"hyperbolic:c=1", "hyperbolic:c=2", "warped:profile=cosh,a=2"}) {
    const MetricModel m = MetricModel::parse(spec);
    const double c = m.base_c() > 0 ? m.base_c() : 2.0;
    const Vec2 p = m.base_c() > 0 ? Vec2(0.2, 1.3) : Vec2(0.3, 0.0);
    for (const auto& th : fan(m, p, 5)) {
      lab::jacobi::GreenLimitSettings gs;
      gs.tol = 1e-13;  // force several doublings
      gs.T_max = 40.0 / c;
      const auto u = lab::jacobi::unstable_limit(m, th, c, gs, {1e-11, 0.01, 0.5});
      track(u, c);
      for (std::size_t k = 2; k < u.history.size(); ++k) {
        if (u.history[k].gap < 1e-13) continue;  // at the noise floor
        const double ratio = u.history[k - 1].gap / u.history[k].gap;
        worst_ratio = std::min(worst_ratio, ratio);
        decay = decay && ratio >= 100.0;
      }
    }
  }
  const bool bound = green_limits_seen > 0 && worst_green_excess <= 1e-6;
  report("AC5", bound && decay,
         fmt("%g converged limits, max(|U|-c)=%.2e; min gap ratio per doubling %.3g", green_limits_seen,
             worst_green_excess, worst_ratio));
}

void ac6() {
  bool sub = false;
  std::string d;
  for (const auto& l : lines)
    if (l.id == "AC6-sub") {
      sub = l.pass;
      d = l.detail;
    }
  report("AC6", sub && r_all_bounded, fmt("%g experiment series bounded with lambda_hat: ", r_series) +
                                          (r_all_bounded ? "yes; " : "NO; ") + d +
                                          fmt("random-grid series over the bound (not gated): %g of %g",
                                              double(aux_exceed), double(aux_series)));
}

void ac7() {
  const MetricModel sphere = MetricModel::parse("warped:profile=sin");
  const Vec2 eq(M_PI / 2, 0.0);
  const auto o = lab::flow::integrate_geodesic(sphere, {eq, {0.0, 1.0}}, 4.0);
  const auto cp = lab::jacobi::detect_conjugate_points(o);
  const bool sphere_ok = !cp.empty() && std::abs(cp[0] - M_PI) <= 1e-3;
  int nonempty = 0, orbits = 0;
  for (const char* spec : {"hyperbolic:c=1", "hyperbolic:c=2", "conformal:c=1,eps=0.2", "warped:profile=cosh_mix,b=0.25",
                           "warped:profile=cosh,a=2"}) {
    const MetricModel m = MetricModel::parse(spec);
    for (const auto& th : fan(m, ex::default_center(m), 8)) {
      const auto orbit = lab::flow::integrate_geodesic(m, th, 50.0);
      nonempty += !lab::jacobi::detect_conjugate_points(orbit).empty();
      ++orbits;
    }
  }
  report("AC7", sphere_ok && nonempty == 0,
         fmt("sphere t*=%.9f (error %.2e); negatively curved orbits with conjugate points: %g of %g",
             cp.empty() ? 0.0 : cp[0], cp.empty() ? 1.0 : std::abs(cp[0] - M_PI), nonempty, orbits));
}

void ac8() {
  ex::ExperimentSpec s;
  s.name = "distance_check";
  s.kind = ex::ExperimentKind::DistanceDerivative;
  const auto rep = ex::run_experiment(s);
  const auto j = rep.to_json();
  bool ok = rep.verdict == ex::Verdict::EqualityRigidityConsistent && j["curves"].size() == 3;
  std::string d;
  for (const auto& c : j["curves"]) {
    const double last = c["errors"].back();
    double min_order = 1e300;
    for (const auto& o : c["observed_orders"]) min_order = std::min(min_order, o.get<double>());
    ok = ok && c["pass"].get<bool>() && last <= 1e-3 && min_order >= 1.0;
    d += c["curve"].get<std::string>() + fmt(": ratio %.9f -> %.6f, order %.2f, final error %.1e; ",
                                             c["ratios"].back().get<double>(), c["expected_norm"].get<double>(),
                                             min_order, last);
  }
  report("AC8", ok, d);
}

void ac9() {
  ex::ExperimentSpec s;
  s.name = "leaf";
  s.kind = ex::ExperimentKind::StableLeaf;
  const auto rep = ex::run_experiment(s);
  const auto j = rep.to_json();
  bool ok = rep.verdict == ex::Verdict::EqualityRigidityConsistent && j["points"].size() == 6;
  double worst = 0.0;
  for (const auto& p : j["points"]) worst = std::max(worst, std::abs(p["chi_u"].get<double>() - 1.0));
  ok = ok && worst <= 1e-3;
  report("AC9", ok, fmt("5 companions, max|chi_u - 1| = %.2e, max pair difference %.2e", worst,
                        j["max_pair_difference"].get<double>()));
}

void ac10() {
  const double tol = 1e-10;
  double speed = 0.0, frame = 0.0;
  for (const char* spec : {"hyperbolic:c=1", "hyperbolic:c=2", "conformal:c=1,eps=0.2", "warped:profile=cosh_mix,b=0.25"}) {
    const MetricModel m = MetricModel::parse(spec);
    for (const auto& th : fan(m, ex::default_center(m), 6)) {
      const auto o = lab::flow::integrate_geodesic(m, th, 50.0, {tol, 0.01, 0.5});
      for (std::size_t i = 0; i < o.size(); ++i) {
        const Vec2& p = o.positions[i];
        speed = std::max(speed, std::abs(lab::flow::inner(m, p, o.velocities[i], o.velocities[i]) - 1.0));
        frame = std::max(frame, std::abs(lab::flow::inner(m, p, o.frames[i], o.frames[i]) - 1.0));
        frame = std::max(frame, std::abs(lab::flow::inner(m, p, o.frames[i], o.velocities[i])));
      }
      speed = std::max(speed, o.log.max_speed_drift);
      frame = std::max(frame, o.log.max_frame_drift);
    }
  }
  // reversibility: vertical geodesic over T = 50 and back
  const MetricModel h = MetricModel::hyperbolic(1);
  const lab::flow::UnitTangentState th{{0, 1}, {0, 1}};
  const auto f = lab::flow::integrate_geodesic(h, th, 50.0, {tol, 0.01, 0.5});
  const auto b = lab::flow::integrate_geodesic(h, {f.positions.back(), -f.velocities.back()}, 50.0, {tol, 0.01, 0.5});
  const double rev = std::max(std::abs(b.positions.back().y() - 1.0) + std::abs(b.positions.back().x()),
                              (b.velocities.back() + th.v).norm());
  // norm-determinant sandwich
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  int held = 0;
  for (int n = 0; n < 1000; ++n) {
    const int m = 1 + n % 3;
    Matrix A(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) A(i, j) = nd(gen);
    held += sp::operator_norm_det_check(A).holds;
  }
  const bool ok = speed <= 1e-9 && frame <= 1e-9 && rev <= 100 * tol && held == 1000;
  report("AC10", ok, fmt("speed drift %.2e, frame drift %.2e, reversibility %.2e, norm-det %g/1000", speed, frame,
                         rev, held));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  ac1_ac4_ac6();
  ac2();
  ac3();
  ac5();
  ac6();
  ac7();
  ac8();
  ac9();
  ac10();
  int failed = 0, total = 0;
  for (const auto& l : lines) {
    if (l.id == "AC6-sub") continue;
    ++total;
    failed += !l.pass;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("acceptance: %d/%d passed in %.1fs\n", total - failed, total, secs);
  return failed == 0 ? 0 : 1;
}
