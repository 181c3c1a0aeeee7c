#include "lab/rigidity_experiments.hpp"

#include "lab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace lab::experiments {

using json = nlohmann::ordered_json;
using flow::UnitTangentState;

const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Inequality: return "inequality";
    case ExperimentKind::RigidityProbe: return "rigidity_probe";
    case ExperimentKind::ExponentRigidity: return "exponent_rigidity";
    case ExperimentKind::DistanceDerivative: return "distance_derivative";
    case ExperimentKind::StableLeaf: return "stable_leaf";
  }
  return "unknown";
}

ExperimentKind parse_kind(const std::string& s) {
  for (ExperimentKind k : {ExperimentKind::Inequality, ExperimentKind::RigidityProbe, ExperimentKind::ExponentRigidity,
                           ExperimentKind::DistanceDerivative, ExperimentKind::StableLeaf})
    if (s == to_string(k)) return k;
  throw LabError(ErrorCode::ValidationError, "unknown experiment kind '" + s + "'");
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::InequalityHolds: return "InequalityHolds";
    case Verdict::EqualityRigidityConsistent: return "EqualityRigidityConsistent";
    case Verdict::Violation: return "Violation";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

namespace {

json box_json(const SamplingBox& b) { return json::array({b.lo.x(), b.lo.y(), b.hi.x(), b.hi.y()}); }

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_short(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

json spec_json(const ExperimentSpec& s, const MetricModel* model) {
  json j;
  j["name"] = s.name;
  j["kind"] = to_string(s.kind);
  j["model"] = model ? model->spec_string() : s.model;
  json g;
  g["mode"] = s.grid.mode == GridMode::Fan ? "fan" : "random";
  g["count"] = s.grid.count;
  if (model) {
    const Vec2 c = s.grid.center.value_or(default_center(*model));
    g["center"] = json::array({c.x(), c.y()});
    g["box"] = box_json(s.grid.box.value_or(default_curvature_box(*model)));
  }
  j["grid"] = g;
  j["T"] = s.T;
  j["seed"] = s.seed;
  json tol;
  tol["verdict"] = s.tolerance;
  tol["integrator"] = s.integrator_tol;
  tol["green_gap"] = s.green_tol;
  tol["green_solver"] = 0.1 * s.integrator_tol;
  tol["green_bound_slack"] = 1e-6;
  tol["fit_residual_max"] = 1e-3;
  j["tolerances"] = tol;
  json integ;
  integ["method"] = "dormand_prince_5(4)";
  integ["dense_dt"] = s.dense_dt;
  integ["h_max"] = 0.5;
  integ["stable_margin"] = 25.0;
  integ["fit_window"] = json::array({0.2 * s.T, s.T});
  integ["min_window"] = 5.0;
  j["integrator"] = integ;
  j["curvature_grid"] = s.curvature_grid;
  if (model) j["curvature_box"] = box_json(s.curvature_box.value_or(default_curvature_box(*model)));
  if (s.kind == ExperimentKind::RigidityProbe) {
    j["sweep"] = s.sweep;
    j["variance_threshold"] = s.variance_threshold;
  }
  if (s.kind == ExperimentKind::DistanceDerivative) {
    j["curves"] = s.curves;
    j["steps"] = s.steps;
  }
  if (s.kind == ExperimentKind::StableLeaf) {
    j["companions"] = s.companions;
    j["companion_spacing"] = s.companion_spacing;
    j["companion_leaf"] = s.companion_leaf;
  }
  j["threads"] = s.threads;
  return j;
}

spectra::PointSettings point_settings(const ExperimentSpec& s, bool unstable) {
  spectra::PointSettings ps;
  ps.T = s.T;
  ps.flow = {s.integrator_tol, s.dense_dt, 0.5};
  ps.green.tol = s.green_tol;
  ps.green.solver = {0.1 * s.integrator_tol, 0.5};
  ps.growth.tol = s.integrator_tol;
  ps.unstable = unstable;
  return ps;
}

const std::vector<std::string> kStandardCaveats = {
    "curvature bounds are sampled on a finite grid and along the computed orbits, not proved",
    "finite volume is a modeling assumption; every quantity is computed along individual orbits of a simply "
    "connected chart",
};

const char* kGridCaveat =
    "lambda_hat is the maximum fitted stable rate over a finite theta-grid, so equality is certified only up to "
    "the stated tolerance";

ExperimentReport base_report(const ExperimentSpec& spec, const MetricModel* model) {
  ExperimentReport r;
  r.spec = spec;
  if (model) r.model_tag = model->tag();
  r.caveats = kStandardCaveats;
  r.body["spec"] = spec_json(spec, model);
  return r;
}

json bounds_json(const CurvatureEstimate& e) {
  json j;
  j["label"] = "sampled";
  j["box"] = box_json(e.box.domain);
  j["grid"] = e.box.grid;
  j["sample_count"] = e.box.sample_count;
  j["box_inf_K"] = e.box.inf_K;
  j["box_sup_K"] = e.box.sup_K;
  j["box_mean_K"] = e.box.mean_K;
  j["box_variance_K"] = e.box.variance_K;
  j["orbit_inf_K"] = e.orbit_inf_K;
  j["orbit_sup_K"] = e.orbit_sup_K;
  j["c_hat"] = e.c;
  j["not_negatively_curved"] = e.not_negatively_curved;
  return j;
}

// Pooled population variance of K over all orbit samples of the grid.
double pooled_variance(const std::vector<spectra::PointAnalysis>& pts) {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  for (const auto& p : pts) {
    const double nb = static_cast<double>(p.orbit_K_samples);
    if (nb == 0) continue;
    const double delta = p.orbit_mean_K - mean;
    const double tot = n + nb;
    mean += delta * nb / tot;
    m2 += p.orbit_var_K * nb + delta * delta * n * nb / tot;
    n = tot;
  }
  return n > 0 ? m2 / n : 0.0;
}

std::string points_csv(const spectra::ContractionEstimate& ce, double lambda, double c) {
  std::ostringstream os;
  os << "# schema=points.v1\n";
  os << "index,x0,x1,v0,v1,chi_s,chi_s_residual,chi_u,chi_u_residual,det_trace,det_direct,U_plus,U_minus,"
        "T_back_plus,gap_plus,T_back_minus,gap_minus,birkhoff,orbit_var_K,r_max,r_bound\n";
  for (std::size_t i = 0; i < ce.points.size(); ++i) {
    const auto& p = ce.points[i];
    os << i << ',' << fmt(p.theta.p.x()) << ',' << fmt(p.theta.p.y()) << ',' << fmt(p.theta.v.x()) << ','
       << fmt(p.theta.v.y()) << ',' << fmt(p.chi_s.value) << ',' << fmt(p.chi_s.residual) << ',';
    if (p.has_unstable) {
      const spectra::RSeries r = spectra::r_diagnostic(p.stable, p.unstable, lambda, c);
      os << fmt(p.chi_u.value) << ',' << fmt(p.chi_u.residual) << ',' << fmt(p.det_trace.value) << ','
         << fmt(p.det_direct.estimate.value) << ',' << fmt(p.U_plus.U_plus(0, 0)) << ','
         << fmt(p.U_minus.U_plus(0, 0)) << ',' << fmt(p.U_plus.T_back_used) << ',' << fmt(p.U_plus.cauchy_gap)
         << ',' << fmt(p.U_minus.T_back_used) << ',' << fmt(p.U_minus.cauchy_gap) << ',' << fmt(p.birkhoff) << ','
         << fmt(p.orbit_var_K) << ',' << fmt(r.max_r) << ',' << fmt(r.bound);
    } else {
      os << ",,,,," << fmt(p.U_minus.U_plus(0, 0)) << ",,," << fmt(p.U_minus.T_back_used) << ','
         << fmt(p.U_minus.cauchy_gap) << ',' << fmt(p.birkhoff) << ',' << fmt(p.orbit_var_K) << ",,";
    }
    os << '\n';
  }
  return os.str();
}

double hyperbolic_distance(double c, const Vec2& a, const Vec2& b) {
  return 2.0 * std::asinh((a - b).norm() / (2.0 * std::sqrt(a.y() * b.y()))) / c;
}

}  // namespace

json ExperimentReport::to_json() const {
  json j;
  j["schema"] = "report.v1";
  j["experiment"] = spec.name;
  j["kind"] = to_string(spec.kind);
  j["model"] = body.contains("spec") ? body["spec"]["model"] : json(spec.model);
  j["model_tag"] = model_tag;
  j["seed"] = spec.seed;
  j["verdict"] = to_string(verdict);
  j["equality"] = equality;
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  j["caveats"] = caveats;
  j["logs"] = logs;
  return j;
}

std::string ExperimentReport::file_stem() const {
  return spec.name + "-" + (model_tag.empty() ? std::string("invalid") : model_tag) + "-" + std::to_string(spec.seed);
}

Vec2 default_center(const MetricModel& model) {
  switch (model.kind()) {
    case metric::ModelKind::Hyperbolic: return {0.0, 1.0};
    case metric::ModelKind::ConformalPerturbed: {
      const metric::BumpSpec* b = model.bump();
      return b->center + Vec2(0.2 * b->radius, 0.0);
    }
    case metric::ModelKind::WarpedProduct: {
      const metric::WarpProfile* w = model.profile();
      if (w->name == "sin") return {M_PI / 2, 0.0};
      if (w->name == "sinh") return {1.0, 0.0};
      return {0.0, 0.0};
    }
    case metric::ModelKind::CustomChart:
      return model.in_domain({0.0, 1.0}) && !model.in_domain({0.0, 0.0}) ? Vec2(0.0, 1.0) : Vec2(0.0, 0.0);
  }
  return {0.0, 1.0};
}

SamplingBox default_curvature_box(const MetricModel& model) {
  switch (model.kind()) {
    case metric::ModelKind::Hyperbolic: return {{-1.0, 0.5}, {1.0, 2.0}};
    case metric::ModelKind::ConformalPerturbed: {
      const metric::BumpSpec* b = model.bump();
      const double r = b->radius;
      const double y_lo = std::max(b->center.y() - 1.5 * r, 0.5 * (b->center.y() - r));
      return {{b->center.x() - 1.5 * r, y_lo}, {b->center.x() + 1.5 * r, b->center.y() + 1.5 * r}};
    }
    case metric::ModelKind::WarpedProduct: {
      const metric::WarpProfile* w = model.profile();
      if (w->name == "sin") return {{0.1, 0.0}, {M_PI - 0.1, 1.0}};
      if (w->name == "sinh") return {{0.1, 0.0}, {3.0, 1.0}};
      return {{0.0, 0.0}, {3.0, 1.0}};
    }
    case metric::ModelKind::CustomChart:
      if (model.in_domain({0.0, 1.0}) && !model.in_domain({0.0, 0.0})) return {{-1.0, 0.5}, {1.0, 2.0}};
      if (!model.in_domain({1.0, 0.0})) return {{-0.5, -0.5}, {0.5, 0.5}};
      return {{-1.0, -1.0}, {1.0, 1.0}};
  }
  return {{-1.0, 0.5}, {1.0, 2.0}};
}

std::vector<UnitTangentState> make_grid(const MetricModel& model, const GridSpec& grid, std::uint64_t seed) {
  if (grid.count < 1) throw LabError(ErrorCode::InvalidArgument, "grid count must be at least 1");
  std::vector<UnitTangentState> out;
  if (grid.mode == GridMode::Fan) {
    const Vec2 p = grid.center.value_or(default_center(model));
    if (!model.in_domain(p)) throw LabError(ErrorCode::PointOutsideChart, "grid center outside the chart");
    for (int k = 0; k < grid.count; ++k) {
      // quarter turns are exact so axis-aligned states stay exact
      const int num = 4 * k;
      double angle = 2.0 * M_PI * k / grid.count;
      if (num % grid.count == 0) angle = 0.5 * M_PI * (num / grid.count);
      out.push_back(flow::unit_state(model, p, angle));
    }
    return out;
  }
  const SamplingBox box = grid.box.value_or(default_curvature_box(model));
  std::mt19937_64 gen(seed);
  auto uniform = [&gen]() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  for (int k = 0; k < grid.count; ++k) {
    const double x = box.lo.x() + (box.hi.x() - box.lo.x()) * uniform();
    const double y = box.lo.y() + (box.hi.y() - box.lo.y()) * uniform();
    const double angle = 2.0 * M_PI * uniform();
    if (!model.in_domain({x, y})) throw LabError(ErrorCode::PointOutsideChart, "random grid box leaves the chart");
    out.push_back(flow::unit_state(model, {x, y}, angle));
  }
  return out;
}

CurvatureEstimate estimate_curvature(const MetricModel& model, const std::vector<UnitTangentState>& grid,
                                     double horizon, const ExperimentSpec& spec) {
  CurvatureEstimate e;
  e.box = metric::curvature_bounds(model, spec.curvature_box.value_or(default_curvature_box(model)),
                                   spec.curvature_grid);
  e.orbit_inf_K = e.box.inf_K;
  e.orbit_sup_K = e.box.sup_K;
  if (e.box.not_negatively_curved) {
    e.not_negatively_curved = true;
    return e;
  }
  bool first = true;
  for (const UnitTangentState& th : grid) {
    for (double dir : {1.0, -1.0}) {
      const flow::OrbitSegment o = flow::integrate_geodesic(model, th, dir * horizon, {spec.integrator_tol, 0.05, 0.5});
      for (std::size_t i = 0; i < o.size(); ++i) {
        const double k = model.gaussian_curvature(o.positions[i]);
        if (first) {
          e.orbit_inf_K = e.orbit_sup_K = k;
          first = false;
        }
        e.orbit_inf_K = std::min(e.orbit_inf_K, k);
        e.orbit_sup_K = std::max(e.orbit_sup_K, k);
      }
    }
  }
  const double inf_K = std::min(e.box.inf_K, e.orbit_inf_K);
  e.not_negatively_curved = std::max(e.box.sup_K, e.orbit_sup_K) >= 0.0;
  e.c = inf_K < 0.0 ? std::sqrt(-inf_K) : 0.0;
  return e;
}

namespace {

struct InequalitySummary {
  double lambda_hat = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  bool violation = false;
  bool equality = false;
  bool strict = false;
  bool green_ok = true;
  bool fits_ok = true;
  bool r_ok = true;
  json j;
};

InequalitySummary summarize(const spectra::ContractionEstimate& ce, double c, double tol, bool unstable) {
  InequalitySummary s;
  s.lambda_hat = ce.lambda_hat;
  s.bound = std::exp(-c);
  s.margin = ce.lambda_hat - s.bound;
  s.violation = s.margin < -tol;
  s.equality = std::abs(s.margin) <= tol;
  s.strict = s.margin > 10.0 * tol;
  double max_u_plus = 0.0, max_u_minus = 0.0, max_gap = 0.0, max_T = 0.0, max_res = 0.0;
  double chi_u_min = INFINITY, chi_u_max = -INFINITY, chi_s_min = INFINITY;
  double det_rel = 0.0, r_ratio = 0.0, birk = 0.0, mismatch = 0.0;
  for (const auto& p : ce.points) {
    max_u_minus = std::max(max_u_minus, p.U_minus.norm);
    max_gap = std::max(max_gap, p.U_minus.cauchy_gap);
    max_T = std::max(max_T, p.U_minus.T_back_used);
    s.green_ok = s.green_ok && p.U_minus.within_green_bound;
    max_res = std::max(max_res, p.chi_s.residual);
    chi_s_min = std::min(chi_s_min, p.chi_s.value);
    mismatch = std::max(mismatch, p.stable.anchor_mismatch);
    birk += p.birkhoff / static_cast<double>(ce.points.size());
    if (!unstable) continue;
    max_u_plus = std::max(max_u_plus, p.U_plus.norm);
    max_gap = std::max(max_gap, p.U_plus.cauchy_gap);
    max_T = std::max(max_T, p.U_plus.T_back_used);
    s.green_ok = s.green_ok && p.U_plus.within_green_bound;
    max_res = std::max(max_res, p.chi_u.residual);
    chi_u_min = std::min(chi_u_min, p.chi_u.value);
    chi_u_max = std::max(chi_u_max, p.chi_u.value);
    det_rel = std::max(det_rel, std::abs(p.det_direct.estimate.value - p.det_trace.value) / std::abs(p.det_trace.value));
    const spectra::RSeries r = spectra::r_diagnostic(p.stable, p.unstable, ce.lambda_hat, c);
    r_ratio = std::max(r_ratio, r.max_r / r.bound);
    s.r_ok = s.r_ok && r.bounded;
  }
  s.fits_ok = max_res <= 1e-3;
  json& j = s.j;
  j["c_hat"] = c;
  j["lambda_hat"] = s.lambda_hat;
  j["exp_minus_c"] = s.bound;
  j["margin"] = s.margin;
  j["equality"] = s.equality;
  j["strict"] = s.strict;
  j["max_stable_rate"] = ce.max_rate;
  j["min_stable_rate"] = chi_s_min;
  const auto& worst = ce.points[ce.worst_index];
  j["worst_point"] = {{"index", ce.worst_index},
                      {"p", json::array({worst.theta.p.x(), worst.theta.p.y()})},
                      {"v", json::array({worst.theta.v.x(), worst.theta.v.y()})}};
  j["grid_size"] = ce.grid_size;
  j["points_used"] = ce.points.size();
  j["skipped"] = ce.skipped;
  j["max_fit_residual"] = max_res;
  j["fits_accepted"] = s.fits_ok;
  j["max_stable_anchor_mismatch"] = mismatch;
  json g;
  g["max_norm_U_plus"] = max_u_plus;
  g["max_norm_U_minus"] = max_u_minus;
  g["max_cauchy_gap"] = max_gap;
  g["max_T_back"] = max_T;
  g["bound"] = c;
  g["holds"] = s.green_ok;
  j["green"] = g;
  if (unstable) {
    j["chi_u_min"] = chi_u_min;
    j["chi_u_max"] = chi_u_max;
    j["det_estimator_max_rel_diff"] = det_rel;
    j["r_diagnostic"] = {{"lambda", s.lambda_hat}, {"max_ratio_to_bound", r_ratio}, {"bounded", s.r_ok}};
  }
  j["birkhoff_mean"] = birk;
  return s;
}

}  // namespace

ExperimentReport run_inequality_experiment(const ExperimentSpec& spec) {
  const MetricModel model = MetricModel::parse(spec.model);
  ExperimentReport rep = base_report(spec, &model);
  rep.caveats.push_back(kGridCaveat);
  const auto grid = make_grid(model, spec.grid, spec.seed);
  const CurvatureEstimate est = estimate_curvature(model, grid, spec.T + 25.0, spec);
  rep.body["curvature_bounds"] = bounds_json(est);
  if (est.not_negatively_curved) {
    rep.logs.push_back("NotNegativelyCurved: sampled sup K = " + fmt_short(std::max(est.box.sup_K, est.orbit_sup_K)));
    return rep;
  }
  const spectra::ContractionEstimate ce =
      spectra::contraction_constant(model, grid, est.c, point_settings(spec, true), spec.threads);
  const InequalitySummary s = summarize(ce, est.c, spec.tolerance, true);
  rep.body["results"] = s.j;
  rep.csv = points_csv(ce, ce.lambda_hat, est.c);
  for (const auto& k : ce.skipped) rep.logs.push_back("skipped " + k);
  rep.equality = s.equality;
  if (s.violation) {
    rep.verdict = Verdict::Violation;
    rep.logs.push_back("lambda_hat below exp(-c) by more than the tolerance");
  } else if (!s.green_ok) {
    rep.logs.push_back("a converged Green limit exceeds the sampled c; curvature sampling missed part of the orbits");
  } else if (!s.fits_ok) {
    rep.logs.push_back("fit residual above 1e-3");
  } else {
    rep.verdict = Verdict::InequalityHolds;
  }
  return rep;
}

ExperimentReport run_rigidity_probe(const ExperimentSpec& spec) {
  const MetricModel base = MetricModel::parse(spec.model);
  ExperimentReport rep = base_report(spec, &base);
  rep.caveats.push_back(kGridCaveat);
  rep.caveats.push_back("the monotone trend of d1 across the sweep is observed, not proved");
  const metric::CurvatureBounds guard =
      metric::curvature_bounds(base, spec.curvature_box.value_or(default_curvature_box(base)), spec.curvature_grid);
  if (guard.not_negatively_curved) {
    rep.body["guard"] = {{"sup_K", guard.sup_K}, {"rejected", true}};
    rep.logs.push_back("NotNegativelyCurved: rejected up front, sampled sup K = " + fmt_short(guard.sup_K));
    return rep;
  }
  std::vector<std::pair<double, MetricModel>> family;
  const bool sweepable =
      base.kind() == metric::ModelKind::ConformalPerturbed || base.kind() == metric::ModelKind::Hyperbolic;
  if (sweepable) {
    const metric::BumpSpec bump = base.bump() ? *base.bump() : metric::BumpSpec{};
    for (double eps : spec.sweep) family.emplace_back(eps, MetricModel::conformal_perturbed(base.base_c(), bump, eps));
  } else {
    family.emplace_back(0.0, base);
    rep.caveats.push_back("model has no perturbation parameter; the family is the single model");
  }
  const double tol = spec.tolerance;
  json members = json::array();
  std::ostringstream csv;
  csv << "# schema=rigidity_probe.v1\n";
  csv << "epsilon,model,c_hat,lambda_hat,d1,d2,rigidity_defect,check\n";
  bool all_ok = true, violation = false, monotone = true;
  double prev_d1 = -1.0;
  for (const auto& [eps, model] : family) {
    ExperimentSpec sub = spec;
    sub.grid.center = spec.grid.center.value_or(default_center(base));
    const auto grid = make_grid(model, sub.grid, spec.seed);
    const CurvatureEstimate est = estimate_curvature(model, grid, spec.T + 25.0, sub);
    json m;
    m["epsilon"] = eps;
    m["model"] = model.spec_string();
    m["curvature_bounds"] = bounds_json(est);
    if (est.not_negatively_curved) {
      m["check"] = "rejected: not negatively curved";
      all_ok = false;
      rep.logs.push_back("member eps=" + fmt_short(eps) + " is not negatively curved");
      members.push_back(m);
      continue;
    }
    const spectra::ContractionEstimate ce =
        spectra::contraction_constant(model, grid, est.c, point_settings(spec, false), spec.threads);
    const InequalitySummary s = summarize(ce, est.c, tol, false);
    const double d1 = std::abs(ce.lambda_hat - std::exp(-est.c));
    const double d2 = pooled_variance(ce.points);
    std::string check = "none";
    if (d2 == 0.0) {
      check = d1 <= tol ? "d2=0 and d1<=tol" : "FAILED d2=0 but d1>tol";
      all_ok = all_ok && d1 <= tol;
    } else if (d2 > spec.variance_threshold) {
      check = d1 > 10.0 * tol ? "d2>threshold and d1>10*tol" : "FAILED d2>threshold but d1<=10*tol";
      all_ok = all_ok && d1 > 10.0 * tol;
    }
    violation = violation || s.violation;
    all_ok = all_ok && s.green_ok && s.fits_ok;
    if (prev_d1 >= 0.0 && d1 < prev_d1) monotone = false;
    prev_d1 = d1;
    m["lambda_hat"] = ce.lambda_hat;
    m["c_hat"] = est.c;
    m["d1"] = d1;
    m["d2"] = d2;
    m["rigidity_defect"] = std::max(d1, d2);
    m["check"] = check;
    m["estimators"] = s.j;
    members.push_back(m);
    csv << fmt(eps) << ',' << '"' << model.spec_string() << "\"," << fmt(est.c) << ',' << fmt(ce.lambda_hat) << ','
        << fmt(d1) << ',' << fmt(d2) << ',' << fmt(std::max(d1, d2)) << ',' << check << '\n';
    if (check.rfind("FAILED", 0) == 0) rep.logs.push_back("eps=" + fmt_short(eps) + ": " + check);
  }
  rep.body["members"] = members;
  rep.body["d1_monotone_nondecreasing"] = monotone;
  rep.csv = csv.str();
  if (violation)
    rep.verdict = Verdict::Violation;
  else if (all_ok)
    rep.verdict = Verdict::EqualityRigidityConsistent;
  return rep;
}

ExperimentReport run_exponent_rigidity(const ExperimentSpec& spec) {
  const MetricModel model = MetricModel::parse(spec.model);
  ExperimentReport rep = base_report(spec, &model);
  if (!model.constant_curvature()) {
    rep.body["guard"] = {{"constant_curvature", false}, {"rejected", true}};
    rep.logs.push_back("refused: the hypothesis lambda = exp(-c) is not certified for non-constant curvature");
    return rep;
  }
  const auto grid = make_grid(model, spec.grid, spec.seed);
  const CurvatureEstimate est = estimate_curvature(model, grid, spec.T + 25.0, spec);
  rep.body["curvature_bounds"] = bounds_json(est);
  if (est.not_negatively_curved) {
    rep.logs.push_back("NotNegativelyCurved");
    return rep;
  }
  const double c = est.c, tol = spec.tolerance;
  const int n1 = 1;
  const spectra::ContractionEstimate ce =
      spectra::contraction_constant(model, grid, c, point_settings(spec, true), spec.threads);
  const InequalitySummary s = summarize(ce, c, tol, true);
  double e_u = 0, e_s = 0, e_tr = 0, e_dir = 0, e_sum = 0, e_diff = 0;
  std::ostringstream csv;
  csv << "# schema=exponent_rigidity.v1\n";
  csv << "index,chi_u,chi_s,det_trace,det_direct,sum,difference_rate\n";
  for (std::size_t i = 0; i < ce.points.size(); ++i) {
    const auto& p = ce.points[i];
    spectra::GrowthCurve diff;
    const std::size_t n = std::min(p.stable.times.size(), p.unstable.times.size());
    for (std::size_t k = 0; k < n; ++k) {
      diff.times.push_back(p.stable.times[k]);
      diff.log_norm.push_back(p.unstable.log_base_norm[k] - p.stable.log_base_norm[k]);
    }
    const double rate = spectra::lyapunov_exponent(diff, 0.2 * spec.T, spec.T).value;
    e_u = std::max(e_u, std::abs(p.chi_u.value - c));
    e_s = std::max(e_s, std::abs(p.chi_s.value + c));
    e_tr = std::max(e_tr, std::abs(p.det_trace.value - c * n1));
    e_dir = std::max(e_dir, std::abs(p.det_direct.estimate.value - c * n1));
    e_sum = std::max(e_sum, std::abs(p.chi_u.value + p.chi_s.value));
    e_diff = std::max(e_diff, std::abs(rate - 2.0 * c));
    csv << i << ',' << fmt(p.chi_u.value) << ',' << fmt(p.chi_s.value) << ',' << fmt(p.det_trace.value) << ','
        << fmt(p.det_direct.estimate.value) << ',' << fmt(p.chi_u.value + p.chi_s.value) << ',' << fmt(rate) << '\n';
  }
  json checks;
  checks["chi_u_equals_c"] = {{"max_error", e_u}, {"tolerance", tol}, {"pass", e_u <= tol}};
  checks["chi_s_equals_minus_c"] = {{"max_error", e_s}, {"tolerance", tol}, {"pass", e_s <= tol}};
  checks["det_trace_equals_c_n_minus_1"] = {{"max_error", e_tr}, {"tolerance", tol}, {"pass", e_tr <= tol}};
  checks["det_direct_equals_c_n_minus_1"] = {{"max_error", e_dir}, {"tolerance", tol}, {"pass", e_dir <= tol}};
  checks["sum_rule"] = {{"max_error", e_sum}, {"tolerance", 2e-4}, {"pass", e_sum <= 2e-4}};
  checks["difference_equals_2c"] = {{"max_error", e_diff}, {"tolerance", 1e-3}, {"pass", e_diff <= 1e-3}};
  bool ok = true;
  for (auto it = checks.begin(); it != checks.end(); ++it) ok = ok && it.value()["pass"].get<bool>();
  rep.body["results"] = s.j;
  rep.body["checks"] = checks;
  rep.csv = csv.str();
  rep.equality = s.equality;
  if (s.violation)
    rep.verdict = Verdict::Violation;
  else if (ok && s.green_ok && s.fits_ok)
    rep.verdict = Verdict::EqualityRigidityConsistent;
  else
    rep.logs.push_back("an exponent check failed");
  return rep;
}

namespace {

struct CurveResult {
  std::string name;
  double expected = 0.0;
  std::vector<double> ratios, errors, orders;
  bool pass = false;
  std::string error;
};

flow::UnitTangentState flow_to(const MetricModel& model, const UnitTangentState& th, double h, double tol) {
  const flow::OrbitSegment o = flow::integrate_geodesic(model, th, h, {tol, std::max(h, 1e-12), 0.5});
  if (o.chart_exit) throw LabError(ErrorCode::ChartExit, "test curve left the chart");
  return {o.positions.back(), o.velocities.back()};
}

}  // namespace

ExperimentReport run_distance_derivative_check(const ExperimentSpec& spec) {
  const MetricModel model = MetricModel::parse(spec.model);
  ExperimentReport rep = base_report(spec, &model);
  rep.caveats.push_back("distances use the first-order small-scale Sasaki model; accuracy is O(separation^2)");
  if (spec.steps.size() < 2) throw LabError(ErrorCode::ValidationError, "steps needs at least two entries");
  const Vec2 p0 = spec.grid.center.value_or(default_center(model));
  const UnitTangentState th = flow::unit_state(model, p0, 0.0);
  const double tol = spec.tolerance;
  const double floor = 1e-10;
  std::vector<CurveResult> results;
  double c_for_limit = 0.0;
  for (const std::string& name : spec.curves) {
    CurveResult cr;
    cr.name = name;
    try {
      std::function<UnitTangentState(double)> alpha;
      if (name == "fiber_rotation") {
        cr.expected = 1.0;
        const Vec2 V = flow::rotate_quarter(model, th.p, th.v);
        alpha = [th, V](double h) { return UnitTangentState{th.p, std::cos(h) * th.v + std::sin(h) * V}; };
      } else if (name == "geodesic_lift") {
        cr.expected = 1.0;
        alpha = [&model, th, &spec](double h) { return flow_to(model, th, h, spec.integrator_tol); };
      } else if (name == "stable_graph") {
        if (c_for_limit == 0.0) {
          const metric::CurvatureBounds b = metric::curvature_bounds(
              model, spec.curvature_box.value_or(default_curvature_box(model)), spec.curvature_grid);
          if (b.not_negatively_curved) throw LabError(ErrorCode::NotNegativelyCurved, "stable graph needs K < 0");
          c_for_limit = b.c;
        }
        jacobi::GreenLimitSettings gs;
        gs.tol = spec.green_tol;
        gs.solver = {0.1 * spec.integrator_tol, 0.5};
        const jacobi::GreenLimitResult um =
            jacobi::stable_limit(model, th, c_for_limit, gs, {spec.integrator_tol, spec.dense_dt, 0.5});
        if (!um.converged) throw LabError(ErrorCode::NoConvergence, "stable Green limit did not converge");
        const double kappa = um.U_plus(0, 0);
        cr.expected = std::sqrt(1.0 + kappa * kappa);
        const UnitTangentState base{th.p, flow::rotate_quarter(model, th.p, th.v)};
        // base geodesic in direction V carrying cos(kh) P(h) + sin(kh) sigma'(h),
        // P the parallel field with P(0) = v
        alpha = [&model, base, kappa, &spec](double h) {
          const UnitTangentState s = flow_to(model, base, h, spec.integrator_tol);
          const Vec2 P = -flow::rotate_quarter(model, s.p, s.v);
          return UnitTangentState{s.p, std::cos(kappa * h) * P + std::sin(kappa * h) * s.v};
        };
        rep.body["stable_graph_U_minus"] = kappa;
      } else {
        throw LabError(ErrorCode::ValidationError, "unknown curve family '" + name + "'");
      }
      for (double h : spec.steps) {
        const double d = flow::sasaki_distance_smallscale(model, th, alpha(h));
        cr.ratios.push_back(d / h);
        cr.errors.push_back(std::abs(d / h - cr.expected));
      }
      bool order_ok = true;
      for (std::size_t k = 0; k + 1 < spec.steps.size(); ++k) {
        const double o = std::log(cr.errors[k] / cr.errors[k + 1]) / std::log(spec.steps[k] / spec.steps[k + 1]);
        cr.orders.push_back(o);
        if (cr.errors[k + 1] > floor && !(o >= 1.0)) order_ok = false;
      }
      cr.pass = order_ok && cr.errors.back() <= tol;
    } catch (const LabError& e) {
      cr.error = e.what();
    }
    results.push_back(cr);
  }
  json arr = json::array();
  std::ostringstream csv;
  csv << "# schema=distance_derivative.v1\n";
  csv << "curve,h,ratio,expected,error\n";
  bool ok = !results.empty();
  for (const auto& cr : results) {
    json j;
    j["curve"] = cr.name;
    j["expected_norm"] = cr.expected;
    j["steps"] = spec.steps;
    j["ratios"] = cr.ratios;
    j["errors"] = cr.errors;
    j["observed_orders"] = cr.orders;
    j["pass"] = cr.pass;
    if (!cr.error.empty()) {
      j["error"] = cr.error;
      rep.logs.push_back(cr.name + ": " + cr.error);
    }
    arr.push_back(j);
    ok = ok && cr.pass;
    for (std::size_t k = 0; k < cr.ratios.size(); ++k)
      csv << cr.name << ',' << fmt(spec.steps[k]) << ',' << fmt(cr.ratios[k]) << ',' << fmt(cr.expected) << ','
          << fmt(cr.errors[k]) << '\n';
  }
  rep.body["base_state"] = {{"p", json::array({th.p.x(), th.p.y()})}, {"v", json::array({th.v.x(), th.v.y()})}};
  rep.body["curves"] = arr;
  rep.csv = csv.str();
  if (ok)
    rep.verdict = Verdict::EqualityRigidityConsistent;
  else
    rep.logs.push_back("a difference quotient failed to converge to the Sasaki norm");
  return rep;
}

ExperimentReport run_stable_leaf_constancy(const ExperimentSpec& spec) {
  const MetricModel model = MetricModel::parse(spec.model);
  ExperimentReport rep = base_report(spec, &model);
  if (model.kind() != metric::ModelKind::Hyperbolic) {
    rep.body["guard"] = {{"hyperbolic", false}, {"rejected", true}};
    rep.logs.push_back("refused: stable leaves are constructed analytically only on the hyperbolic half-plane");
    return rep;
  }
  if (spec.companions < 1) throw LabError(ErrorCode::ValidationError, "companions must be at least 1");
  if (spec.companion_leaf != "stable" && spec.companion_leaf != "unstable")
    throw LabError(ErrorCode::ValidationError, "companion_leaf must be 'stable' or 'unstable'");
  const double c = model.base_c();
  const Vec2 p0 = spec.grid.center.value_or(default_center(model));
  auto up = [c](const Vec2& p) { return UnitTangentState{p, Vec2(0.0, c * p.y())}; };
  const UnitTangentState theta = up(p0);
  std::vector<UnitTangentState> states{theta};
  for (int k = 1; k <= spec.companions; ++k) {
    const double s = k * spec.companion_spacing;
    if (spec.companion_leaf == "stable") {
      // same horocycle y = y0, vertical: shares the forward ideal point
      states.push_back(up({p0.x() + s, p0.y()}));
    } else {
      // horocycle tangent to the real axis below p0: shares the backward ideal point
      const double R = 0.5 * p0.y();
      const Vec2 center(p0.x(), R);
      const double a = s / R;
      const Vec2 q = center + R * Vec2(std::sin(a), std::cos(a));
      const Vec2 dir = (q - center).normalized();
      states.push_back({q, c * q.y() * dir});
    }
  }
  // leaf membership precheck: forward distances must shrink to zero
  const double t_check = spec.T;
  const flow::IntegratorSettings fs{spec.integrator_tol, 0.05, 0.5};
  const flow::OrbitSegment o0 = flow::integrate_geodesic(model, theta, t_check, fs);
  json pre = json::array();
  bool members_ok = true;
  for (std::size_t k = 1; k < states.size(); ++k) {
    const flow::OrbitSegment ok = flow::integrate_geodesic(model, states[k], t_check, fs);
    const double d0 = hyperbolic_distance(c, theta.p, states[k].p);
    const double dT = ok.chart_exit ? INFINITY : hyperbolic_distance(c, o0.positions.back(), ok.positions.back());
    const bool member = dT <= 1e-6 && dT < d0;
    members_ok = members_ok && member;
    pre.push_back({{"index", k},
                   {"p", json::array({states[k].p.x(), states[k].p.y()})},
                   {"distance_0", d0},
                   {"distance_T", dT},
                   {"on_stable_leaf", member}});
  }
  rep.body["leaf_precheck"] = {{"t_check", t_check}, {"companions", pre}, {"pass", members_ok}};
  if (!members_ok) {
    rep.body["misconfiguration"] = true;
    rep.logs.push_back("misconfiguration: a companion is not on the stable leaf (forward distance does not shrink)");
    return rep;
  }
  const spectra::PointSettings ps = point_settings(spec, true);
  std::vector<spectra::PointAnalysis> pts;
  for (const auto& s : states) pts.push_back(spectra::analyze_point(model, s, c, ps));
  const double tol = spec.tolerance;
  double max_pair = 0.0, max_dev = 0.0;
  std::ostringstream csv;
  csv << "# schema=stable_leaf.v1\n";
  csv << "index,x0,x1,chi_u,chi_u_residual,difference_to_base\n";
  json arr = json::array();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double diff = std::abs(pts[k].chi_u.value - pts[0].chi_u.value);
    max_pair = std::max(max_pair, diff);
    max_dev = std::max(max_dev, std::abs(pts[k].chi_u.value - c));
    arr.push_back({{"index", k}, {"chi_u", pts[k].chi_u.value}, {"residual", pts[k].chi_u.residual},
                   {"difference_to_base", diff}, {"U_plus", pts[k].U_plus.U_plus(0, 0)}});
    csv << k << ',' << fmt(states[k].p.x()) << ',' << fmt(states[k].p.y()) << ',' << fmt(pts[k].chi_u.value) << ','
        << fmt(pts[k].chi_u.residual) << ',' << fmt(diff) << '\n';
  }
  rep.body["points"] = arr;
  rep.body["max_pair_difference"] = max_pair;
  rep.body["max_deviation_from_c"] = max_dev;
  rep.csv = csv.str();
  if (max_pair <= tol && max_dev <= tol) {
    rep.verdict = Verdict::EqualityRigidityConsistent;
    rep.equality = true;
  } else {
    rep.logs.push_back("unstable exponents differ along the leaf beyond the tolerance");
  }
  return rep;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  try {
    switch (spec.kind) {
      case ExperimentKind::Inequality: return run_inequality_experiment(spec);
      case ExperimentKind::RigidityProbe: return run_rigidity_probe(spec);
      case ExperimentKind::ExponentRigidity: return run_exponent_rigidity(spec);
      case ExperimentKind::DistanceDerivative: return run_distance_derivative_check(spec);
      case ExperimentKind::StableLeaf: return run_stable_leaf_constancy(spec);
    }
  } catch (const LabError& e) {
    const MetricModel* model_ptr = nullptr;
    std::optional<MetricModel> model;
    try {
      model = MetricModel::parse(spec.model);
      model_ptr = &*model;
    } catch (const LabError&) {
    }
    ExperimentReport rep = base_report(spec, model_ptr);
    rep.logs.push_back(std::string("estimator failure: ") + e.what());
    return rep;
  }
  throw LabError(ErrorCode::InvalidArgument, "unknown experiment kind");
}

}  // namespace lab::experiments
