#include "lab/config.hpp"
#include "lab/error.hpp"
#include "lab/geodesic_flow.hpp"
#include "lab/jacobi_riccati.hpp"
#include "lab/runner.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using lab::metric::MetricModel;
using lab::metric::Vec2;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw lab::LabError(lab::ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct StateArgs {
  std::string model = "hyperbolic:c=1";
  std::vector<double> point{0.0, 1.0};
  std::vector<double> dir;
  double angle = 0.0;

  void add(CLI::App* app, bool with_direction) {
    app->add_option("--model,-m", model, "model spec, e.g. hyperbolic:c=2")->capture_default_str();
    app->add_option("--point,-p", point, "chart point x,y")->delimiter(',')->expected(2)->capture_default_str();
    if (!with_direction) return;
    auto* d = app->add_option("--dir", dir, "direction v0,v1 in chart components (normalized)")
                  ->delimiter(',')
                  ->expected(2);
    app->add_option("--angle", angle, "direction angle in an orthonormal frame")->excludes(d);
  }

  lab::flow::UnitTangentState state(const MetricModel& m) const {
    const Vec2 p(point[0], point[1]);
    if (dir.empty()) return lab::flow::unit_state(m, p, angle);
    const Vec2 v(dir[0], dir[1]);
    const double n = std::sqrt(lab::flow::inner(m, p, v, v));
    if (!(n > 0.0)) throw lab::LabError(lab::ErrorCode::InvalidArgument, "direction must be nonzero");
    return {p, v / n};
  }
};

// Writes to <dir>/<name> when an output directory is given, else to stdout.
void emit(const std::string& dir, const std::string& name, const std::string& contents) {
  if (dir.empty()) {
    std::cout << contents;
    return;
  }
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / name).string();
  lab::runner::write_atomic(path, contents);
  std::cerr << "wrote " << path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anosov geodesic flow experiment lab"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run experiments from a config file or the built-in paper-suite");
  std::string config_arg;
  lab::runner::Overrides ov;
  std::string output_dir;
  int jobs = 0;
  std::uint64_t seed = 0;
  double tol = 0.0;
  bool warn_only = false, print_config = false;
  run->add_option("config", config_arg, "config path, or 'paper-suite'")->required();
  run->add_option("--output-dir,-o", output_dir, "report directory (fallback: LAB_OUTPUT_DIR)");
  run->add_option("--jobs,-j", jobs, "parallel experiments")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "seed for every experiment");
  run->add_option("--tol", tol, "verdict tolerance for every experiment")->check(CLI::PositiveNumber);
  run->add_flag("--warn-only", warn_only, "Inconclusive verdicts do not fail the run");
  run->add_flag("--print-config", print_config, "print the normalized config and exit");

  auto* probe = app.add_subcommand("probe", "curvature, metric and Christoffel symbols at a point");
  StateArgs probe_args;
  probe_args.add(probe, false);

  auto* orbit = app.add_subcommand("orbit", "integrate a geodesic and write the orbit CSV");
  StateArgs orbit_args;
  orbit_args.add(orbit, true);
  double orbit_T = 1.0, orbit_tol = 1e-10, orbit_dt = 0.01;
  bool orbit_frame = false;
  std::string orbit_dir;
  orbit->add_option("--T,-T", orbit_T, "flow time (negative runs backward)")->capture_default_str();
  orbit->add_option("--tol", orbit_tol, "integrator tolerance")->capture_default_str();
  orbit->add_option("--dt", orbit_dt, "output spacing")->capture_default_str();
  orbit->add_flag("--frame", orbit_frame, "transport the normal frame and add curvature columns");
  orbit->add_option("--output-dir,-o", orbit_dir, "write orbit.csv here instead of stdout");

  auto* riccati = app.add_subcommand("riccati", "Green-limit trace of the unstable Riccati solution");
  StateArgs ric_args;
  ric_args.add(riccati, true);
  double T_back = 20.0, gap_tol = 1e-8;
  std::string ric_dir;
  riccati->add_option("--T-back", T_back, "largest backward horizon")->capture_default_str();
  riccati->add_option("--gap-tol", gap_tol, "Cauchy gap target")->capture_default_str();
  riccati->add_option("--output-dir,-o", ric_dir, "write riccati.csv here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const std::string text = config_arg == "paper-suite" ? std::string(lab::config::paper_suite_text())
                                                           : read_file(config_arg);
      const lab::config::RunConfig cfg = lab::config::parse_config(text);
      if (print_config) {
        std::cout << lab::config::render(cfg);
        return 0;
      }
      if (!output_dir.empty()) ov.output_dir = output_dir;
      if (jobs > 0) ov.jobs = jobs;
      if (run->count("--seed")) ov.seed = seed;
      if (run->count("--tol")) ov.tolerance = tol;
      if (warn_only) ov.warn_only = true;
      return lab::runner::run(cfg, ov, std::cout, std::cerr).exit_code;
    }
    if (*probe) {
      const MetricModel m = MetricModel::parse(probe_args.model);
      const Vec2 p(probe_args.point[0], probe_args.point[1]);
      const auto g = m.metric_tensor(p);
      const auto gam = m.christoffel(p);
      std::printf("model = %s\n", m.spec_string().c_str());
      std::printf("point = (%.17g, %.17g)\n", p.x(), p.y());
      std::printf("K = %.17g\n", m.gaussian_curvature(p));
      std::printf("g = [[%.17g, %.17g], [%.17g, %.17g]]\n", g(0, 0), g(0, 1), g(1, 0), g(1, 1));
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
          for (int j = i; j < 2; ++j) std::printf("Gamma^%d_%d%d = %.17g\n", k, i, j, gam(k, i, j));
      return 0;
    }
    if (*orbit) {
      const MetricModel m = MetricModel::parse(orbit_args.model);
      lab::flow::OrbitSegment o = lab::flow::integrate_geodesic(m, orbit_args.state(m), orbit_T, {orbit_tol, orbit_dt, 0.5});
      if (orbit_frame) lab::flow::transport_frame(m, o);
      if (o.chart_exit) std::cerr << "warning: orbit left the chart at t=" << o.exit_time << '\n';
      std::ostringstream os;
      lab::flow::write_orbit_csv(os, o);
      emit(orbit_dir, "orbit.csv", os.str());
      return 0;
    }
    if (*riccati) {
      const MetricModel m = MetricModel::parse(ric_args.model);
      const auto th = ric_args.state(m);
      double c = m.base_c();
      if (c == 0.0) c = lab::metric::curvature_bounds(m, lab::experiments::default_curvature_box(m), 200).c;
      lab::jacobi::GreenLimitSettings gs;
      gs.tol = gap_tol;
      gs.T_init = T_back / 4.0;
      gs.T_max = T_back;
      const lab::jacobi::GreenLimitResult r =
          lab::jacobi::green_limit(lab::jacobi::backward_extender(m, th, {1e-10, 0.01, 0.5}), c, gs);
      std::ostringstream os;
      os << "# schema=riccati_trace.v1\n";
      os << "T_back,U_norm,gap\n";
      os.precision(17);
      for (const auto& h : r.history) os << h.T << ',' << h.u_norm << ',' << h.gap << '\n';
      emit(ric_dir, "riccati.csv", os.str());
      std::fprintf(stderr, "U+ = %.12g  cauchy_gap = %.3g  T_back = %g  converged = %s\n", r.U_plus(0, 0),
                   r.cauchy_gap, r.T_back_used, r.converged ? "yes" : "no");
      return 0;
    }
  } catch (const lab::LabError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
