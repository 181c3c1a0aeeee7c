#pragma once

#include "lab/spectra.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lab::experiments {

using metric::MetricModel;
using metric::SamplingBox;
using metric::Vec2;

enum class ExperimentKind { Inequality, RigidityProbe, ExponentRigidity, DistanceDerivative, StableLeaf };
const char* to_string(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);

enum class Verdict { InequalityHolds, EqualityRigidityConsistent, Violation, Inconclusive };
const char* to_string(Verdict v);

enum class GridMode { Fan, Random };

// N unit vectors at one point (fan) or N random states in a box (random).
struct GridSpec {
  GridMode mode = GridMode::Fan;
  int count = 20;
  std::optional<Vec2> center;       // fan; default depends on the model
  std::optional<SamplingBox> box;   // random; default depends on the model
};

struct ExperimentSpec {
  std::string name;
  ExperimentKind kind = ExperimentKind::Inequality;
  std::string model = "hyperbolic:c=1";
  GridSpec grid;
  double T = 50.0;
  std::uint64_t seed = 0;
  double tolerance = 1e-3;        // verdict tolerance
  double integrator_tol = 1e-10;
  double green_tol = 1e-8;
  double dense_dt = 0.01;
  int curvature_grid = 200;
  std::optional<SamplingBox> curvature_box;
  std::vector<double> sweep{0.0, 0.05, 0.1, 0.2};  // rigidity probe epsilons
  double variance_threshold = 1e-3;               // rigidity probe d2 threshold
  std::vector<std::string> curves{"fiber_rotation", "geodesic_lift", "stable_graph"};
  std::vector<double> steps{1e-2, 1e-3, 1e-4};
  int companions = 5;
  double companion_spacing = 0.1;
  std::string companion_leaf = "stable";
  int threads = 1;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::string model_tag;
  Verdict verdict = Verdict::Inconclusive;
  bool equality = false;
  nlohmann::ordered_json body;  // experiment-specific results
  std::vector<std::string> caveats;
  std::vector<std::string> logs;
  std::string csv;

  nlohmann::ordered_json to_json() const;
  std::string file_stem() const;  // <experiment>-<model tag>-<seed>
};

// Deterministic theta-grid for a model.
std::vector<flow::UnitTangentState> make_grid(const MetricModel& model, const GridSpec& grid, std::uint64_t seed);
Vec2 default_center(const MetricModel& model);
SamplingBox default_curvature_box(const MetricModel& model);

// Sampled curvature constant: the larger of the box estimate and the most
// negative curvature met by the grid orbits over [-horizon, horizon].
struct CurvatureEstimate {
  metric::CurvatureBounds box;
  double orbit_inf_K = 0.0;
  double orbit_sup_K = 0.0;
  double c = 0.0;
  bool not_negatively_curved = false;
};
CurvatureEstimate estimate_curvature(const MetricModel& model, const std::vector<flow::UnitTangentState>& grid,
                                     double horizon, const ExperimentSpec& spec);

ExperimentReport run_inequality_experiment(const ExperimentSpec& spec);
ExperimentReport run_rigidity_probe(const ExperimentSpec& spec);
ExperimentReport run_exponent_rigidity(const ExperimentSpec& spec);
ExperimentReport run_distance_derivative_check(const ExperimentSpec& spec);
ExperimentReport run_stable_leaf_constancy(const ExperimentSpec& spec);

// Dispatches on spec.kind; estimator failures become Inconclusive reports.
ExperimentReport run_experiment(const ExperimentSpec& spec);

}  // namespace lab::experiments
