#pragma once

#include "lab/rigidity_experiments.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lab::config {

using experiments::ExperimentSpec;

// One [experiment.NAME] section. Unset keys fall back to [run], then to the
// ExperimentSpec defaults.
struct ExperimentEntry {
  std::string name;
  std::string kind;
  std::optional<std::string> model;
  std::optional<std::string> grid;
  std::optional<std::int64_t> grid_count;
  std::optional<std::array<double, 2>> grid_center;
  std::optional<std::array<double, 4>> grid_box;
  std::optional<double> T;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::optional<double> integrator_tol;
  std::optional<double> green_tol;
  std::optional<double> dense_dt;
  std::optional<std::int64_t> curvature_grid;
  std::optional<std::array<double, 4>> curvature_box;
  std::optional<std::vector<double>> sweep;
  std::optional<double> variance_threshold;
  std::optional<std::vector<std::string>> curves;
  std::optional<std::vector<double>> steps;
  std::optional<std::int64_t> companions;
  std::optional<double> companion_spacing;
  std::optional<std::string> companion_leaf;
  std::optional<std::int64_t> threads;

  bool operator==(const ExperimentEntry&) const = default;
};

struct RunConfig {
  std::optional<std::string> output_dir;
  std::optional<std::int64_t> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::optional<double> integrator_tol;
  std::optional<double> green_tol;
  std::optional<double> dense_dt;
  std::optional<bool> warn_only;
  std::vector<ExperimentEntry> experiments;

  int parallel_jobs() const { return jobs ? static_cast<int>(*jobs) : 1; }
  bool operator==(const RunConfig&) const = default;
};

// Strict parser: ParseError carries line and column, ValidationError names
// the offending key. All problems found are listed in the message.
RunConfig parse_config(std::string_view text);
std::string render(const RunConfig& config);

// Effective specs in config order.
std::vector<ExperimentSpec> resolve(const RunConfig& config);

// Config of the five standard experiments.
std::string_view paper_suite_text();

}  // namespace lab::config
