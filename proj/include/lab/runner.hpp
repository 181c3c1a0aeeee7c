#pragma once

#include "lab/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lab::runner {

using experiments::Verdict;

// Command-line overrides; they win over every config value.
struct Overrides {
  std::optional<std::string> output_dir;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::optional<bool> warn_only;
};

struct JobResult {
  std::string name;
  Verdict verdict = Verdict::Inconclusive;
  std::string json_path, csv_path;
  std::string io_error;
};

struct RunSummary {
  std::vector<JobResult> jobs;
  int exit_code = 0;
};

// 0 iff nothing is Violation or Inconclusive; warn_only lets Inconclusive pass.
int exit_status(const std::vector<Verdict>& verdicts, bool warn_only);

// Writes via a temporary file and rename so readers never see partial output.
void write_atomic(const std::string& path, const std::string& contents);

// Output directory precedence: override, config, LAB_OUTPUT_DIR, "lab-output".
std::string output_directory(const config::RunConfig& config, const Overrides& o);

RunSummary run(const config::RunConfig& config, const Overrides& overrides, std::ostream& out, std::ostream& err);

}  // namespace lab::runner
