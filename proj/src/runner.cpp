#include "lab/runner.hpp"

#include "lab/error.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <system_error>
#include <thread>

namespace lab::runner {

namespace fs = std::filesystem;

int exit_status(const std::vector<Verdict>& verdicts, bool warn_only) {
  for (Verdict v : verdicts) {
    if (v == Verdict::Violation) return 1;
    if (v == Verdict::Inconclusive && !warn_only) return 1;
  }
  return 0;
}

void write_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw LabError(ErrorCode::IoError, "cannot open " + tmp);
    f << contents;
    f.flush();
    if (!f) {
      f.close();
      std::remove(tmp.c_str());
      throw LabError(ErrorCode::IoError, "write failed for " + tmp);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw LabError(ErrorCode::IoError, "cannot rename " + tmp + ": " + ec.message());
  }
}

std::string output_directory(const config::RunConfig& config, const Overrides& o) {
  if (o.output_dir) return *o.output_dir;
  if (config.output_dir) return *config.output_dir;
  if (const char* env = std::getenv("LAB_OUTPUT_DIR"); env && *env) return env;
  return "lab-output";
}

namespace {

// Creates the directory if needed and proves it accepts a file.
std::string check_writable(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return "cannot create output directory '" + dir + "': " + ec.message();
  if (!fs::is_directory(dir, ec)) return "output path '" + dir + "' is not a directory";
  const fs::path probe = fs::path(dir) / ".lab-write-probe";
  {
    std::ofstream f(probe);
    if (!f) return "output directory '" + dir + "' is not writable";
  }
  fs::remove(probe, ec);
  return {};
}

}  // namespace

RunSummary run(const config::RunConfig& config, const Overrides& o, std::ostream& out, std::ostream& err) {
  RunSummary summary;
  std::vector<experiments::ExperimentSpec> specs = config::resolve(config);
  const bool warn_only = o.warn_only.value_or(config.warn_only.value_or(false));
  if (specs.empty()) {
    err << "warning: nothing to do\n";
    return summary;
  }
  for (auto& s : specs) {
    if (o.seed) s.seed = *o.seed;
    if (o.tolerance) s.tolerance = *o.tolerance;
  }
  const std::string dir = output_directory(config, o);
  if (const std::string problem = check_writable(dir); !problem.empty()) {
    err << "error: " << problem << '\n';
    summary.exit_code = 2;
    return summary;
  }
  const int jobs = std::max(1, o.jobs.value_or(config.parallel_jobs()));
  summary.jobs.resize(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      const experiments::ExperimentReport rep = experiments::run_experiment(specs[i]);
      JobResult& r = summary.jobs[i];
      r.name = specs[i].name;
      r.verdict = rep.verdict;
      const fs::path stem = fs::path(dir) / rep.file_stem();
      r.json_path = stem.string() + ".json";
      try {
        write_atomic(r.json_path, rep.to_json().dump(2) + "\n");
        if (!rep.csv.empty()) {
          r.csv_path = stem.string() + ".csv";
          write_atomic(r.csv_path, rep.csv);
        }
      } catch (const LabError& e) {
        r.io_error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(jobs, static_cast<int>(specs.size()));
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<Verdict> verdicts;
  bool io_failed = false;
  for (const JobResult& r : summary.jobs) {
    verdicts.push_back(r.verdict);
    out << r.name << ": " << experiments::to_string(r.verdict);
    if (r.io_error.empty())
      out << " -> " << r.json_path << '\n';
    else
      out << " (not written: " << r.io_error << ")\n";
    io_failed = io_failed || !r.io_error.empty();
  }
  summary.exit_code = exit_status(verdicts, warn_only);
  if (io_failed) {
    err << "error: some reports could not be written\n";
    if (summary.exit_code == 0) summary.exit_code = 3;
  }
  return summary;
}

}  // namespace lab::runner
