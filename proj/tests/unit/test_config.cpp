#include "lab/config.hpp"
#include "lab/error.hpp"
#include "lab/runner.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace cfg = lab::config;
namespace fs = std::filesystem;
using lab::experiments::Verdict;

namespace {

std::string error_of(std::string_view text, lab::ErrorCode* code = nullptr) {
  try {
    cfg::parse_config(text);
  } catch (const lab::LabError& e) {
    if (code) *code = e.code();
    return e.what();
  }
  return {};
}

fs::path scratch_dir(const char* name) {
  const fs::path p = fs::temp_directory_path() / ("lab-unit-" + std::string(name));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("minimal config") {
  const auto c = cfg::parse_config("[experiment.h1]\nkind = \"inequality\"\nmodel = \"hyperbolic:c=1\"\n");
  REQUIRE(c.experiments.size() == 1);
  const auto specs = cfg::resolve(c);
  CHECK(specs[0].name == "h1");
  CHECK(specs[0].T == 50.0);
  CHECK(c.parallel_jobs() == 1);
}

TEST_CASE("misspelled key is named") {
  lab::ErrorCode code{};
  const std::string e =
      error_of("[experiment.a]\nkind = \"inequality\"\ntolerence = 1e-3\n", &code);
  CHECK(code == lab::ErrorCode::ValidationError);
  CHECK(e.find("tolerence") != std::string::npos);
  CHECK(e.find("line 3") != std::string::npos);
}

TEST_CASE("duplicate experiment names") {
  lab::ErrorCode code{};
  const std::string e = error_of("[experiment.a]\nkind = \"inequality\"\n[experiment.a]\nkind = \"stable_leaf\"\n", &code);
  CHECK(code == lab::ErrorCode::ValidationError);
  CHECK(e.find("duplicate name") != std::string::npos);
}

TEST_CASE("syntax errors carry line and column") {
  lab::ErrorCode code{};
  std::string e = error_of("[run]\njobs = 2\nseed = \"abc\n", &code);
  CHECK(code == lab::ErrorCode::ParseError);
  CHECK(e.find("line 3, column 8") != std::string::npos);
  e = error_of("[run]\njobs 2\n", &code);
  CHECK(code == lab::ErrorCode::ParseError);
  CHECK(e.find("line 2, column 6") != std::string::npos);
  e = error_of("[run\n", &code);
  CHECK(code == lab::ErrorCode::ParseError);
  e = error_of("[run]\ntolerance = 1e-3x\n", &code);
  CHECK(code == lab::ErrorCode::ParseError);
}

TEST_CASE("type and range validation") {
  lab::ErrorCode code{};
  CHECK(error_of("[run]\njobs = 2.5\n", &code).find("jobs") != std::string::npos);
  CHECK(code == lab::ErrorCode::ValidationError);
  CHECK(error_of("[run]\njobs = 0\n", &code).find("jobs") != std::string::npos);
  CHECK(error_of("[experiment.a]\nmodel = \"hyperbolic\"\n", &code).find("kind") != std::string::npos);
  CHECK(error_of("[experiment.a]\nkind = \"inequality\"\nmodel = \"torus\"\n", &code).find("model") !=
        std::string::npos);
  CHECK(error_of("[experiment.a]\nkind = \"distance_derivative\"\nsteps = [1e-3, 1e-2]\n", &code).find("steps") !=
        std::string::npos);
  CHECK(error_of("[bogus]\n", &code).find("bogus") != std::string::npos);
  CHECK(error_of("[run]\nseed = 1\nseed = 2\n", &code).find("duplicate key") != std::string::npos);
}

TEST_CASE("render round-trips random configs") {
  std::mt19937_64 gen(99);
  auto coin = [&] { return (gen() & 1) != 0; };
  auto real = [&] { return std::ldexp(static_cast<double>(gen() >> 11), -53) * std::pow(10.0, static_cast<int>(gen() % 7) - 4); };
  const char* kinds[] = {"inequality", "rigidity_probe", "exponent_rigidity", "distance_derivative", "stable_leaf"};
  for (int n = 0; n < 200; ++n) {
    cfg::RunConfig c;
    if (coin()) c.output_dir = "out dir \"q\" \\ " + std::to_string(n);
    if (coin()) c.jobs = 1 + static_cast<std::int64_t>(gen() % 8);
    if (coin()) c.seed = gen();
    if (coin()) c.tolerance = real() + 1e-9;
    if (coin()) c.integrator_tol = real() + 1e-12;
    if (coin()) c.warn_only = coin();
    const int ne = static_cast<int>(gen() % 4);
    for (int k = 0; k < ne; ++k) {
      cfg::ExperimentEntry e;
      e.name = "e" + std::to_string(k);
      e.kind = kinds[gen() % 5];
      if (coin()) e.model = "hyperbolic:c=" + std::to_string(1 + gen() % 3);
      if (coin()) e.grid = coin() ? "fan" : "random";
      if (coin()) e.grid_count = 1 + static_cast<std::int64_t>(gen() % 30);
      if (coin()) e.grid_center = std::array<double, 2>{real() - 0.5, real() + 0.1};
      if (coin()) e.grid_box = std::array<double, 4>{-1.0 - real(), 0.5, 1.0, 2.0 + real()};
      if (coin()) e.T = 5.0 + real();
      if (coin()) e.seed = gen();
      if (coin()) e.sweep = std::vector<double>{0.0, real(), 0.1 + real()};
      if (coin()) e.curves = std::vector<std::string>{"fiber_rotation", "stable_graph"};
      if (coin()) e.steps = std::vector<double>{1e-2, 1e-3 * (1.0 + std::ldexp(static_cast<double>(gen() >> 11), -53))};
      if (coin()) e.companions = 1 + static_cast<std::int64_t>(gen() % 6);
      if (coin()) e.companion_leaf = coin() ? "stable" : "unstable";
      if (coin()) e.threads = 1 + static_cast<std::int64_t>(gen() % 4);
      c.experiments.push_back(e);
    }
    const std::string text = cfg::render(c);
    const cfg::RunConfig back = cfg::parse_config(text);
    CHECK(back == c);
    CHECK(cfg::render(back) == text);
  }
}

TEST_CASE("bundled suite config matches the shipped file") {
  const auto embedded = cfg::parse_config(cfg::paper_suite_text());
  CHECK(embedded.experiments.size() == 5);
  std::ifstream f(LAB_SOURCE_DIR "/configs/paper-suite.toml");
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(cfg::parse_config(ss.str()) == embedded);
}

TEST_CASE("exit status is a function of the verdicts") {
  using lab::runner::exit_status;
  CHECK(exit_status({}, false) == 0);
  CHECK(exit_status({Verdict::InequalityHolds, Verdict::EqualityRigidityConsistent}, false) == 0);
  CHECK(exit_status({Verdict::InequalityHolds, Verdict::Inconclusive}, false) == 1);
  CHECK(exit_status({Verdict::Inconclusive}, true) == 0);
  CHECK(exit_status({Verdict::Violation}, true) == 1);
}

TEST_CASE("runner: nothing to do") {
  std::ostringstream out, err;
  const auto r = lab::runner::run(cfg::parse_config("[run]\njobs = 2\n"), {}, out, err);
  CHECK(r.exit_code == 0);
  CHECK(err.str().find("nothing to do") != std::string::npos);
}

TEST_CASE("runner: unwritable output directory leaves no files") {
  const fs::path base = scratch_dir("ro");
  fs::create_directories(base);
  fs::permissions(base, fs::perms::owner_read | fs::perms::owner_exec);
  const bool enforced = !std::ofstream(base / "x").good();
  fs::remove(base / "x");
  lab::runner::Overrides o;
  o.output_dir = (base / "reports").string();
  std::ostringstream out, err;
  const auto c = cfg::parse_config("[experiment.a]\nkind = \"distance_derivative\"\n");
  const auto r = lab::runner::run(c, o, out, err);
  if (enforced) {
    CHECK(r.exit_code != 0);
    CHECK(fs::is_empty(base));
  }
  // a regular file where the directory should be
  const fs::path file = scratch_dir("file");
  std::ofstream(file.string()) << "x";
  o.output_dir = file.string();
  CHECK(lab::runner::run(c, o, out, err).exit_code != 0);
  fs::permissions(base, fs::perms::owner_all);
  fs::remove_all(base);
  fs::remove(file);
}

TEST_CASE("runner writes reports atomically and deterministically") {
  const fs::path dir = scratch_dir("run");
  const auto c = cfg::parse_config(
      "[run]\njobs = 2\n[experiment.dd]\nkind = \"distance_derivative\"\n"
      "[experiment.leaf]\nkind = \"stable_leaf\"\nT = 20\ncompanions = 2\n");
  lab::runner::Overrides o;
  o.output_dir = dir.string();
  std::ostringstream out, err;
  const auto r = lab::runner::run(c, o, out, err);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "dd-hyperbolic-c1-0.json"));
  CHECK(fs::exists(dir / "dd-hyperbolic-c1-0.csv"));
  CHECK(fs::exists(dir / "leaf-hyperbolic-c1-0.json"));
  for (const auto& entry : fs::directory_iterator(dir)) CHECK(entry.path().extension() != ".tmp");
  std::ifstream f1(dir / "leaf-hyperbolic-c1-0.json");
  std::stringstream s1;
  s1 << f1.rdbuf();
  o.jobs = 1;
  lab::runner::run(c, o, out, err);
  std::ifstream f2(dir / "leaf-hyperbolic-c1-0.json");
  std::stringstream s2;
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  fs::remove_all(dir);
}
