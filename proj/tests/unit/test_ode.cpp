#include "lab/error.hpp"
#include "lab/ode.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using lab::ode::DormandPrince45;
using lab::ode::State;

namespace {

DormandPrince45 oscillator(double tol) {
  lab::ode::Options opt;
  opt.rtol = opt.atol = tol;
  return DormandPrince45([](double, const State& y, State& dy) {
    dy.resize(2);
    dy[0] = y[1];
    dy[1] = -y[0];
  }, opt);
}

}  // namespace

TEST_CASE("exponential growth to tolerance") {
  lab::ode::Options opt;
  opt.rtol = opt.atol = 1e-12;
  DormandPrince45 s([](double, const State& y, State& dy) { dy = y; }, opt);
  State y0(1);
  y0 << 1.0;
  lab::ode::drive(s, 0.0, y0, 5.0, {}, {});
  CHECK(s.t() == 5.0);
  CHECK(std::abs(s.y()[0] / std::exp(5.0) - 1.0) < 1e-10);
}

TEST_CASE("dense output and landing on output times") {
  auto s = oscillator(1e-11);
  State y0(2);
  y0 << 0.0, 1.0;
  std::vector<double> outs;
  for (int k = 0; k <= 100; ++k) outs.push_back(0.1 * k);
  std::vector<double> seen;
  double worst = 0.0;
  lab::ode::DriveHooks hooks;
  hooks.land_on_outputs = true;
  hooks.on_output = [&](double t, const State& y) {
    seen.push_back(t);
    worst = std::max(worst, std::abs(y[0] - std::sin(t)));
  };
  long accepted_at_outputs = 0;
  hooks.on_accept = [&](const DormandPrince45& st) {
    for (double o : outs)
      if (st.t() == o) ++accepted_at_outputs;
  };
  lab::ode::drive(s, 0.0, y0, 10.0, outs, hooks);
  CHECK(seen == outs);
  CHECK(worst < 1e-9);
  CHECK(accepted_at_outputs == 100);
}

TEST_CASE("backward integration and reversibility") {
  auto s = oscillator(1e-12);
  State y0(2);
  y0 << 0.3, -0.7;
  lab::ode::drive(s, 0.0, y0, 20.0, {}, {});
  const State mid = s.y();
  lab::ode::drive(s, 20.0, mid, 0.0, {}, {});
  CHECK(s.t() == 0.0);
  CHECK((s.y() - y0).norm() < 1e-9);
}

TEST_CASE("interpolant matches step ends") {
  auto s = oscillator(1e-10);
  State y0(2);
  y0 << 1.0, 0.0;
  s.reset(0.0, y0, 1.0);
  s.step(3.0);
  CHECK((s.dense(s.t()) - s.y()).norm() < 1e-14);
  CHECK((s.dense(s.t_prev()) - y0).norm() < 1e-14);
}

TEST_CASE("step budget exhaustion is reported") {
  lab::ode::Options opt;
  opt.rtol = opt.atol = 1e-10;
  opt.max_steps = 5;
  DormandPrince45 s([](double, const State& y, State& dy) { dy = y; }, opt);
  State y0(1);
  y0 << 1.0;
  try {
    lab::ode::drive(s, 0.0, y0, 50.0, {}, {});
    FAIL("expected StepSizeUnderflow");
  } catch (const lab::LabError& e) {
    CHECK(e.code() == lab::ErrorCode::StepSizeUnderflow);
  }
}
