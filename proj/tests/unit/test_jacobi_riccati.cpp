#include "lab/error.hpp"
#include "lab/jacobi_riccati.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using lab::jacobi::Matrix;
using lab::metric::MetricModel;

namespace {

const Matrix Z = Matrix::Zero(1, 1);
const Matrix I = Matrix::Identity(1, 1);

lab::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const lab::LabError& e) {
    return e.code();
  }
  return lab::ErrorCode::IoError;
}

}  // namespace

TEST_CASE("Jacobi fields in constant curvature") {
  const auto o = oracle::constant_curvature_orbit(-1.0, 0.0, 10.0, 0.05);
  const auto p = lab::jacobi::solve_jacobi_ivp(o, Z, I);
  CHECK(std::abs(p.values.back()(0, 0) / std::sinh(10.0) - 1.0) < 1e-8);
  CHECK(p.derivatives.back()(0, 0) == doctest::Approx(std::cosh(10.0)).epsilon(1e-8));
  const auto o4 = oracle::constant_curvature_orbit(-4.0, 0.0, 3.0, 0.05);
  const auto q = lab::jacobi::solve_jacobi_ivp(o4, I, Z);
  CHECK(q.values.back()(0, 0) == doctest::Approx(std::cosh(6.0)).epsilon(1e-9));
}

TEST_CASE("Wronskian of two Jacobi solutions is constant") {
  const MetricModel m = MetricModel::parse("warped:profile=cosh_mix,b=0.25");
  const auto o = lab::flow::integrate_geodesic(m, lab::flow::unit_state(m, {0.3, 0.0}, 0.8), 8.0);
  const auto a = lab::jacobi::solve_jacobi_ivp(o, I, Z);
  const auto b = lab::jacobi::solve_jacobi_ivp(o, Z, I);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double w = a.values[i](0, 0) * b.derivatives[i](0, 0) - a.derivatives[i](0, 0) * b.values[i](0, 0);
    const double scale = std::max(1.0, std::abs(a.values[i](0, 0) * b.derivatives[i](0, 0)));
    worst = std::max(worst, std::abs(w - 1.0) / scale);
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("restarting from an interior node reproduces the solution") {
  const MetricModel m = MetricModel::parse("conformal:c=1,eps=0.2");
  const auto o = lab::flow::integrate_geodesic(m, lab::flow::unit_state(m, {0.1, 1.0}, 0.3), 6.0);
  const auto full = lab::jacobi::solve_jacobi_ivp(o, I, Z);
  const std::size_t k = o.node_at(3.0);
  const auto half = lab::jacobi::solve_jacobi_ivp_from(o, o.times[k], full.values[k], full.derivatives[k]);
  double worst = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i)
    worst = std::max(worst, std::abs(full.values[i](0, 0) - half.values[i](0, 0)) /
                                std::max(1.0, std::abs(full.values[i](0, 0))));
  CHECK(worst < 1e-6);
}

TEST_CASE("conjugate points") {
  const auto sphere = oracle::constant_curvature_orbit(1.0, 0.0, 4.0, 0.05);
  const auto cp = lab::jacobi::detect_conjugate_points(sphere, 1e-8);
  REQUIRE(cp.size() == 1);
  CHECK(std::abs(cp[0] - M_PI) < 1e-6);
  const MetricModel h = MetricModel::hyperbolic(1);
  const auto o = lab::flow::integrate_geodesic(h, lab::flow::unit_state(h, {0, 1}, 0.5), 50.0);
  CHECK(lab::jacobi::detect_conjugate_points(o).empty());
}

TEST_CASE("Green boundary-value problem") {
  const auto o = oracle::constant_curvature_orbit(-1.0, -10.0, 0.0, 0.05);
  const auto b = lab::jacobi::green_bvp(o);
  CHECK(b.U_s(0, 0) == doctest::Approx(1.0 / std::tanh(10.0)).epsilon(1e-10));
  CHECK(b.residual_start < 1e-12);
  CHECK(b.residual_end < 1e-12);
  const auto half_turn = oracle::constant_curvature_orbit(1.0, -M_PI, 0.0, M_PI / 100);
  CHECK(code_of([&] { lab::jacobi::green_bvp(half_turn); }) == lab::ErrorCode::ConjugatePointOnSegment);
}

TEST_CASE("Riccati flow") {
  const auto o = oracle::constant_curvature_orbit(-1.0, 0.0, 10.0, 0.05);
  const auto r = lab::jacobi::riccati_flow(o, Z);
  CHECK(r.values[100](0, 0) == doctest::Approx(std::tanh(5.0)).epsilon(1e-10));
  // fixed point U = c
  const auto fixed = lab::jacobi::riccati_flow(o, I);
  for (const auto& U : fixed.values) CHECK(std::abs(U(0, 0) - 1.0) < 1e-12);
  const auto sphere = oracle::constant_curvature_orbit(1.0, 0.0, 4.0, 0.05);
  CHECK(code_of([&] { lab::jacobi::riccati_flow(sphere, Z); }) == lab::ErrorCode::BlowUp);
}

TEST_CASE("Green limits in constant curvature") {
  for (double c : {1.0, 2.0, 3.0}) {
    const MetricModel m = MetricModel::hyperbolic(c);
    const auto th = lab::flow::unit_state(m, {0.3, 1.2}, 0.7);
    const auto u = lab::jacobi::unstable_limit(m, th, c, {}, {1e-10, 0.01, 0.5});
    const auto s = lab::jacobi::stable_limit(m, th, c, {}, {1e-10, 0.01, 0.5});
    CHECK(u.converged);
    CHECK(s.converged);
    CHECK(u.U_plus(0, 0) == doctest::Approx(c).epsilon(1e-8));
    CHECK(s.U_plus(0, 0) == doctest::Approx(-c).epsilon(1e-8));
    CHECK(u.within_green_bound);
    CHECK(u.norm <= c + 1e-6);
    // the gap shrinks by far more than 100x per doubling
    for (std::size_t k = 2; k < u.history.size(); ++k)
      if (u.history[k].gap > 1e-13) CHECK(u.history[k - 1].gap / u.history[k].gap >= 100.0);
  }
}

TEST_CASE("Riccati solutions stay symmetric") {
  const MetricModel m = MetricModel::parse("conformal:c=1,eps=0.2");
  const auto o = lab::flow::integrate_geodesic(m, lab::flow::unit_state(m, {0.1, 1.0}, 1.3), 10.0);
  const auto r = lab::jacobi::riccati_flow(o, 0.5 * I);
  CHECK(r.max_asymmetry == 0.0);  // 1 x 1 on surfaces
  for (const auto& U : r.values) CHECK(std::abs(U(0, 0)) < 10.0);
}

TEST_CASE("strict Green limit fails when the horizon is too short") {
  const MetricModel m = MetricModel::hyperbolic(1);
  const auto th = lab::flow::unit_state(m, {0, 1}, 0.0);
  lab::jacobi::GreenLimitSettings gs;
  gs.T_init = 1.0;
  gs.T_max = 2.0;
  CHECK(code_of([&] {
          lab::jacobi::green_limit_strict(lab::jacobi::backward_extender(m, th, {1e-10, 0.01, 0.5}), 1.0, gs);
        }) == lab::ErrorCode::NoConvergence);
}
