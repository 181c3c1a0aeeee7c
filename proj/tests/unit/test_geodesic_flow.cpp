#include "lab/error.hpp"
#include "lab/geodesic_flow.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using lab::flow::UnitTangentState;
using lab::metric::MetricModel;
using lab::metric::Vec2;

TEST_CASE("half-plane geodesic at T=1 matches the closed form") {
  const MetricModel m = MetricModel::hyperbolic(1);
  const auto o = lab::flow::integrate_geodesic(m, {{0, 1}, {1, 0}}, 1.0);
  CHECK(o.t_end() == 1.0);
  CHECK(o.positions.back().x() == doctest::Approx(std::tanh(1.0)).epsilon(1e-9));
  CHECK(o.positions.back().y() == doctest::Approx(1.0 / std::cosh(1.0)).epsilon(1e-9));
  CHECK(o.positions.back().x() == doctest::Approx(0.76159).epsilon(1e-5));
  CHECK(o.positions.back().y() == doctest::Approx(0.64805).epsilon(1e-5));
}

TEST_CASE("random geodesics follow the closed form") {
  std::mt19937_64 gen(3);
  for (double c : {1.0, 2.0}) {
    const MetricModel m = MetricModel::hyperbolic(c);
    for (int n = 0; n < 10; ++n) {
      const Vec2 p(oracle::uniform(gen, -1, 1), oracle::uniform(gen, 0.5, 2));
      const auto th = lab::flow::unit_state(m, p, oracle::uniform(gen, 0, 2 * M_PI));
      const double T = 3.0 / c;
      const auto o = lab::flow::integrate_geodesic(m, th, T);
      double worst = 0.0;
      for (std::size_t i = 0; i < o.size(); i += 7) {
        const auto ref = oracle::halfplane_geodesic(c, th.p, th.v, o.times[i]);
        worst = std::max(worst, oracle::halfplane_distance(c, ref.p, o.positions[i]));
      }
      CHECK(worst < 1e-8);
    }
  }
}

TEST_CASE("unit speed and orthonormal frame are maintained") {
  for (const char* spec : {"hyperbolic:c=1", "warped:profile=cosh_mix,b=0.25", "conformal:c=1,eps=0.2"}) {
    const MetricModel m = MetricModel::parse(spec);
    const Vec2 p = std::string(spec).rfind("warped", 0) == 0 ? Vec2(0.2, 0.0) : Vec2(0.1, 1.0);
    const auto o = lab::flow::integrate_geodesic(m, lab::flow::unit_state(m, p, 0.4), 50.0);
    INFO(spec);
    CHECK_FALSE(o.chart_exit);
    double speed = 0.0, gram = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) {
      const Vec2& q = o.positions[i];
      speed = std::max(speed, std::abs(lab::flow::inner(m, q, o.velocities[i], o.velocities[i]) - 1.0));
      gram = std::max(gram, std::abs(lab::flow::inner(m, q, o.frames[i], o.frames[i]) - 1.0));
      gram = std::max(gram, std::abs(lab::flow::inner(m, q, o.frames[i], o.velocities[i])));
    }
    CHECK(speed <= 1e-9);
    CHECK(gram <= 1e-9);
    CHECK(o.log.max_speed_drift <= 1e-9);
  }
}

TEST_CASE("flow reversibility") {
  const double tol = 1e-10;
  const MetricModel m = MetricModel::hyperbolic(1);
  const UnitTangentState th{{0, 1}, {0, 1}};
  const auto fwd = lab::flow::integrate_geodesic(m, th, 50.0, {tol, 0.01, 0.5});
  const UnitTangentState end{fwd.positions.back(), -fwd.velocities.back()};
  const auto back = lab::flow::integrate_geodesic(m, end, 50.0, {tol, 0.01, 0.5});
  CHECK(oracle::halfplane_distance(1.0, back.positions.back(), th.p) <= 100 * tol);
  CHECK((back.velocities.back() + th.v).norm() <= 100 * tol);
  // a short oblique orbit: error measured in the Sasaki sense
  const auto th2 = lab::flow::unit_state(m, {0.2, 1.1}, 0.9);
  const auto f2 = lab::flow::integrate_geodesic(m, th2, 5.0, {tol, 0.01, 0.5});
  const auto b2 = lab::flow::integrate_geodesic(m, {f2.positions.back(), -f2.velocities.back()}, 5.0, {tol, 0.01, 0.5});
  const UnitTangentState ret{b2.positions.back(), -b2.velocities.back()};
  CHECK(lab::flow::sasaki_distance_smallscale(m, th2, ret) <= 100 * tol);
}

TEST_CASE("segment transforms") {
  const MetricModel m = MetricModel::hyperbolic(1);
  const auto o = lab::flow::integrate_geodesic(m, lab::flow::unit_state(m, {0, 1}, 0.3), 4.0);
  const auto r = o.time_reversed();
  CHECK(r.t_begin() == -4.0);
  CHECK(r.t_end() == 0.0);
  CHECK(r.times[r.base_index] == 0.0);
  CHECK((r.velocities.front() + o.velocities.back()).norm() == 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) CHECK(r.times[i] > r.times[i - 1]);
  const auto s = o.slice(0.0, 2.0);
  CHECK(s.t_end() == doctest::Approx(2.0));
  CHECK(s.size() == s.curvature.size());
  const auto rb = o.rebased(o.node_at(1.0));
  CHECK(rb.times[rb.base_index] == 0.0);
  CHECK(rb.t_begin() == doctest::Approx(-1.0));
  CHECK_THROWS_AS(o.slice(1.0, 2.0), lab::LabError);
}

TEST_CASE("output grid nodes are exact multiples of dense_dt") {
  const MetricModel m = MetricModel::hyperbolic(1);
  const auto o = lab::flow::integrate_geodesic(m, {{0, 1}, {1, 0}}, 2.0, {1e-10, 0.25, 0.5});
  int flagged = 0;
  for (std::size_t i = 0; i < o.size(); ++i)
    if (o.dense[i]) {
      ++flagged;
      CHECK(std::abs(o.times[i] / 0.25 - std::round(o.times[i] / 0.25)) < 1e-12);
    }
  CHECK(flagged == 9);
}

TEST_CASE("curvature samples along the orbit") {
  const MetricModel m = MetricModel::hyperbolic(2);
  const auto o = lab::flow::integrate_geodesic(m, lab::flow::unit_state(m, {0, 1}, 1.0), 3.0);
  for (const auto& R : o.curvature) CHECK(R(0, 0) == doctest::Approx(-4.0).epsilon(1e-9));
}

TEST_CASE("chart exit gives a partial segment") {
  const MetricModel sphere = MetricModel::parse("warped:profile=sin");
  const auto o = lab::flow::integrate_geodesic(sphere, {{1.0, 0.0}, {1.0, 0.0}}, 5.0);
  CHECK(o.chart_exit);
  CHECK(o.t_end() < M_PI - 1.0 + 1e-3);
  CHECK(o.t_end() > 1.0);
}

TEST_CASE("Sasaki small-scale distance") {
  const MetricModel m = MetricModel::hyperbolic(1);
  const UnitTangentState a{{0, 1}, {1, 0}};
  CHECK(lab::flow::sasaki_distance_smallscale(m, a, a) == 0.0);
  // pure fiber rotation by h: distance ~ chord 2 sin(h/2)
  const double h = 1e-3;
  const UnitTangentState b{{0, 1}, {std::cos(h), std::sin(h)}};
  CHECK(lab::flow::sasaki_distance_smallscale(m, a, b) == doctest::Approx(2 * std::sin(h / 2)).epsilon(1e-9));
  const UnitTangentState far{{0, 1}, {0, 1}};
  try {
    lab::flow::sasaki_distance_smallscale(m, a, far);
    FAIL("expected SeparationTooLarge");
  } catch (const lab::LabError& e) {
    CHECK(e.code() == lab::ErrorCode::SeparationTooLarge);
  }
  lab::flow::SasakiVector xi{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -1.0)};
  CHECK(lab::flow::sasaki_norm(xi) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("unit states and quarter rotation") {
  for (const char* spec : {"hyperbolic:c=2", "warped:profile=cosh_mix", "conformal:c=1,eps=0.2"}) {
    const MetricModel m = MetricModel::parse(spec);
    const Vec2 p = std::string(spec).rfind("warped", 0) == 0 ? Vec2(0.7, 0.3) : Vec2(0.1, 0.9);
    for (double a : {0.0, 1.0, 2.5}) {
      const auto th = lab::flow::unit_state(m, p, a);
      const Vec2 w = lab::flow::rotate_quarter(m, p, th.v);
      CHECK(lab::flow::inner(m, p, th.v, th.v) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(lab::flow::inner(m, p, w, w) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(std::abs(lab::flow::inner(m, p, th.v, w)) < 1e-14);
      const Vec2 w2 = lab::flow::rotate_quarter(m, p, w);
      CHECK((w2 + th.v).norm() < 1e-12);
    }
  }
}

TEST_CASE("orbit CSV carries a schema line and header") {
  const MetricModel m = MetricModel::hyperbolic(1);
  const auto o = lab::flow::integrate_geodesic(m, {{0, 1}, {1, 0}}, 0.1);
  std::ostringstream os;
  lab::flow::write_orbit_csv(os, o);
  std::istringstream is(os.str());
  std::string l1, l2;
  std::getline(is, l1);
  std::getline(is, l2);
  CHECK(l1 == "# schema=orbit.v1");
  CHECK(l2 == "t,x0,x1,v0,v1,e0,e1,R11");
}
