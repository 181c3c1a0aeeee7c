#include "lab/error.hpp"
#include "lab/metric_models.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

using lab::metric::MetricModel;
using lab::metric::Vec2;

namespace {

struct Case {
  std::string spec;
  Vec2 lo, hi;  // sampling region inside the chart
};

std::vector<Case> cases() {
  return {
      {"hyperbolic:c=1", {-1, 0.5}, {1, 2}},
      {"hyperbolic:c=2", {-1, 0.5}, {1, 2}},
      {"conformal:c=1,eps=0.2", {-0.6, 0.6}, {0.6, 1.4}},
      {"conformal:c=1.5,eps=0.1,cx=0.2,cy=1.5,radius=0.7,amp=0.2", {-0.6, 0.9}, {1.0, 2.1}},
      {"warped:profile=cosh_mix,b=0.25", {0, 0}, {3, 1}},
      {"warped:profile=cosh,a=2", {-1, 0}, {1, 1}},
      {"warped:profile=sinh,a=1", {0.2, 0}, {2, 1}},
      {"warped:profile=sin", {0.3, 0}, {2.8, 1}},
      {"custom:name=poincare_disk,c=1", {-0.5, -0.5}, {0.5, 0.5}},
      {"custom:name=halfplane_fd,c=1", {-1, 0.5}, {1, 2}},
      {"custom:name=euclidean,c=1", {-1, -1}, {1, 1}},
  };
}

}  // namespace

TEST_CASE("spec strings round-trip") {
  for (const auto& c : cases()) {
    const MetricModel m = MetricModel::parse(c.spec);
    const MetricModel again = MetricModel::parse(m.spec_string());
    CHECK(again.spec_string() == m.spec_string());
    const Vec2 p = 0.5 * (c.lo + c.hi);
    CHECK(again.gaussian_curvature(p) == m.gaussian_curvature(p));
  }
}

TEST_CASE("Christoffel symbols agree with differences of the metric") {
  std::mt19937_64 gen(7);
  for (const auto& c : cases()) {
    const MetricModel m = MetricModel::parse(c.spec);
    double worst = 0.0;
    for (int n = 0; n < 50; ++n) {
      const Vec2 p(oracle::uniform(gen, c.lo.x(), c.hi.x()), oracle::uniform(gen, c.lo.y(), c.hi.y()));
      const auto gam = m.christoffel(p);
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            const double ref = oracle::christoffel_fd(m, p, k, i, j);
            worst = std::max(worst, std::abs(gam(k, i, j) - ref) / std::max(1.0, std::abs(ref)));
            CHECK(gam(k, i, j) == gam(k, j, i));
          }
    }
    INFO(c.spec);
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("Gaussian curvature agrees with the orthogonal-metric formula") {
  std::mt19937_64 gen(11);
  for (const auto& c : cases()) {
    const MetricModel m = MetricModel::parse(c.spec);
    double worst = 0.0;
    for (int n = 0; n < 30; ++n) {
      const Vec2 p(oracle::uniform(gen, c.lo.x(), c.hi.x()), oracle::uniform(gen, c.lo.y(), c.hi.y()));
      const double K = m.gaussian_curvature(p);
      worst = std::max(worst, std::abs(K - oracle::gaussian_curvature_fd(m, p)) / std::max(1.0, std::abs(K)));
    }
    INFO(c.spec);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("closed-form curvatures") {
  CHECK(MetricModel::hyperbolic(2).gaussian_curvature({0, 1}) == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(MetricModel::hyperbolic(3).gaussian_curvature({5, 0.1}) == doctest::Approx(-9.0).epsilon(1e-14));
  const MetricModel flatbump = MetricModel::parse("conformal:c=1,eps=0");
  CHECK(flatbump.gaussian_curvature({0.1, 1.0}) == -1.0);
  const MetricModel mix = MetricModel::parse("warped:profile=cosh_mix,b=0.25");
  for (double r : {0.0, 0.7, 3.0}) {
    const double f = std::cosh(r) + 0.25 * std::cosh(2 * r);
    const double f2 = std::cosh(r) + std::cosh(2 * r);
    CHECK(mix.gaussian_curvature({r, 0.4}) == doctest::Approx(-f2 / f).epsilon(1e-13));
  }
  CHECK(MetricModel::parse("warped:profile=sin").gaussian_curvature({1.0, 0.0}) == doctest::Approx(1.0));
  CHECK(MetricModel::parse("custom:name=poincare_disk").gaussian_curvature({0.2, 0.1}) ==
        doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("constant-curvature flags") {
  CHECK(MetricModel::parse("hyperbolic:c=2").constant_curvature());
  CHECK(MetricModel::parse("warped:profile=cosh,a=2").constant_curvature());
  CHECK_FALSE(MetricModel::parse("warped:profile=cosh_mix").constant_curvature());
  CHECK_FALSE(MetricModel::parse("conformal:c=1,eps=0.1").constant_curvature());
}

TEST_CASE("bump is compactly supported and smooth at the edge") {
  lab::metric::BumpSpec b;
  CHECK(lab::metric::evaluate_bump(b, {0.0, 1.0}).psi == doctest::Approx(0.1));
  CHECK(lab::metric::evaluate_bump(b, {0.5, 1.0}).psi == 0.0);
  const auto near = lab::metric::evaluate_bump(b, {0.495, 1.0});
  CHECK(near.psi < 1e-20);
  CHECK(std::abs(near.laplacian) < 1e-6);
  // gradient and laplacian against differences of psi
  const Vec2 p(0.1, 1.2);
  const double h = 1e-5;
  auto psi = [&](Vec2 q) { return lab::metric::evaluate_bump(b, q).psi; };
  const auto v = lab::metric::evaluate_bump(b, p);
  CHECK(v.grad.x() == doctest::Approx((psi(p + Vec2(h, 0)) - psi(p - Vec2(h, 0))) / (2 * h)).epsilon(1e-7));
  const double h2 = 1e-4;
  const double lap = (psi(p + Vec2(h2, 0)) + psi(p - Vec2(h2, 0)) + psi(p + Vec2(0, h2)) + psi(p - Vec2(0, h2)) -
                      4 * psi(p)) /
                     (h2 * h2);
  CHECK(v.laplacian == doctest::Approx(lap).epsilon(1e-5));
}

TEST_CASE("curvature bounds are monotone under grid refinement") {
  // a (2k-1)-point grid contains the k-point grid, so bounds can only widen
  const MetricModel m = MetricModel::parse("conformal:c=1,eps=0.2");
  const lab::metric::SamplingBox box{{-1, 0.25}, {1, 2}};
  double prev_inf = 0.0, prev_sup = -1e300;
  bool first = true;
  for (int g : {11, 21, 41, 81, 161}) {
    const auto b = lab::metric::curvature_bounds(m, box, g);
    if (!first) {
      CHECK(b.inf_K <= prev_inf);
      CHECK(b.sup_K >= prev_sup);
    }
    first = false;
    prev_inf = b.inf_K;
    prev_sup = b.sup_K;
    CHECK(b.sample_count == static_cast<long>(g) * g);
  }
}

TEST_CASE("sampled curvature constants") {
  const auto hyp = lab::metric::curvature_bounds(MetricModel::hyperbolic(1), {{-1, 0.5}, {1, 2}}, 50);
  CHECK(hyp.c == 1.0);
  CHECK(hyp.variance_K == 0.0);
  CHECK_FALSE(hyp.not_negatively_curved);
  const auto mix = lab::metric::curvature_bounds(MetricModel::parse("warped:profile=cosh_mix,b=0.25"),
                                                 {{0, 0}, {3, 1}}, 200);
  CHECK(mix.inf_K == doctest::Approx(-3.5007488).epsilon(1e-7));
  CHECK(mix.sup_K == doctest::Approx(-1.6).epsilon(1e-12));
  const auto sphere =
      lab::metric::curvature_bounds(MetricModel::parse("warped:profile=sin"), {{0.1, 0}, {3, 1}}, 20);
  CHECK(sphere.not_negatively_curved);
  CHECK(sphere.c == 0.0);
}

TEST_CASE("chart and parameter errors") {
  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const lab::LabError& e) {
      return e.code();
    }
    return lab::ErrorCode::IoError;
  };
  const MetricModel h = MetricModel::hyperbolic(1);
  CHECK(code_of([&] { h.metric_tensor({0, -1}); }) == lab::ErrorCode::PointOutsideChart);
  CHECK(code_of([&] { h.christoffel({0, 0}); }) == lab::ErrorCode::PointOutsideChart);
  CHECK(code_of([] { MetricModel::parse("hyperbolic:c=1,k=2"); }) == lab::ErrorCode::ValidationError);
  CHECK(code_of([] { MetricModel::parse("torus"); }) == lab::ErrorCode::ValidationError);
  CHECK(code_of([] { MetricModel::hyperbolic(-1); }) == lab::ErrorCode::InvalidArgument);
  CHECK(code_of([] { MetricModel::parse("conformal:cy=0.3,radius=0.5"); }) == lab::ErrorCode::InvalidArgument);
  CHECK(code_of([] { MetricModel::parse("warped:profile=sin").metric_tensor({4.0, 0.0}); }) ==
        lab::ErrorCode::PointOutsideChart);
}
