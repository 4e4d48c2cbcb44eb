#include <doctest.h>

#include <cmath>

#include "hypow/geometry.hpp"
#include "support/test_support.hpp"

using namespace hypow;
using hypow::test::finite_difference;
using hypow::test::grads_close;
using hypow::test::random_ball_point;

TEST_CASE("exp_map0 basics") {
  const Curvature c01(0.1);
  CHECK(exp_map0(Vec{0, 0, 0}, c01) == Vec{0, 0, 0});

  // closed form at v = (1, 0), c = 1
  const Vec z = exp_map0(Vec{1, 0}, Curvature(1.0));
  CHECK(z[0] == doctest::Approx(std::tanh(1.0)).epsilon(1e-12));  // 0.76159...
  CHECK(z[1] == 0.0);

  // Euclidean degenerate case
  CHECK(exp_map0(Vec{3, 4}, Curvature(0.0)) == Vec{3, 4});

  // tiny norms short-circuit to the Taylor limit
  const Vec tiny{1e-15, 0};
  CHECK(exp_map0(tiny, c01) == tiny);

  CHECK_THROWS_AS(exp_map0(Vec{std::nan(""), 0}, c01), std::invalid_argument);

  // huge tangents stay strictly inside the ball
  const Vec far = exp_map0(Vec{1e9, -1e9}, Curvature(1.0));
  CHECK(norm_sq(far) < 1.0);
}

TEST_CASE("mobius_add identities and hand value") {
  const Curvature c1(1.0);
  const Vec y{0.3, -0.2};
  CHECK(mobius_add(Vec{0, 0}, y, c1) == y);

  const Vec zero = mobius_add(Vec{0.5, 0}, Vec{-0.5, 0}, c1);
  CHECK(norm(zero) == doctest::Approx(0.0).epsilon(1e-15));

  // hand evaluation: numerator -1.25, denominator 1.5625
  const Vec m = mobius_add(Vec{-0.5, 0}, Vec{-0.5, 0}, c1);
  CHECK(m[0] == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(m[1] == 0.0);

  // curvature mismatch via the checked domain type
  const BallPoint a = make_ball_point(Vec{0.1, 0.1}, Curvature(0.2));
  const BallPoint b = make_ball_point(Vec{0.1, 0.1}, Curvature(0.5));
  CHECK_THROWS_AS(mobius_add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(hyp_dist(a, b), std::invalid_argument);
}

TEST_CASE("hyp_dist examples") {
  const Curvature c1(1.0);
  const Vec x{0.5, 0};
  const Vec y{-0.5, 0};
  CHECK(hyp_dist(x, x, c1) == 0.0);
  CHECK(hyp_dist(x, y, c1) == doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-12));

  // c -> 0 recovers twice the Euclidean distance
  const Vec a{0.3, 0};
  const Vec b{0.1, 0.2};
  CHECK(hyp_dist(a, b, Curvature(1e-8)) ==
        doctest::Approx(2.0 * std::sqrt(0.08)).epsilon(1e-6));
  CHECK(hyp_dist(a, b, Curvature(0.0)) ==
        doctest::Approx(2.0 * std::sqrt(0.08)).epsilon(1e-12));
}

TEST_CASE("metric axioms and translation invariance on random points") {
  Rng rng(11);
  for (const double cv : {0.1, 0.2, 0.5, 1.0}) {
    const Curvature c(cv);
    for (int i = 0; i < 300; ++i) {
      const Vec x = random_ball_point(6, c, 0.9, rng);
      const Vec y = random_ball_point(6, c, 0.9, rng);
      const Vec z = random_ball_point(6, c, 0.9, rng);
      const double dxy = hyp_dist(x, y, c);
      CHECK(dxy == doctest::Approx(hyp_dist(y, x, c)).epsilon(1e-9));
      if (dist_sq(x, y) > 1e-16) CHECK(dxy > 0.0);
      CHECK(hyp_dist(x, z, c) <= hyp_dist(x, y, c) + hyp_dist(y, z, c) + 1e-7);
    }
    for (int i = 0; i < 300; ++i) {
      const Vec a = random_ball_point(6, c, 0.7, rng);
      const Vec x = random_ball_point(6, c, 0.7, rng);
      const Vec y = random_ball_point(6, c, 0.7, rng);
      const double base = hyp_dist(x, y, c);
      const double moved = hyp_dist(mobius_add(a, x, c), mobius_add(a, y, c), c);
      CHECK(std::abs(base - moved) < 1e-6);
    }
  }
}

TEST_CASE("arctan variant: translation-invariant too, but fails exp-map consistency") {
  Rng rng(13);
  const Curvature c(1.0);
  // gyrations are orthogonal: any radial function of the Mobius difference
  // norm is translation invariant, arctan included
  double worst_invariance = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Vec a = random_ball_point(4, c, 0.7, rng);
    const Vec x = random_ball_point(4, c, 0.7, rng);
    const Vec y = random_ball_point(4, c, 0.7, rng);
    const double base = hyp_dist(x, y, c, DistKind::Arctan);
    const double moved = hyp_dist(mobius_add(a, x, c), mobius_add(a, y, c), c,
                                  DistKind::Arctan);
    worst_invariance = std::max(worst_invariance, std::abs(base - moved));
  }
  CHECK(worst_invariance < 1e-9);

  // what does separate the variants: d(0, exp0(v)) = 2||v|| holds exactly
  // for artanh and fails for arctan
  const Vec v{0.4, -0.3};
  const Vec origin{0.0, 0.0};
  const Vec z = exp_map0(v, c);
  CHECK(hyp_dist(origin, z, c, DistKind::Artanh) ==
        doctest::Approx(2.0 * norm(v)).epsilon(1e-12));
  CHECK(std::abs(hyp_dist(origin, z, c, DistKind::Arctan) - 2.0 * norm(v)) >
        1e-2);
}

TEST_CASE("lorentz_factor") {
  CHECK(lorentz_factor(Vec{0, 0}, Curvature(1.0)) == 1.0);
  CHECK(lorentz_factor(Vec{0.6, 0}, Curvature(1.0)) ==
        doctest::Approx(1.25).epsilon(1e-12));
  CHECK(lorentz_factor(Vec{123.0, -4.0}, Curvature(0.0)) == 1.0);
  CHECK_THROWS_AS(lorentz_factor(Vec{1.5, 0}, Curvature(1.0)),
                  std::domain_error);
}

TEST_CASE("hyp_ave") {
  const Curvature c1(1.0);
  const std::vector<Vec> single{{0.2, -0.1}};
  CHECK(hyp_ave(single, c1) == single[0]);

  // equal norms give equal Lorentz weights: the arithmetic midpoint
  const std::vector<Vec> pair{{0.4, 0.0}, {0.0, 0.4}};
  const Vec mid = hyp_ave(pair, c1);
  CHECK(mid[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(mid[1] == doctest::Approx(0.2).epsilon(1e-12));

  // hand evaluation with gamma = 1.25 and 1
  const std::vector<Vec> two{{0.6, 0.0}, {0.0, 0.0}};
  const Vec ave = hyp_ave(two, c1);
  CHECK(ave[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(ave[1] == 0.0);

  CHECK_THROWS_AS(hyp_ave(std::vector<Vec>{}, c1), std::invalid_argument);

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    std::vector<Vec> pts;
    for (int j = 0; j < 5; ++j)
      pts.push_back(random_ball_point(4, c1, 0.999, rng));
    CHECK(norm_sq(hyp_ave(pts, c1)) < 1.0);
  }
}

TEST_CASE("project_to_ball") {
  const Curvature c1(1.0);
  const Vec inside{0.3, 0.4};
  CHECK(project_to_ball(inside, c1) == inside);

  const Vec projected = project_to_ball(Vec{10, 0}, c1, 1e-5);
  CHECK(norm(projected) == doctest::Approx(1.0 - 1e-5).epsilon(1e-12));

  CHECK(project_to_ball(Vec{10, 0}, Curvature(0.0)) == Vec{10, 0});
  CHECK_THROWS_AS(project_to_ball(Vec{1, 0}, c1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(project_to_ball(Vec{1, 0}, c1, 0.5), std::invalid_argument);
}

TEST_CASE("cosine identity (normalized Euclidean vs cosine distance)") {
  Rng rng(5);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int i = 0; i < 500; ++i) {
    Vec x(6), y(6);
    for (double& v : x) v = g(rng);
    for (double& v : y) v = g(rng);
    if (norm(x) < 1e-3 || norm(y) < 1e-3) continue;
    const Vec xn = scaled(x, 1.0 / norm(x));
    const Vec yn = scaled(y, 1.0 / norm(y));
    CHECK(4.0 * dist_sq(xn, yn) ==
          doctest::Approx(4.0 * cosine_distance(x, y)).epsilon(1e-9));
  }
}

TEST_CASE("dist_grad matches finite differences") {
  Rng rng(17);
  int checked = 0;
  for (const double cv : {0.0, 0.1, 0.2, 0.5}) {
    const Curvature c(cv);
    for (int i = 0; i < 120; ++i) {
      const Vec x = random_ball_point(5, c, 0.85, rng);
      const Vec y = random_ball_point(5, c, 0.85, rng);
      if (dist_sq(x, y) < 1e-4) continue;
      const DistGrad g = dist_grad(x, y, c);
      const Vec fx = finite_difference(
          [&](const Vec& p) { return hyp_dist(p, y, c); }, x);
      const Vec fy = finite_difference(
          [&](const Vec& p) { return hyp_dist(x, p, c); }, y);
      CHECK(grads_close(g.wrt_x, fx, 1e-4));
      CHECK(grads_close(g.wrt_y, fy, 1e-4));
      ++checked;
    }
  }
  CHECK(checked > 400);
}

TEST_CASE("dist_grad structure") {
  // Euclidean case: 2 (x - y) / ||x - y||
  const Vec x{1.0, 2.0};
  const Vec y{0.0, 0.0};
  const DistGrad g = dist_grad(x, y, Curvature(0.0));
  const double n = std::sqrt(5.0);
  CHECK(g.wrt_x[0] == doctest::Approx(2.0 / n).epsilon(1e-12));
  CHECK(g.wrt_x[1] == doctest::Approx(4.0 / n).epsilon(1e-12));

  // symmetry: d(x, y) = d(y, x)
  Rng rng(23);
  const Curvature c(0.3);
  const Vec a = random_ball_point(4, c, 0.8, rng);
  const Vec b = random_ball_point(4, c, 0.8, rng);
  const DistGrad gab = dist_grad(a, b, c);
  const DistGrad gba = dist_grad(b, a, c);
  CHECK(grads_close(gab.wrt_y, gba.wrt_x, 1e-12));

  // coincidence: zero subgradient
  const DistGrad at = dist_grad(a, a, c);
  CHECK(at.subgradient);
  CHECK(norm(at.wrt_x) == 0.0);
  CHECK(norm(at.wrt_y) == 0.0);
}

TEST_CASE("exp_map0_vjp matches finite differences") {
  Rng rng(29);
  std::normal_distribution<double> g(0.0, 1.5);
  for (const double cv : {0.0, 0.1, 0.5}) {
    const Curvature c(cv);
    for (int i = 0; i < 60; ++i) {
      Vec v(4), upstream(4);
      for (double& t : v) t = g(rng);
      for (double& t : upstream) t = g(rng);
      const Vec got = exp_map0_vjp(v, upstream, c);
      const Vec want = finite_difference(
          [&](const Vec& p) { return dot(exp_map0(p, c), upstream); }, v);
      CHECK(grads_close(got, want, 1e-5));
    }
  }
}

TEST_CASE("artanh route agrees with the arcosh closed form") {
  Rng rng(31);
  for (int i = 0; i < 300; ++i) {
    const Curvature c(0.1 + 0.3 * (i % 3));
    const Vec x = random_ball_point(5, c, 0.9, rng);
    const Vec y = random_ball_point(5, c, 0.9, rng);
    const double cv = c.value();
    const double a = 1.0 - cv * norm_sq(x);
    const double b = 1.0 - cv * norm_sq(y);
    const double gamma = 1.0 + 2.0 * cv * dist_sq(x, y) / (a * b);
    const double arcosh_form = std::acosh(gamma) / std::sqrt(cv);
    CHECK(hyp_dist(x, y, c) == doctest::Approx(arcosh_form).epsilon(1e-10));
  }
}
