#include "hypow/geom_check.hpp"

#include <algorithm>
#include <cmath>

namespace hypow {
namespace {

// random point with sqrt(c)*||x|| <= max_rel (away from the projection wall
// so translation results stay undistorted)
Vec random_ball_point(int dim, Curvature c, double max_rel, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_rel);
  Vec v(static_cast<std::size_t>(dim));
  for (double& x : v) x = g(rng);
  const double n = norm(v);
  const double target =
      c.euclidean() ? u(rng) : u(rng) / std::sqrt(c.value());
  for (double& x : v) x *= target / std::max(n, 1e-12);
  return v;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace

GeomCheckReport run_geometry_checks(std::uint64_t seed, int trials,
                                    DistKind kind) {
  GeomCheckReport report;
  Rng rng(seed);
  const int dim = 8;
  const Curvature curvs[] = {Curvature(0.0), Curvature(0.1), Curvature(0.2),
                             Curvature(0.5), Curvature(1.0)};

  auto record = [&](const std::string& name, double worst, double tol) {
    report.lines.push_back({name, worst <= tol, worst, tol});
  };

  {  // metric axioms: symmetry, identity, positivity
    double worst_sym = 0.0, worst_id = 0.0;
    bool positive = true;
    for (int i = 0; i < trials; ++i) {
      const Curvature c = curvs[i % 5];
      const Vec x = random_ball_point(dim, c, 0.9, rng);
      const Vec y = random_ball_point(dim, c, 0.9, rng);
      const double dxy = hyp_dist(x, y, c, kind);
      const double dyx = hyp_dist(y, x, c, kind);
      worst_sym = std::max(worst_sym, rel_err(dxy, dyx));
      worst_id = std::max(worst_id, hyp_dist(x, x, c, kind));
      if (dist_sq(x, y) > 1e-20 && !(dxy > 0.0)) positive = false;
    }
    record("metric symmetry (rel)", worst_sym, 1e-9);
    record("metric identity d(x,x)=0", worst_id, 1e-9);
    report.lines.push_back({"metric positivity", positive, positive ? 0.0 : 1.0, 0.0});
  }

  {  // triangle inequality
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
      const Curvature c = curvs[i % 5];
      const Vec x = random_ball_point(dim, c, 0.9, rng);
      const Vec y = random_ball_point(dim, c, 0.9, rng);
      const Vec z = random_ball_point(dim, c, 0.9, rng);
      const double slack = hyp_dist(x, z, c, kind) -
                           (hyp_dist(x, y, c, kind) + hyp_dist(y, z, c, kind));
      worst = std::max(worst, slack);
    }
    record("triangle inequality", worst, 1e-7);
  }

  {  // ball closure of exp map, Mobius addition, hyperbolic average
    double worst = -1.0;
    std::normal_distribution<double> g(0.0, 4.0);
    for (int i = 0; i < trials; ++i) {
      const Curvature c = curvs[1 + i % 4];  // curved cases
      Vec v(static_cast<std::size_t>(dim));
      for (double& t : v) t = g(rng);
      const Vec z = exp_map0(v, c);
      const Vec a = random_ball_point(dim, c, 0.999, rng);
      const Vec b = random_ball_point(dim, c, 0.999, rng);
      const Vec m = mobius_add(a, b, c);
      const std::vector<Vec> pts = {a, b, z};
      const Vec h = hyp_ave(pts, c);
      const double cv = c.value();
      worst = std::max({worst, cv * norm_sq(z) - 1.0, cv * norm_sq(m) - 1.0,
                        cv * norm_sq(h) - 1.0});
    }
    record("ball closure c||z||^2 < 1", worst, -1e-12);
  }

  {  // Mobius translation invariance
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
      const Curvature c = curvs[1 + i % 4];
      const Vec a = random_ball_point(dim, c, 0.7, rng);
      const Vec x = random_ball_point(dim, c, 0.7, rng);
      const Vec y = random_ball_point(dim, c, 0.7, rng);
      const double base = hyp_dist(x, y, c, kind);
      const double moved =
          hyp_dist(mobius_add(a, x, c), mobius_add(a, y, c), c, kind);
      worst = std::max(worst, std::abs(base - moved));
    }
    record("Mobius translation invariance", worst, 1e-6);
  }

  {  // exp-map consistency: d(0, exp0(v)) = 2 ||v||. This is the check that
     // separates artanh from the printed arctan variant; translation
     // invariance cannot (gyrations are orthogonal, so any radial function
     // of the Mobius difference norm is translation invariant).
    double worst = 0.0;
    std::normal_distribution<double> g(0.0, 0.8);
    for (int i = 0; i < trials; ++i) {
      const Curvature c = curvs[1 + i % 4];
      Vec v(static_cast<std::size_t>(dim));
      for (double& t : v) t = g(rng);
      const Vec origin(static_cast<std::size_t>(dim), 0.0);
      const double d = hyp_dist(origin, exp_map0(v, c), c, kind);
      worst = std::max(worst, rel_err(d, 2.0 * norm(v)));
    }
    record("exp-map consistency d(0,exp(v)) = 2||v|| (rel)", worst, 1e-9);
  }

  {  // c -> 0 limit against twice the Euclidean distance
    double worst = 0.0;
    const Curvature tiny(1e-8);
    for (int i = 0; i < trials; ++i) {
      const Vec x = random_ball_point(dim, Curvature(4.0), 1.0, rng);  // norm <= 0.5
      const Vec y = random_ball_point(dim, Curvature(4.0), 1.0, rng);
      const double d = hyp_dist(x, y, tiny, kind);
      worst = std::max(worst, std::abs(d - 2.0 * std::sqrt(dist_sq(x, y))));
    }
    record("c->0 limit |d - 2||x-y|||", worst, 1e-5);
  }

  {  // cosine identity: 4 * ||x/||x|| - y/||y||||^2 == 4 * d_cos(x, y)
    double worst = 0.0;
    std::normal_distribution<double> g(0.0, 2.0);
    for (int i = 0; i < trials; ++i) {
      Vec x(static_cast<std::size_t>(dim)), y(static_cast<std::size_t>(dim));
      for (double& t : x) t = g(rng);
      for (double& t : y) t = g(rng);
      if (norm(x) < 1e-6 || norm(y) < 1e-6) continue;
      const Vec xn = scaled(x, 1.0 / norm(x));
      const Vec yn = scaled(y, 1.0 / norm(y));
      const double lhs = 4.0 * dist_sq(xn, yn);
      const double rhs = 4.0 * cosine_distance(x, y);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    record("cosine identity", worst, 1e-9);
  }

  {  // analytic distance gradient against central differences
    double worst = 0.0;
    const double h = 1e-6;
    for (int i = 0; i < std::max(200, trials / 4); ++i) {
      const Curvature c = curvs[i % 4];  // includes c = 0
      Vec x = random_ball_point(dim, c, 0.8, rng);
      Vec y = random_ball_point(dim, c, 0.8, rng);
      if (dist_sq(x, y) < 1e-4) continue;
      const DistGrad g = dist_grad(x, y, c);
      for (int k = 0; k < dim; ++k) {
        const double keep = x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(k)] = keep + h;
        const double up = hyp_dist(x, y, c);
        x[static_cast<std::size_t>(k)] = keep - h;
        const double dn = hyp_dist(x, y, c);
        x[static_cast<std::size_t>(k)] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double a = g.wrt_x[static_cast<std::size_t>(k)];
        const double err =
            std::abs(a - fd) / std::max({1e-2, std::abs(a), std::abs(fd)});
        worst = std::max(worst, err);
      }
    }
    record("dist_grad vs finite differences (rel)", worst, 1e-4);
  }

  return report;
}

}  // namespace hypow
