#pragma once

#include <functional>

#include "hypow/geometry.hpp"

namespace hypow::test {

// central finite difference of a scalar function at x, per component
inline Vec finite_difference(const std::function<double(const Vec&)>& f,
                             Vec x, double h = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double dn = f(x);
    x[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

// relative agreement with an absolute escape hatch for near-zero components
inline bool grads_close(std::span<const double> got,
                        std::span<const double> want, double rel_tol,
                        double abs_tol = 1e-8) {
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double err = std::abs(got[i] - want[i]);
    const double scale = std::max(std::abs(got[i]), std::abs(want[i]));
    if (err > abs_tol && err > rel_tol * scale) return false;
  }
  return true;
}

// random point with sqrt(c)*||x|| <= max_rel
inline Vec random_ball_point(int dim, Curvature c, double max_rel, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_rel);
  Vec v(static_cast<std::size_t>(dim));
  for (double& x : v) x = g(rng);
  const double n = std::max(norm(v), 1e-12);
  const double target = c.euclidean() ? u(rng) : u(rng) / std::sqrt(c.value());
  for (double& x : v) x *= target / n;
  return v;
}

}  // namespace hypow::test
