#include "hypow/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hypow {

Vec project_to_ball(Vec v, Curvature c, double margin) {
  if (!(margin > 0.0) || margin > 1e-2)
    throw std::invalid_argument("projection margin must lie in (0, 1e-2]");
  if (c.euclidean()) return v;
  const double limit = (1.0 - margin) / std::sqrt(c.value());
  const double n = norm(v);
  if (n < limit) return v;
  const double scale = limit / n;
  for (double& x : v) x *= scale;
  return v;
}

Vec exp_map0(std::span<const double> v, Curvature c, double margin) {
  if (!all_finite(v)) throw std::invalid_argument("exp_map0: non-finite input");
  Vec out(v.begin(), v.end());
  if (c.euclidean()) return out;
  const double n = norm(v);
  if (n < kSmallNorm) return out;  // tanh(s)/s -> 1
  const double s = std::sqrt(c.value()) * n;
  const double f = std::tanh(s) / s;
  for (double& x : out) x *= f;
  return project_to_ball(std::move(out), c, margin);
}

Vec mobius_add(std::span<const double> x, std::span<const double> y,
               Curvature c) {
  if (x.size() != y.size())
    throw std::invalid_argument("mobius_add: dimension mismatch");
  if (c.euclidean()) return add(x, y);
  const double cv = c.value();
  const double xy = dot(x, y);
  const double x2 = norm_sq(x);
  const double y2 = norm_sq(y);
  const double den = 1.0 + 2.0 * cv * xy + cv * cv * x2 * y2;
  const double ax = 1.0 + 2.0 * cv * xy + cv * y2;
  const double by = 1.0 - cv * x2;
  Vec out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (ax * x[i] + by * y[i]) / den;
  return project_to_ball(std::move(out), c);
}

double hyp_dist(std::span<const double> x, std::span<const double> y,
                Curvature c, DistKind kind) {
  if (std::equal(x.begin(), x.end(), y.begin(), y.end()))
    return 0.0;  // identity of indiscernibles, exactly
  if (c.euclidean()) return 2.0 * std::sqrt(dist_sq(x, y));
  const Vec u = mobius_add(negated(x), y, c);
  const double sc = std::sqrt(c.value());
  const double r = sc * norm(u);
  if (kind == DistKind::Arctan) return (2.0 / sc) * std::atan(r);
  return (2.0 / sc) * std::atanh(std::min(r, 1.0 - 1e-16));
}

double lorentz_factor(std::span<const double> x, Curvature c) {
  if (c.euclidean()) return 1.0;
  const double arg = 1.0 - c.value() * norm_sq(x);
  if (arg <= 0.0)
    throw std::domain_error("lorentz_factor: point outside the ball");
  return 1.0 / std::sqrt(arg);
}

Vec hyp_ave(std::span<const Vec> points, Curvature c) {
  if (points.empty()) throw std::invalid_argument("hyp_ave: empty input");
  const std::size_t d = points.front().size();
  Vec acc(d, 0.0);
  double wsum = 0.0;
  for (const Vec& p : points) {
    if (p.size() != d) throw std::invalid_argument("hyp_ave: dimension mismatch");
    const double g = lorentz_factor(p, c);
    axpy(g, p, acc);
    wsum += g;
  }
  for (double& v : acc) v /= wsum;
  return acc;
}

double cosine_distance(std::span<const double> x, std::span<const double> y) {
  const double nx = norm(x);
  const double ny = norm(y);
  if (nx == 0.0 || ny == 0.0)
    throw std::invalid_argument("cosine_distance: zero vector");
  return 2.0 - 2.0 * dot(x, y) / (nx * ny);
}

DistGrad dist_grad(std::span<const double> x, std::span<const double> y,
                   Curvature c) {
  DistGrad g;
  const double dsq = dist_sq(x, y);
  if (dsq < kCoincidenceTol * kCoincidenceTol) {
    g.wrt_x.assign(x.size(), 0.0);
    g.wrt_y.assign(x.size(), 0.0);
    g.subgradient = true;
    return g;
  }
  if (c.euclidean()) {
    const double inv = 2.0 / std::sqrt(dsq);
    g.wrt_x = sub(x, y);
    for (double& v : g.wrt_x) v *= inv;
    g.wrt_y = negated(g.wrt_x);
    return g;
  }
  // Gradient of the equivalent arcosh closed form
  //   d = (1/sqrt(c)) * arcosh(1 + 2c*D / (A*B)),
  // with A = 1 - c||x||^2, B = 1 - c||y||^2, D = ||x - y||^2.
  const double cv = c.value();
  const double a = 1.0 - cv * norm_sq(x);
  const double b = 1.0 - cv * norm_sq(y);
  const double gamma = 1.0 + 2.0 * cv * dsq / (a * b);
  const double root = std::sqrt(gamma * gamma - 1.0);
  const double coef = (1.0 / std::sqrt(cv)) / root * (4.0 * cv / (a * b));
  g.wrt_x.resize(x.size());
  g.wrt_y.resize(x.size());
  const double kx = cv * dsq / a;
  const double ky = cv * dsq / b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    g.wrt_x[i] = coef * (diff + kx * x[i]);
    g.wrt_y[i] = coef * (-diff + ky * y[i]);
  }
  return g;
}

Vec exp_map0_vjp(std::span<const double> v, std::span<const double> grad_z,
                 Curvature c) {
  Vec out(grad_z.begin(), grad_z.end());
  if (c.euclidean()) return out;
  const double n = norm(v);
  if (n < kSmallNorm) return out;
  const double sc = std::sqrt(c.value());
  const double s = sc * n;
  const double t = std::tanh(s);
  const double phi = t / s;
  const double dphi = ((1.0 - t * t) * s - t) / (s * s);
  const double vg = dot(v, grad_z);
  const double k = dphi * sc / n * vg;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = phi * grad_z[i] + k * v[i];
  return out;
}

BallPoint make_ball_point(Vec v, Curvature c, double margin) {
  if (!all_finite(v))
    throw std::invalid_argument("make_ball_point: non-finite input");
  return BallPoint{project_to_ball(std::move(v), c, margin), c};
}

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
  if (!(x.curv == y.curv))
    throw std::invalid_argument("mobius_add: curvature mismatch");
  return BallPoint{mobius_add(x.coords, y.coords, x.curv), x.curv};
}

double hyp_dist(const BallPoint& x, const BallPoint& y, DistKind kind) {
  if (!(x.curv == y.curv))
    throw std::invalid_argument("hyp_dist: curvature mismatch");
  return hyp_dist(x.coords, y.coords, x.curv, kind);
}

}  // namespace hypow
