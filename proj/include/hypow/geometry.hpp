#pragma once

#include <span>

#include "hypow/util.hpp"

namespace hypow {

// Projection margin keeping points strictly inside the open ball, and the
// norm cutoff below which Taylor limits replace the curved formulas.
inline constexpr double kBallMargin = 1e-5;
inline constexpr double kSmallNorm = 1e-12;
// Below this separation the distance gradient degenerates; a zero
// subgradient is returned instead.
inline constexpr double kCoincidenceTol = 1e-12;

/// Curvature constant of the Poincare ball B_c = {x : c*||x||^2 < 1}.
/// c == 0 selects the Euclidean degenerate case, which is implemented as an
/// explicit code path rather than as a limit of the curved formulas.
class Curvature {
 public:
  Curvature() = default;
  explicit Curvature(double c) : c_(c) {
    if (!std::isfinite(c) || c < 0.0)
      throw std::invalid_argument("curvature must be finite and >= 0");
  }
  double value() const { return c_; }
  bool euclidean() const { return c_ == 0.0; }

  friend bool operator==(const Curvature& a, const Curvature& b) {
    return a.c_ == b.c_;
  }

 private:
  double c_ = 0.0;
};

/// If c*||v||^2 < (1 - margin)^2 returns v unchanged, otherwise rescales v to
/// norm (1 - margin)/sqrt(c). For c == 0 the ball is all of space.
Vec project_to_ball(Vec v, Curvature c, double margin = kBallMargin);

/// Exponential map at the origin: tanh(sqrt(c)*||v||) * v / (sqrt(c)*||v||).
/// Identity for c == 0; for ||v|| below the small-norm cutoff the Taylor
/// limit applies and v is returned as is.
Vec exp_map0(std::span<const double> v, Curvature c,
             double margin = kBallMargin);

/// Mobius (gyrovector) addition on the ball; the result is re-projected into
/// the open ball with the standard margin.
Vec mobius_add(std::span<const double> x, std::span<const double> y,
               Curvature c);

/// The Arctan variant exists only for comparison runs: the printed formula
/// with arctan breaks translation invariance, which `geom-check --arctan`
/// demonstrates. Everything else uses Artanh.
enum class DistKind { Artanh, Arctan };

/// Ball distance (2/sqrt(c)) * artanh(sqrt(c) * ||(-x) (+) y||);
/// 2*||x - y|| for c == 0.
double hyp_dist(std::span<const double> x, std::span<const double> y,
                Curvature c, DistKind kind = DistKind::Artanh);

/// Lorentz factor 1/sqrt(1 - c*||x||^2); throws std::domain_error when the
/// root argument is <= 0 (the point lies outside the ball).
double lorentz_factor(std::span<const double> x, Curvature c);

/// Lorentz-factor-weighted mean of ball points (HypAve). The result is a
/// convex combination, hence inside the ball.
Vec hyp_ave(std::span<const Vec> points, Curvature c);

/// 2 - 2 <x,y> / (||x|| * ||y||).
double cosine_distance(std::span<const double> x, std::span<const double> y);

struct DistGrad {
  Vec wrt_x;
  Vec wrt_y;
  bool subgradient = false;  // true when x == y within tolerance
};

/// Analytic partials of hyp_dist with respect to both arguments. At
/// coincidence returns zero vectors flagged as a subgradient.
DistGrad dist_grad(std::span<const double> x, std::span<const double> y,
                   Curvature c);

/// Pullback of an embedding-space gradient through exp_map0: given
/// d(loss)/d(z) at z = exp_map0(v), returns d(loss)/d(v). The ball
/// projection is treated as identity in the backward pass.
Vec exp_map0_vjp(std::span<const double> v, std::span<const double> grad_z,
                 Curvature c);

/// Checked domain type: a point paired with the ball it lives in. The
/// span-level functions above are the hot path; this wrapper is the
/// boundary-facing API with curvature-mismatch checking.
struct BallPoint {
  Vec coords;
  Curvature curv;
};

/// Projects v into the ball of curvature c.
BallPoint make_ball_point(Vec v, Curvature c, double margin = kBallMargin);

BallPoint mobius_add(const BallPoint& x, const BallPoint& y);
double hyp_dist(const BallPoint& x, const BallPoint& y,
                DistKind kind = DistKind::Artanh);

}  // namespace hypow
