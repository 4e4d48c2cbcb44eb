#include "hypow/relabel.hpp"

#include <algorithm>
#include <limits>

namespace hypow {

CentroidSet class_centroids(const ReplayBuffer& buffer, Curvature c) {
  CentroidSet out;
  for (int cls : buffer.classes()) {
    const auto& ring = buffer.entries(cls);
    std::vector<Vec> pts(ring.begin(), ring.end());
    out.by_class.emplace(cls, hyp_ave(pts, c));
  }
  return out;
}

std::optional<double> batch_threshold(std::span<const Vec> matched,
                                      const CentroidSet& centroids,
                                      Curvature c) {
  if (matched.empty() || centroids.empty()) return std::nullopt;
  std::vector<const Vec*> cents;
  cents.reserve(centroids.size());
  for (const auto& [cls, z] : centroids.by_class) cents.push_back(&z);

  const int n = static_cast<int>(matched.size());
  std::vector<double> row_max(static_cast<std::size_t>(n), 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double m = 0.0;
    for (const Vec* z : cents)
      m = std::max(m, hyp_dist(matched[static_cast<std::size_t>(i)], *z, c));
    row_max[static_cast<std::size_t>(i)] = m;
  }
  double delta = 0.0;
  for (double m : row_max) delta = std::max(delta, m);
  return delta;
}

std::vector<int> relabel_unmatched(std::span<const Vec> unmatched,
                                   const CentroidSet& centroids, double delta,
                                   Curvature c) {
  if (delta < 0.0)
    throw std::invalid_argument("relabel_unmatched: delta must be >= 0");
  if (unmatched.empty() || centroids.empty()) return {};
  std::vector<const Vec*> cents;
  cents.reserve(centroids.size());
  for (const auto& [cls, z] : centroids.by_class) cents.push_back(&z);

  const int n = static_cast<int>(unmatched.size());
  std::vector<char> in(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(static)
  for (int u = 0; u < n; ++u) {
    double dmin = hyp_dist(unmatched[static_cast<std::size_t>(u)], *cents[0], c);
    for (std::size_t j = 1; j < cents.size(); ++j)
      dmin = std::min(dmin,
                      hyp_dist(unmatched[static_cast<std::size_t>(u)], *cents[j], c));
    in[static_cast<std::size_t>(u)] = dmin <= delta ? 1 : 0;
  }
  std::vector<int> out;
  for (int u = 0; u < n; ++u)
    if (in[static_cast<std::size_t>(u)]) out.push_back(u);
  return out;
}

RelabelDecision decide_relabel(std::span<const Vec> matched,
                               std::span<const Vec> unmatched,
                               const CentroidSet& centroids, Curvature c,
                               RelabelMode mode) {
  RelabelDecision d;
  switch (mode) {
    case RelabelMode::Off:
      return d;
    case RelabelMode::AllUnmatched:
      d.relabeled.resize(unmatched.size());
      for (std::size_t u = 0; u < unmatched.size(); ++u)
        d.relabeled[u] = static_cast<int>(u);
      return d;
    case RelabelMode::Adaptive: {
      const auto delta = batch_threshold(matched, centroids, c);
      if (!delta) {
        d.skipped = true;  // no matched known query this step
        return d;
      }
      d.delta = *delta;
      d.relabeled = relabel_unmatched(unmatched, centroids, d.delta, c);
      return d;
    }
  }
  return d;
}

namespace ref {

std::optional<double> batch_threshold(std::span<const Vec> matched,
                                      const CentroidSet& centroids,
                                      Curvature c) {
  if (matched.empty() || centroids.empty()) return std::nullopt;
  double delta = 0.0;
  for (const Vec& m : matched) {
    for (const auto& [cls, z] : centroids.by_class)
      delta = std::max(delta, hyp_dist(m, z, c));
  }
  return delta;
}

std::vector<int> relabel_unmatched(std::span<const Vec> unmatched,
                                   const CentroidSet& centroids, double delta,
                                   Curvature c) {
  if (delta < 0.0)
    throw std::invalid_argument("relabel_unmatched: delta must be >= 0");
  std::vector<int> out;
  if (centroids.empty()) return out;
  for (std::size_t u = 0; u < unmatched.size(); ++u) {
    double dmin = std::numeric_limits<double>::infinity();
    for (const auto& [cls, z] : centroids.by_class)
      dmin = std::min(dmin, hyp_dist(unmatched[u], z, c));
    if (dmin <= delta) out.push_back(static_cast<int>(u));
  }
  return out;
}

}  // namespace ref
}  // namespace hypow
