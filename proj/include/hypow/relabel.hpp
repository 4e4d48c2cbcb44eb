#pragma once

#include <map>
#include <optional>

#include "hypow/geometry.hpp"
#include "hypow/memory.hpp"

namespace hypow {

/// Per-class hyperbolic centroids computed from the replay buffer. Contains
/// exactly the classes with nonempty buffer entries.
struct CentroidSet {
  std::map<int, Vec> by_class;

  bool empty() const { return by_class.empty(); }
  std::size_t size() const { return by_class.size(); }
};

CentroidSet class_centroids(const ReplayBuffer& buffer, Curvature c);

/// delta_B: the greatest distance from any matched embedding to any class
/// centroid (double max). Nothing to measure -> nullopt.
std::optional<double> batch_threshold(std::span<const Vec> matched,
                                      const CentroidSet& centroids,
                                      Curvature c);

/// Indices u (ascending) with min_c dist(z_u, centroid_c) <= delta; ties at
/// equality are included.
std::vector<int> relabel_unmatched(std::span<const Vec> unmatched,
                                   const CentroidSet& centroids, double delta,
                                   Curvature c);

enum class RelabelMode { Adaptive, AllUnmatched, Off };

struct RelabelDecision {
  double delta = 0.0;
  std::vector<int> relabeled;  // ascending indices into the unmatched set
  bool skipped = false;        // adaptive mode with no matched known query
};

/// Applies the configured relabeling rule to one group of queries.
RelabelDecision decide_relabel(std::span<const Vec> matched,
                               std::span<const Vec> unmatched,
                               const CentroidSet& centroids, Curvature c,
                               RelabelMode mode);

namespace ref {
// serial references for the parallel kernels above
std::optional<double> batch_threshold(std::span<const Vec> matched,
                                      const CentroidSet& centroids,
                                      Curvature c);
std::vector<int> relabel_unmatched(std::span<const Vec> unmatched,
                                   const CentroidSet& centroids, double delta,
                                   Curvature c);
}  // namespace ref

}  // namespace hypow
