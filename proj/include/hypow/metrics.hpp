#pragma once

#include <map>
#include <optional>

#include "hypow/scene.hpp"
#include "hypow/util.hpp"

namespace hypow {

/// Reserved class id for unknown-labeled detections and for unknown ground
/// truth in the scorer's class-agnostic pool.
inline constexpr int kUnknownClass = -1;

double iou(const Box& a, const Box& b);

struct DetectionRecord {
  int scene_id = 0;
  int class_id = kUnknownClass;  // kUnknownClass or a known class id
  double confidence = 0.0;
  Box box;
};

struct GtObject {
  int scene_id = 0;
  int class_id = -1;  // true class
  bool unknown = false;
  Box box;
};

/// One detection's contribution to a precision/recall curve.
struct PrPoint {
  double confidence = 0.0;
  bool tp = false;
};

struct PerClassMatches {
  std::vector<PrPoint> points;  // sorted by descending confidence
  int num_gt = 0;
};

/// Greedy per-class matching: detections in descending confidence order
/// (ties broken by scene_id, then box coordinates), each matched to the
/// highest-IoU unmatched ground truth of the same class in the same scene at
/// IoU >= threshold. Each ground truth matches at most once.
std::map<int, PerClassMatches> match_and_score(
    std::span<const DetectionRecord> detections,
    std::span<const GtObject> ground_truth, double iou_threshold = 0.5);

/// All-point interpolated area under the precision/recall curve (monotone
/// precision envelope, summed over recall increments).
double average_precision(const PerClassMatches& matches);

/// Fraction of unknown ground truth recovered by unknown-labeled detections
/// (class-agnostic within the unknown pool, IoU >= threshold). No unknown
/// ground truth -> reported absent.
std::optional<double> u_recall(std::span<const DetectionRecord> detections,
                               std::span<const GtObject> ground_truth,
                               double iou_threshold = 0.5);

/// Known-class detections that sit on an unknown object (IoU >= threshold)
/// without being matched to any known ground truth of their predicted class.
int a_ose(std::span<const DetectionRecord> detections,
          std::span<const GtObject> ground_truth, double iou_threshold = 0.5);

struct GroupedMap {
  std::optional<double> previous;  // absent at task 1
  double current = 0.0;
  double both = 0.0;
};

/// Means of per-class AP over classes revealed before the current task,
/// during it, and their union. Classes missing from `ap` are skipped.
GroupedMap grouped_map(const std::map<int, double>& ap,
                       std::span<const int> previous_classes,
                       std::span<const int> current_classes);

struct MetricsReport {
  int task = 1;  // 1-based
  std::optional<double> u_recall;
  std::optional<double> map_previous;
  double map_current = 0.0;
  double map_both = 0.0;
  int a_ose = 0;
  std::map<int, double> per_class_ap;
};

/// Full open-world scoring of one detection dump against one ground-truth
/// set. Per-class AP covers known classes with at least one ground truth.
MetricsReport evaluate_detections(std::span<const DetectionRecord> detections,
                                  std::span<const GtObject> ground_truth,
                                  std::span<const int> previous_classes,
                                  std::span<const int> current_classes,
                                  double iou_threshold = 0.5);

}  // namespace hypow
