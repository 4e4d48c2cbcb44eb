#include "hypow/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace hypow {
namespace {

bool detection_order(const DetectionRecord& a, const DetectionRecord& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
  if (a.box.x0 != b.box.x0) return a.box.x0 < b.box.x0;
  if (a.box.y0 != b.box.y0) return a.box.y0 < b.box.y0;
  if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
  return a.box.y1 < b.box.y1;
}

// Greedy match of detection indices `dets` (already confidence-ordered)
// against ground-truth indices `gts`; returns per-detection TP flags.
std::vector<char> greedy_flags(std::span<const DetectionRecord> detections,
                               std::span<const GtObject> ground_truth,
                               const std::vector<int>& dets,
                               const std::vector<int>& gts,
                               double iou_threshold) {
  std::vector<char> matched(ground_truth.size(), 0);
  std::vector<char> flags(dets.size(), 0);
  for (std::size_t di = 0; di < dets.size(); ++di) {
    const DetectionRecord& d = detections[static_cast<std::size_t>(dets[di])];
    double best = 0.0;
    int best_gt = -1;
    for (int gi : gts) {
      if (matched[static_cast<std::size_t>(gi)]) continue;
      const GtObject& g = ground_truth[static_cast<std::size_t>(gi)];
      if (g.scene_id != d.scene_id) continue;
      const double v = iou(d.box, g.box);
      if (v >= iou_threshold && v > best) {
        best = v;
        best_gt = gi;
      }
    }
    if (best_gt >= 0) {
      matched[static_cast<std::size_t>(best_gt)] = 1;
      flags[di] = 1;
    }
  }
  return flags;
}

}  // namespace

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::map<int, PerClassMatches> match_and_score(
    std::span<const DetectionRecord> detections,
    std::span<const GtObject> ground_truth, double iou_threshold) {
  std::map<int, std::vector<int>> dets_by_class;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].class_id == kUnknownClass) continue;
    dets_by_class[detections[i].class_id].push_back(static_cast<int>(i));
  }
  std::map<int, std::vector<int>> gts_by_class;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    if (ground_truth[i].unknown) continue;
    gts_by_class[ground_truth[i].class_id].push_back(static_cast<int>(i));
  }

  std::map<int, PerClassMatches> out;
  for (const auto& [cls, gts] : gts_by_class) out[cls].num_gt = static_cast<int>(gts.size());
  for (const auto& [cls, dets] : dets_by_class) out[cls];  // classes with detections only

  std::vector<int> classes;
  for (const auto& [cls, pm] : out) classes.push_back(cls);

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < static_cast<int>(classes.size()); ++ci) {
    const int cls = classes[static_cast<std::size_t>(ci)];
    auto dit = dets_by_class.find(cls);
    if (dit == dets_by_class.end()) continue;
    std::vector<int> dets = dit->second;
    std::sort(dets.begin(), dets.end(), [&](int a, int b) {
      return detection_order(detections[static_cast<std::size_t>(a)],
                             detections[static_cast<std::size_t>(b)]);
    });
    static const std::vector<int> kNone;
    auto git = gts_by_class.find(cls);
    const std::vector<int>& gts = git == gts_by_class.end() ? kNone : git->second;
    const std::vector<char> flags =
        greedy_flags(detections, ground_truth, dets, gts, iou_threshold);
    PerClassMatches& pm = out.find(cls)->second;
    pm.points.resize(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      pm.points[i].confidence =
          detections[static_cast<std::size_t>(dets[i])].confidence;
      pm.points[i].tp = flags[i] != 0;
    }
  }
  return out;
}

double average_precision(const PerClassMatches& matches) {
  if (matches.num_gt <= 0)
    throw std::invalid_argument("average_precision: no ground truth");
  if (matches.points.empty()) return 0.0;
  const std::size_t n = matches.points.size();
  std::vector<double> precision(n), recall(n);
  int tp = 0, fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (matches.points[i].tp) {
      ++tp;
    } else {
      ++fp;
    }
    precision[i] = static_cast<double>(tp) / (tp + fp);
    recall[i] = static_cast<double>(tp) / matches.num_gt;
  }
  // monotone envelope from the right, then sum over recall increments
  for (std::size_t i = n - 1; i > 0; --i)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

std::optional<double> u_recall(std::span<const DetectionRecord> detections,
                               std::span<const GtObject> ground_truth,
                               double iou_threshold) {
  std::vector<int> gts;
  for (std::size_t i = 0; i < ground_truth.size(); ++i)
    if (ground_truth[i].unknown) gts.push_back(static_cast<int>(i));
  if (gts.empty()) return std::nullopt;

  std::vector<int> dets;
  for (std::size_t i = 0; i < detections.size(); ++i)
    if (detections[i].class_id == kUnknownClass)
      dets.push_back(static_cast<int>(i));
  std::sort(dets.begin(), dets.end(), [&](int a, int b) {
    return detection_order(detections[static_cast<std::size_t>(a)],
                           detections[static_cast<std::size_t>(b)]);
  });
  const std::vector<char> flags =
      greedy_flags(detections, ground_truth, dets, gts, iou_threshold);
  int matched = 0;
  for (char f : flags) matched += f;
  return static_cast<double>(matched) / static_cast<double>(gts.size());
}

int a_ose(std::span<const DetectionRecord> detections,
          std::span<const GtObject> ground_truth, double iou_threshold) {
  const auto per_class = match_and_score(detections, ground_truth, iou_threshold);
  // Recover each known detection's TP flag by replaying the per-class order.
  std::vector<char> is_tp(detections.size(), 0);
  for (const auto& [cls, pm] : per_class) {
    std::vector<int> dets;
    for (std::size_t i = 0; i < detections.size(); ++i)
      if (detections[i].class_id == cls) dets.push_back(static_cast<int>(i));
    std::sort(dets.begin(), dets.end(), [&](int a, int b) {
      return detection_order(detections[static_cast<std::size_t>(a)],
                             detections[static_cast<std::size_t>(b)]);
    });
    for (std::size_t i = 0; i < dets.size(); ++i)
      is_tp[static_cast<std::size_t>(dets[i])] = pm.points[i].tp ? 1 : 0;
  }
  int count = 0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const DetectionRecord& d = detections[i];
    if (d.class_id == kUnknownClass || is_tp[i]) continue;
    for (const GtObject& g : ground_truth) {
      if (!g.unknown || g.scene_id != d.scene_id) continue;
      if (iou(d.box, g.box) >= iou_threshold) {
        ++count;
        break;
      }
    }
  }
  return count;
}

GroupedMap grouped_map(const std::map<int, double>& ap,
                       std::span<const int> previous_classes,
                       std::span<const int> current_classes) {
  auto mean_over = [&](std::span<const int> classes) -> std::optional<double> {
    double s = 0.0;
    int n = 0;
    for (int cls : classes) {
      auto it = ap.find(cls);
      if (it == ap.end()) continue;
      s += it->second;
      ++n;
    }
    if (n == 0) return std::nullopt;
    return s / n;
  };
  GroupedMap g;
  g.previous = mean_over(previous_classes);
  g.current = mean_over(current_classes).value_or(0.0);
  std::vector<int> both(previous_classes.begin(), previous_classes.end());
  both.insert(both.end(), current_classes.begin(), current_classes.end());
  g.both = mean_over(both).value_or(0.0);
  return g;
}

MetricsReport evaluate_detections(std::span<const DetectionRecord> detections,
                                  std::span<const GtObject> ground_truth,
                                  std::span<const int> previous_classes,
                                  std::span<const int> current_classes,
                                  double iou_threshold) {
  MetricsReport r;
  const auto per_class = match_and_score(detections, ground_truth, iou_threshold);
  for (const auto& [cls, pm] : per_class) {
    if (pm.num_gt > 0) r.per_class_ap[cls] = average_precision(pm);
  }
  const GroupedMap g = grouped_map(r.per_class_ap, previous_classes, current_classes);
  r.map_previous = g.previous;
  r.map_current = g.current;
  r.map_both = g.both;
  r.u_recall = u_recall(detections, ground_truth, iou_threshold);
  r.a_ose = a_ose(detections, ground_truth, iou_threshold);
  return r;
}

}  // namespace hypow
