#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hypow/metrics.hpp"

using namespace hypow;

namespace {

Box box(double x0, double y0, double x1, double y1) { return Box{x0, y0, x1, y1}; }

DetectionRecord det(int scene, int cls, double conf, const Box& b) {
  return DetectionRecord{scene, cls, conf, b};
}

GtObject gt(int scene, int cls, bool unknown, const Box& b) {
  return GtObject{scene, cls, unknown, b};
}

// test-only reimplementation of the greedy-by-confidence rule with plain
// exhaustive pair scans, no shared code with the production matcher
std::vector<char> oracle_flags(std::vector<DetectionRecord> dets,
                               const std::vector<GtObject>& gts,
                               double thr) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const DetectionRecord& a, const DetectionRecord& b) {
                     if (a.confidence != b.confidence)
                       return a.confidence > b.confidence;
                     if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
                     if (a.box.x0 != b.box.x0) return a.box.x0 < b.box.x0;
                     if (a.box.y0 != b.box.y0) return a.box.y0 < b.box.y0;
                     if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
                     return a.box.y1 < b.box.y1;
                   });
  std::vector<char> taken(gts.size(), 0);
  std::vector<char> flags(dets.size(), 0);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    double best = 0;
    int pick = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].unknown) continue;
      if (gts[g].class_id != dets[d].class_id) continue;
      if (gts[g].scene_id != dets[d].scene_id) continue;
      const double v = iou(dets[d].box, gts[g].box);
      if (v >= thr && v > best) {
        best = v;
        pick = static_cast<int>(g);
      }
    }
    if (pick >= 0) {
      taken[static_cast<std::size_t>(pick)] = 1;
      flags[d] = 1;
    }
  }
  return flags;
}

}  // namespace

TEST_CASE("iou") {
  const Box unit = box(0, 0, 1, 1);
  CHECK(iou(unit, unit) == 1.0);
  CHECK(iou(box(0, 0, 0.2, 0.2), box(0.5, 0.5, 0.9, 0.9)) == 0.0);
  CHECK(iou(unit, box(0, 0, 0.5, 1)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("match_and_score basics") {
  const Box b = box(0.1, 0.1, 0.4, 0.4);
  const std::vector<GtObject> gts{gt(0, 1, false, b)};

  // one overlapping correct detection: one TP, zero FP
  {
    const std::vector<DetectionRecord> dets{det(0, 1, 0.9, b)};
    const auto m = match_and_score(dets, gts);
    REQUIRE(m.count(1));
    CHECK(m.at(1).num_gt == 1);
    REQUIRE(m.at(1).points.size() == 1);
    CHECK(m.at(1).points[0].tp);
  }
  // a duplicate on the same ground truth: one TP plus one FP
  {
    const std::vector<DetectionRecord> dets{det(0, 1, 0.9, b), det(0, 1, 0.8, b)};
    const auto m = match_and_score(dets, gts);
    CHECK(m.at(1).points[0].tp);
    CHECK(!m.at(1).points[1].tp);
  }
  // wrong scene: no match
  {
    const std::vector<DetectionRecord> dets{det(7, 1, 0.9, b)};
    const auto m = match_and_score(dets, gts);
    CHECK(!m.at(1).points[0].tp);
  }
}

TEST_CASE("hand-built three-object scene equals the exhaustive oracle") {
  const std::vector<GtObject> gts{
      gt(0, 1, false, box(0.0, 0.0, 0.3, 0.3)),
      gt(0, 1, false, box(0.25, 0.0, 0.55, 0.3)),
      gt(0, 2, false, box(0.6, 0.6, 0.9, 0.9)),
  };
  const std::vector<DetectionRecord> dets{
      det(0, 1, 0.95, box(0.02, 0.0, 0.32, 0.3)),   // overlaps both class-1 gts
      det(0, 1, 0.90, box(0.24, 0.0, 0.54, 0.3)),
      det(0, 2, 0.85, box(0.61, 0.6, 0.91, 0.9)),
      det(0, 2, 0.40, box(0.6, 0.6, 0.9, 0.9)),     // duplicate
  };
  const auto m = match_and_score(dets, gts);
  const auto oracle = oracle_flags(dets, gts, 0.5);
  std::vector<char> got;
  for (const auto& p : m.at(1).points) got.push_back(p.tp);
  for (const auto& p : m.at(2).points) got.push_back(p.tp);
  CHECK(got == oracle);
}

TEST_CASE("average precision") {
  // all TPs over all ground truth
  {
    PerClassMatches m;
    m.num_gt = 3;
    m.points = {{0.9, true}, {0.8, true}, {0.7, true}};
    CHECK(average_precision(m) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // no TPs
  {
    PerClassMatches m;
    m.num_gt = 2;
    m.points = {{0.9, false}, {0.8, false}};
    CHECK(average_precision(m) == 0.0);
  }
  // the interpolated-envelope hand case: TP, FP, TP over 2 GT
  {
    PerClassMatches m;
    m.num_gt = 2;
    m.points = {{0.9, true}, {0.8, false}, {0.7, true}};
    CHECK(average_precision(m) ==
          doctest::Approx(0.5 + 0.5 * (2.0 / 3.0)).epsilon(1e-12));
  }
  {
    PerClassMatches empty;
    empty.num_gt = 0;
    CHECK_THROWS_AS(average_precision(empty), std::invalid_argument);
  }
}

TEST_CASE("AP is invariant under monotone confidence transforms") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    PerClassMatches m;
    m.num_gt = 5;
    for (int i = 0; i < 10; ++i) m.points.push_back({0.0, u(rng) < 0.4});
    // descending synthetic confidences
    for (std::size_t i = 0; i < m.points.size(); ++i)
      m.points[i].confidence = 1.0 - 0.05 * static_cast<double>(i);
    const double base = average_precision(m);
    PerClassMatches squashed = m;
    for (auto& p : squashed.points)
      p.confidence = std::tanh(3.0 * p.confidence);  // strictly monotone
    CHECK(average_precision(squashed) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("u_recall") {
  const Box b1 = box(0.0, 0.0, 0.3, 0.3);
  const Box b2 = box(0.4, 0.4, 0.7, 0.7);
  const Box b3 = box(0.0, 0.6, 0.3, 0.9);

  // no unknown ground truth: reported absent, not zero
  {
    const std::vector<GtObject> gts{gt(0, 1, false, b1)};
    CHECK(!u_recall(std::vector<DetectionRecord>{}, gts).has_value());
  }
  // every unknown covered
  {
    const std::vector<GtObject> gts{gt(0, 8, true, b1), gt(0, 9, true, b2)};
    const std::vector<DetectionRecord> dets{det(0, kUnknownClass, 0.9, b1),
                                            det(0, kUnknownClass, 0.8, b2)};
    CHECK(*u_recall(dets, gts) == 1.0);
  }
  // hand scene: 2 of 3 unknowns found
  {
    const std::vector<GtObject> gts{gt(0, 8, true, b1), gt(0, 9, true, b2),
                                    gt(0, 8, true, b3)};
    const std::vector<DetectionRecord> dets{det(0, kUnknownClass, 0.9, b1),
                                            det(0, kUnknownClass, 0.8, b2)};
    CHECK(*u_recall(dets, gts) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  // known-labeled detections never count toward unknown recall
  {
    const std::vector<GtObject> gts{gt(0, 8, true, b1)};
    const std::vector<DetectionRecord> dets{det(0, 3, 0.99, b1)};
    CHECK(*u_recall(dets, gts) == 0.0);
  }
}

TEST_CASE("a_ose") {
  const Box known_box = box(0.0, 0.0, 0.3, 0.3);
  const Box unknown_box = box(0.5, 0.5, 0.8, 0.8);

  // no unknown ground truth
  {
    const std::vector<GtObject> gts{gt(0, 1, false, known_box)};
    const std::vector<DetectionRecord> dets{det(0, 1, 0.9, known_box)};
    CHECK(a_ose(dets, gts) == 0);
  }
  // a known-labeled box squarely on an unknown object
  {
    const std::vector<GtObject> gts{gt(0, 5, true, unknown_box)};
    const std::vector<DetectionRecord> dets{det(0, 1, 0.9, unknown_box)};
    CHECK(a_ose(dets, gts) == 1);
  }
  // mixed scene: TP on the known object is exempt, the duplicate that drifts
  // onto the unknown counts, a plain FP in empty space does not
  {
    const std::vector<GtObject> gts{gt(0, 1, false, known_box),
                                    gt(0, 5, true, unknown_box)};
    const std::vector<DetectionRecord> dets{
        det(0, 1, 0.95, known_box),    // TP
        det(0, 1, 0.90, unknown_box),  // known label on unknown gt: counts
        det(0, 1, 0.85, box(0.0, 0.7, 0.2, 0.9)),  // FP, no unknown overlap
    };
    CHECK(a_ose(dets, gts) == 1);

    // brute-force recount: non-TP known detections overlapping unknown gt
    const auto flags = oracle_flags(dets, gts, 0.5);
    int expected = 0;
    std::vector<DetectionRecord> sorted = dets;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const DetectionRecord& a, const DetectionRecord& b) {
                       return a.confidence > b.confidence;
                     });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (flags[i]) continue;
      for (const GtObject& g : gts)
        if (g.unknown && iou(sorted[i].box, g.box) >= 0.5) {
          ++expected;
          break;
        }
    }
    CHECK(a_ose(dets, gts) == expected);
  }
}

TEST_CASE("grouped map") {
  const std::map<int, double> ap{{0, 0.5}, {1, 0.7}, {2, 0.9}, {3, 0.3}};
  // task 1: previous absent, current equals both
  {
    const std::vector<int> current{0, 1, 2, 3};
    const GroupedMap g = grouped_map(ap, {}, current);
    CHECK(!g.previous.has_value());
    CHECK(g.current == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(g.both == doctest::Approx(0.6).epsilon(1e-12));
  }
  // 2/2 split hand arithmetic
  {
    const std::vector<int> previous{0, 1};
    const std::vector<int> current{2, 3};
    const GroupedMap g = grouped_map(ap, previous, current);
    CHECK(*g.previous == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(g.current == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(g.both == doctest::Approx(0.6).epsilon(1e-12));
  }
  // all APs equal
  {
    const std::map<int, double> flat{{0, 0.4}, {1, 0.4}, {2, 0.4}};
    const GroupedMap g = grouped_map(flat, std::vector<int>{0},
                                     std::vector<int>{1, 2});
    CHECK(*g.previous == doctest::Approx(0.4));
    CHECK(g.current == doctest::Approx(0.4));
    CHECK(g.both == doctest::Approx(0.4));
  }
}

TEST_CASE("greedy matcher equals oracle on random small scenes") {
  Rng rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> ngt(1, 4);
  std::uniform_int_distribution<int> ndet(1, 6);
  std::uniform_int_distribution<int> cls(1, 2);

  auto rand_box = [&](Rng& r) {
    const double x0 = 0.6 * u(r);
    const double y0 = 0.6 * u(r);
    const double w = 0.15 + 0.25 * u(r);
    const double h = 0.15 + 0.25 * u(r);
    return box(x0, y0, std::min(1.0, x0 + w), std::min(1.0, y0 + h));
  };

  for (int trial = 0; trial < 500; ++trial) {
    std::vector<GtObject> gts;
    const int g = ngt(rng);
    for (int i = 0; i < g; ++i) gts.push_back(gt(0, cls(rng), false, rand_box(rng)));
    std::vector<DetectionRecord> dets;
    const int d = ndet(rng);
    for (int i = 0; i < d; ++i) {
      Box b = rand_box(rng);
      if (u(rng) < 0.6 && !gts.empty()) {
        // jitter an existing gt box so overlaps actually occur
        const Box& base = gts[static_cast<std::size_t>(i) % gts.size()].box;
        const double dx = 0.08 * (u(rng) - 0.5);
        const double dy = 0.08 * (u(rng) - 0.5);
        b = box(base.x0 + dx, base.y0 + dy, base.x1 + dx, base.y1 + dy);
      }
      dets.push_back(det(0, cls(rng), u(rng), b));
    }

    const auto m = match_and_score(dets, gts);
    const auto oracle = oracle_flags(dets, gts, 0.5);

    // rebuild flags in the oracle's global confidence order
    std::vector<DetectionRecord> sorted = dets;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const DetectionRecord& a, const DetectionRecord& b) {
                       if (a.confidence != b.confidence)
                         return a.confidence > b.confidence;
                       if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
                       if (a.box.x0 != b.box.x0) return a.box.x0 < b.box.x0;
                       if (a.box.y0 != b.box.y0) return a.box.y0 < b.box.y0;
                       if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
                       return a.box.y1 < b.box.y1;
                     });
    for (const auto& [c, pm] : m) {
      std::size_t oi = 0;
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i].class_id != c) continue;
        REQUIRE(oi < pm.points.size());
        CHECK(pm.points[oi].tp == (oracle[i] != 0));
        ++oi;
      }
    }
  }
}

TEST_CASE("evaluate_detections end to end") {
  const Box b0 = box(0.0, 0.0, 0.3, 0.3);
  const Box b1 = box(0.4, 0.4, 0.7, 0.7);
  const Box b2 = box(0.1, 0.6, 0.4, 0.9);
  const std::vector<GtObject> gts{gt(0, 0, false, b0), gt(0, 1, false, b1),
                                  gt(0, 7, true, b2)};
  const std::vector<DetectionRecord> dets{
      det(0, 0, 0.9, b0), det(0, 1, 0.8, b1), det(0, kUnknownClass, 0.7, b2)};
  const std::vector<int> previous{0};
  const std::vector<int> current{1};
  const MetricsReport r = evaluate_detections(dets, gts, previous, current);
  CHECK(*r.u_recall == 1.0);
  CHECK(*r.map_previous == 1.0);
  CHECK(r.map_current == 1.0);
  CHECK(r.map_both == 1.0);
  CHECK(r.a_ose == 0);
  CHECK(r.per_class_ap.size() == 2);
}
