#pragma once

#include <vector>

#include "hypow/util.hpp"

namespace hypow {

/// Axis-aligned rectangle in [0,1]^2, corners (x0,y0) <= (x1,y1).
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double area() const { return (x1 - x0) * (y1 - y0); }
  friend bool operator==(const Box&, const Box&) = default;
};

/// One ground-truth object and the detector query it produces. `annotated`
/// is true only for classes revealed at generation time; unknown-class
/// objects keep their true class for the scorer but training must not read
/// it (train views strip it).
struct SceneObject {
  int class_id = -1;
  bool annotated = false;
  Box box;        // ground truth
  Box query_box;  // the query's candidate box (jittered ground truth)
  Vec feature;
};

/// A structureless distractor query (no underlying object).
struct BackgroundQuery {
  Box box;
  Vec feature;
};

struct SceneRecord {
  int scene_id = 0;
  int task_index = 0;
  std::vector<SceneObject> objects;
  std::vector<BackgroundQuery> background;
};

}  // namespace hypow
