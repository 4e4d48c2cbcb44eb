#pragma once

#include <functional>
#include <set>

#include "hypow/embedder.hpp"
#include "hypow/metrics.hpp"
#include "hypow/scene.hpp"

namespace hypow {

/// Task-to-category assignment regime. Low keeps categories disjoint across
/// tasks, High gives every task at least one class of every category,
/// Medium mixes exclusive and shared categories.
enum class SplitMode { Low, Medium, High };

struct WorldConfig {
  int num_categories = 4;
  int classes_per_category = 4;
  int feature_dim = 16;
  double category_spread = 6.0;  // min separation between category prototypes
  double class_spread = 1.0;     // class prototype scatter around its category
  // offset (in category_spread units) of the shared object-feature center;
  // keeps the known manifold a compact cone that background stays outside of
  double objectness_offset = 2.0;
  double noise_sigma = 0.3;      // per-object feature noise
  int num_tasks = 2;
  SplitMode split_mode = SplitMode::High;
  std::uint64_t seed = 1;

  // scene composition
  int known_per_scene = 3;
  int unknown_per_scene = 2;
  int background_per_scene = 4;
  // structureless distractors: isotropic noise near the origin, far from
  // every prototype on the objectness cone
  double background_sigma = 0.5;
  double box_jitter = 0.05;
  int train_scenes_per_task = 40;
  int eval_scenes_per_task = 40;

  int total_classes() const { return num_categories * classes_per_category; }
  void validate() const;
};

/// Incremental label revelation: K^t grows strictly, the last task has no
/// unknowns left.
struct TaskSchedule {
  std::vector<std::vector<int>> new_classes;  // per task, ascending

  int num_tasks() const { return static_cast<int>(new_classes.size()); }
  std::vector<int> known_at(int task) const;    // cumulative through `task`
  std::vector<int> unknown_at(int task) const;  // complement
};

struct World {
  WorldConfig cfg;
  std::vector<Vec> class_prototypes;  // class id -> prototype
  CategoryMap categories;
  TaskSchedule tasks;
  double max_prototype_norm = 0.0;
};

/// Deterministic per cfg.seed. Throws on infeasible prototype geometry or an
/// impossible split-mode/task-count combination.
World gen_world(const WorldConfig& cfg);

SceneRecord gen_scene(const World& world, int task_index, int scene_id,
                      Rng& rng);

/// Scenes with ids offset..offset+count-1, each drawn from its own derived
/// stream (order-independent, parallelizable).
std::vector<SceneRecord> gen_scene_set(const World& world, int task_index,
                                       std::uint64_t seed, int count,
                                       int id_offset = 0);

/// Eq.-8 style semantic overlap of the synthetic world, one value per task
/// t = 1..T-1, computed on the class prototypes.
std::vector<double> world_semantic_overlap(const World& world);

struct MethodConfig {
  LossConfig loss;
  RelabelMode relabel = RelabelMode::Adaptive;
  DeltaScope scope = DeltaScope::Batch;
  int buffer_capacity = 10;     // m
  int exemplars_per_class = 5;  // K, scenes kept per class at task end
  int batch_scenes = 3;
  int embed_dim = 8;
  double w_init_scale = 0.05;
  double tangent_cap = 4.0;
  double background_weight = 0.1;
  double unknown_weight = 0.3;
  double weight_decay = 1e-3;
  // classification head steps this much faster than the query map, the
  // usual detector split between backbone and head learning rates
  double head_lr_scale = 10.0;
  ScheduleConfig schedule;
  double iou_threshold = 0.5;

  MethodConfig() {
    // desk-scale step size for the one-layer surrogate
    schedule.lr = 0.05;
    schedule.tail_lr = 0.005;
  }
};

struct StepObservation {
  std::size_t step = 0;
  int task = 0;
  PhaseKind phase = PhaseKind::Task;
  double total = 0, cls = 0, hyp = 0, reg = 0;
  double delta = 0;
  std::size_t matched = 0, unmatched = 0, relabeled = 0;
};

struct TaskEndState {
  int task = 0;
  const EmbedderParams* params = nullptr;
  const ReplayBuffer* buffer = nullptr;
  double frozen_delta = 0.0;
};

struct ProtocolHooks {
  std::function<void(const StepObservation&)> on_step;
  std::function<void(const TaskEndState&)> on_task_end;
};

struct TaskOutput {
  MetricsReport metrics;
  double frozen_delta = 0.0;
  std::vector<DetectionRecord> detections;  // kept when requested
  std::vector<GtObject> ground_truth;
};

struct ProtocolResult {
  std::vector<TaskOutput> tasks;
};

/// The full incremental protocol: per task, train on the revealed labels
/// (task phase on new classes, fine-tune on all revealed with exemplar
/// replay), then evaluate on held-out scenes where all ground truth is
/// visible to the scorer. Training divergence raises TrainingDivergence
/// with the failing step.
ProtocolResult run_protocol(const World& world, const MethodConfig& method,
                            std::uint64_t method_seed,
                            const ProtocolHooks* hooks = nullptr,
                            bool keep_detections = false);

struct AblationRow {
  std::string name;
  std::vector<MetricsReport> per_task;
};

struct AblationTables {
  std::vector<AblationRow> components;  // full, cosine c=0, beta=0, all-unmatched
  std::vector<AblationRow> curvature;   // c in {0, 0.1, 0.2, 0.5}
};

AblationTables ablation_suite(const World& world, const MethodConfig& base,
                              std::uint64_t method_seed);

/// Strips hidden labels for a training phase: queries of annotated objects
/// whose class is active carry the class; everything else enters unmatched.
StepBatch make_step_batch(std::span<const SceneRecord* const> scenes,
                          const std::set<int>& active_classes);

}  // namespace hypow
