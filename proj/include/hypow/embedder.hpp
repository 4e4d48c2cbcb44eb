#pragma once

#include "hypow/losses.hpp"
#include "hypow/relabel.hpp"

namespace hypow {

/// Linear query map plus linear classification head over ball points.
/// Slot layout: [0, num_classes) are class slots, then unknown, then
/// background.
struct EmbedderParams {
  int feature_dim = 0;
  int embed_dim = 0;
  int num_classes = 0;
  // tangent vectors are norm-capped here before the exp map, the same job
  // LayerNorm does for real detector queries; without a bound the
  // classification loss inflates embeddings into the projection wall
  double tangent_cap = 4.0;

  std::vector<double> w;       // embed_dim x feature_dim, row-major
  std::vector<double> head_w;  // (num_classes + 2) x embed_dim, row-major
  std::vector<double> head_b;  // num_classes + 2

  int num_slots() const { return num_classes + 2; }
  int unknown_slot() const { return num_classes; }
  int background_slot() const { return num_classes + 1; }

  static EmbedderParams init(int feature_dim, int embed_dim, int num_classes,
                             Rng& rng, double w_scale = 0.05);

  bool finite() const {
    return all_finite(w) && all_finite(head_w) && all_finite(head_b);
  }
};

struct ParamGrads {
  std::vector<double> w;
  std::vector<double> head_w;
  std::vector<double> head_b;

  static ParamGrads zeros_like(const EmbedderParams& p) {
    return ParamGrads{std::vector<double>(p.w.size(), 0.0),
                      std::vector<double>(p.head_w.size(), 0.0),
                      std::vector<double>(p.head_b.size(), 0.0)};
  }
  bool finite() const {
    return all_finite(w) && all_finite(head_w) && all_finite(head_b);
  }
};

/// W * feature before the norm cap.
Vec raw_tangent(const EmbedderParams& p, std::span<const double> feature);

/// W * feature, norm-capped at p.tangent_cap.
Vec tangent(const EmbedderParams& p, std::span<const double> feature);

/// exp_map0 of the capped tangent, projected into the ball.
Vec embed(const EmbedderParams& p, std::span<const double> feature,
          Curvature c);

/// Norm cap u -> u * min(1, cap/||u||) and its vector-Jacobian product.
Vec cap_norm(Vec v, double cap);
Vec cap_norm_vjp(std::span<const double> v_raw, std::span<const double> grad,
                 double cap);

/// Plain gradient descent, params -= lr * grads. Non-finite gradients raise
/// TrainingDivergence carrying `step`.
void sgd_step(EmbedderParams& p, const ParamGrads& g, double lr,
              std::size_t step = 0);

enum class PhaseKind { Task, Finetune };

struct Phase {
  PhaseKind kind = PhaseKind::Task;
  int task = 0;  // 0-based task index
  int epochs = 1;
  double lr = 1e-4;
};

struct ScheduleConfig {
  // Desk-scale defaults: one tenth of the reference epoch counts.
  int task1_epochs = 4;
  int tail_epochs = 1;
  int task_epochs = 2;
  int finetune_epochs = 6;
  double lr = 1e-4;
  double tail_lr = 1e-5;
};

struct Schedule {
  std::vector<Phase> phases;
};

/// Task/fine-tune alternation: task 1 trains then gets a low-lr tail on the
/// same labels; each later task trains on its new labels and then fine-tunes
/// on all revealed labels with exemplar replay.
Schedule default_schedule(int num_tasks, const ScheduleConfig& cfg = {});

/// Queries of one optimizer step, possibly spanning several scenes.
/// matched_class[q] is the active-label class of query q, or -1 when the
/// query enters the step unmatched (candidate unknown / background).
struct StepBatch {
  std::vector<Vec> features;
  std::vector<int> matched_class;
  std::vector<int> group;  // scene tag, used by per-image threshold scope
};

enum class DeltaScope { Batch, Image };

struct StepConfig {
  LossConfig loss;
  RelabelMode relabel = RelabelMode::Adaptive;
  DeltaScope scope = DeltaScope::Batch;
  // detector-style down-weights of the catch-all slots in the surrogate CE
  double background_weight = 0.1;
  double unknown_weight = 0.3;
  // L2 decay on the query map, applied as a gradient term; keeps the
  // contrastive repulsion from inflating the representation into the wall
  double weight_decay = 1e-3;
};

struct StepOutcome {
  double total = 0.0;
  double cls = 0.0;
  double hyp = 0.0;
  double reg = 0.0;
  ParamGrads grads;
  std::vector<int> slot_targets;  // resolved per-query labels (compact slots)
  std::vector<int> relabeled;     // batch-level indices of relabeled queries
  std::vector<Vec> embeddings;    // ball point per query
  double delta = 0.0;             // adaptive threshold used (0 if none)
};

/// One full forward/backward pass: embed, relabel unmatched queries against
/// buffer centroids, classification + contrastive + regularizer losses, and
/// gradients for all parameters. Pure given (params, batch, buffer,
/// step_seed); the caller owns the optimizer step and buffer pushes.
/// `active_classes` are the class ids whose slots participate this phase
/// (ascending).
StepOutcome training_step(const EmbedderParams& params, const StepBatch& batch,
                          const ReplayBuffer& buffer,
                          const CategoryMap& categories,
                          const std::vector<int>& active_classes,
                          const StepConfig& cfg, std::uint64_t step_seed);

}  // namespace hypow
