#pragma once

#include <optional>

#include "hypow/geometry.hpp"
#include "hypow/memory.hpp"

namespace hypow {

struct LossConfig {
  double alpha = 0.05;  // weight of the contrastive loss
  double beta = 0.02;   // weight of the SuperClass regularizer
  double tau1 = 0.2;
  double tau2 = 0.4;
  Curvature curvature{0.1};
  int positives_per_anchor = 1;  // k; k > 1 terms average

  void validate() const {
    if (alpha < 0 || beta < 0) throw std::invalid_argument("alpha, beta must be >= 0");
    if (!(tau1 > 0) || !(tau2 > 0)) throw std::invalid_argument("temperatures must be > 0");
    if (positives_per_anchor < 1) throw std::invalid_argument("k must be >= 1");
  }
};

enum class Source { Batch, Buffer };

struct LabeledEmbedding {
  Vec point;  // ball point
  int class_id = -1;
  Source source = Source::Batch;
};

struct LossValue {
  double value = 0.0;
  std::vector<Vec> grads;  // aligned with the batch argument
  bool skipped = false;    // regularizer only: fewer than 2 populated categories
  int anchors = 0;         // anchor terms that contributed
};

/// One Eq.-3 anchor term on plain distances:
///   d_pos/tau + log(sum_j exp(-d_negs[j]/tau)).
/// Exposed so the temperature-scaling property is testable directly.
double contrastive_term(double d_pos, std::span<const double> d_negs,
                        double tau);

/// Hyperbolic contrastive loss over the anchor set A = batch + buffer.
/// For each anchor, k positives are drawn from the buffer ring of the
/// anchor's class (a buffer-sourced anchor never draws itself); anchors
/// whose class has no eligible buffer entry are skipped. Negatives are all
/// of A except the anchor and its positive. Buffer entries are snapshot
/// constants: gradients are returned for batch entries only, in batch
/// order. The loss may be negative; nothing is clamped.
LossValue hyp_contrastive_loss(const std::vector<LabeledEmbedding>& batch,
                               const ReplayBuffer& buffer,
                               const LossConfig& cfg, Rng& rng);

/// HypAve of every buffered embedding whose class belongs to the category.
/// Empty category -> nullopt (caller skips the term).
std::optional<Vec> superclass_centroid(const ReplayBuffer& buffer,
                                       const CategoryMap& categories,
                                       int category, Curvature c);

/// SuperClass regularizer over anchors A = batch + buffer: each anchor is
/// pulled toward its own category centroid and pushed from the others.
/// Centroids are recomputed from the buffer and treated as constants;
/// gradients flow into batch anchors only. With fewer than two populated
/// categories the term is skipped (flagged, zero loss).
LossValue superclass_reg_loss(const std::vector<LabeledEmbedding>& batch,
                              const ReplayBuffer& buffer,
                              const CategoryMap& categories,
                              const LossConfig& cfg);

/// cls + alpha * hyp + beta * reg  (box term out of scope here).
double total_loss(double cls_loss, double hyp_loss, double reg_loss,
                  const LossConfig& cfg);

/// Mean softmax cross-entropy over queries; `scores` are logits, one vector
/// per query, `targets` index into the same slots. Gradients are with
/// respect to the logits. The weighted overload scales each query's term
/// (still divided by the query count); the training loop uses it to
/// down-weight the background slot the way detector heads do.
LossValue classification_loss(const std::vector<Vec>& scores,
                              const std::vector<int>& targets);
LossValue classification_loss(const std::vector<Vec>& scores,
                              const std::vector<int>& targets,
                              const std::vector<double>& weights);

namespace ref {
// Serial reference implementations: plain nested loops, no staging arrays.
// Kept for kernel equality tests and the benchmark target.
LossValue hyp_contrastive_loss(const std::vector<LabeledEmbedding>& batch,
                               const ReplayBuffer& buffer,
                               const LossConfig& cfg, Rng& rng);
LossValue superclass_reg_loss(const std::vector<LabeledEmbedding>& batch,
                              const ReplayBuffer& buffer,
                              const CategoryMap& categories,
                              const LossConfig& cfg);
}  // namespace ref

}  // namespace hypow
