#include "hypow/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hypow {

EmbedderParams EmbedderParams::init(int feature_dim, int embed_dim,
                                    int num_classes, Rng& rng,
                                    double w_scale) {
  if (feature_dim < 1 || embed_dim < 1 || num_classes < 1)
    throw std::invalid_argument("EmbedderParams::init: bad dimensions");
  EmbedderParams p;
  p.feature_dim = feature_dim;
  p.embed_dim = embed_dim;
  p.num_classes = num_classes;
  p.w.resize(static_cast<std::size_t>(embed_dim) * feature_dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = w_scale / std::sqrt(static_cast<double>(feature_dim));
  for (double& x : p.w) x = scale * gauss(rng);
  // zero head: uniform scores at the start, gradients break the symmetry
  p.head_w.assign(static_cast<std::size_t>(p.num_slots()) * embed_dim, 0.0);
  p.head_b.assign(static_cast<std::size_t>(p.num_slots()), 0.0);
  return p;
}

Vec raw_tangent(const EmbedderParams& p, std::span<const double> feature) {
  if (static_cast<int>(feature.size()) != p.feature_dim)
    throw std::invalid_argument("embed: feature dimension mismatch");
  Vec v(static_cast<std::size_t>(p.embed_dim), 0.0);
  for (int r = 0; r < p.embed_dim; ++r) {
    const double* row = &p.w[static_cast<std::size_t>(r) * p.feature_dim];
    double s = 0.0;
    for (int f = 0; f < p.feature_dim; ++f) s += row[f] * feature[static_cast<std::size_t>(f)];
    v[static_cast<std::size_t>(r)] = s;
  }
  return v;
}

Vec cap_norm(Vec v, double cap) {
  if (cap <= 0.0) return v;
  const double n = norm(v);
  if (n <= cap) return v;
  const double s = cap / n;
  for (double& x : v) x *= s;
  return v;
}

Vec cap_norm_vjp(std::span<const double> v_raw, std::span<const double> grad,
                 double cap) {
  Vec out(grad.begin(), grad.end());
  if (cap <= 0.0) return out;
  const double n = norm(v_raw);
  if (n <= cap) return out;
  // d(cap * u/||u||)/du = (cap/||u||) (I - u u^T / ||u||^2)
  const double s = cap / n;
  const double k = dot(v_raw, grad) / (n * n);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = s * (grad[i] - k * v_raw[i]);
  return out;
}

Vec tangent(const EmbedderParams& p, std::span<const double> feature) {
  return cap_norm(raw_tangent(p, feature), p.tangent_cap);
}

Vec embed(const EmbedderParams& p, std::span<const double> feature,
          Curvature c) {
  return exp_map0(tangent(p, feature), c);
}

void sgd_step(EmbedderParams& p, const ParamGrads& g, double lr,
              std::size_t step) {
  if (!std::isfinite(lr) || lr < 0.0)
    throw std::invalid_argument("sgd_step: learning rate must be >= 0");
  if (!g.finite())
    throw TrainingDivergence(step, "sgd_step: non-finite gradients");
  for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] -= lr * g.w[i];
  for (std::size_t i = 0; i < p.head_w.size(); ++i)
    p.head_w[i] -= lr * g.head_w[i];
  for (std::size_t i = 0; i < p.head_b.size(); ++i)
    p.head_b[i] -= lr * g.head_b[i];
}

Schedule default_schedule(int num_tasks, const ScheduleConfig& cfg) {
  if (num_tasks < 1) throw std::invalid_argument("num_tasks must be >= 1");
  if (!(cfg.lr > 0.0) || !(cfg.tail_lr > 0.0))
    throw std::invalid_argument("learning rates must be positive");
  Schedule s;
  s.phases.push_back({PhaseKind::Task, 0, cfg.task1_epochs, cfg.lr});
  s.phases.push_back({PhaseKind::Finetune, 0, cfg.tail_epochs, cfg.tail_lr});
  for (int t = 1; t < num_tasks; ++t) {
    s.phases.push_back({PhaseKind::Task, t, cfg.task_epochs, cfg.lr});
    s.phases.push_back({PhaseKind::Finetune, t, cfg.finetune_epochs, cfg.lr});
  }
  return s;
}

namespace {

// compact slot layout for one step: active classes then unknown, background
struct SlotMap {
  std::vector<int> class_ids;  // ascending
  int slot_of(int class_id) const {
    const auto it =
        std::lower_bound(class_ids.begin(), class_ids.end(), class_id);
    if (it == class_ids.end() || *it != class_id)
      throw std::invalid_argument("class not active this phase");
    return static_cast<int>(it - class_ids.begin());
  }
  int unknown() const { return static_cast<int>(class_ids.size()); }
  int background() const { return static_cast<int>(class_ids.size()) + 1; }
  int count() const { return static_cast<int>(class_ids.size()) + 2; }
  // global head row backing compact slot s
  int head_row(const EmbedderParams& p, int s) const {
    if (s < static_cast<int>(class_ids.size()))
      return class_ids[static_cast<std::size_t>(s)];
    return s == unknown() ? p.unknown_slot() : p.background_slot();
  }
};

}  // namespace

StepOutcome training_step(const EmbedderParams& params, const StepBatch& batch,
                          const ReplayBuffer& buffer,
                          const CategoryMap& categories,
                          const std::vector<int>& active_classes,
                          const StepConfig& cfg, std::uint64_t step_seed) {
  const int n = static_cast<int>(batch.features.size());
  StepOutcome out;
  out.grads = ParamGrads::zeros_like(params);
  if (n == 0) return out;
  if (batch.matched_class.size() != batch.features.size() ||
      batch.group.size() != batch.features.size())
    throw std::invalid_argument("training_step: ragged batch");
  const Curvature c = cfg.loss.curvature;
  SlotMap slots{active_classes};

  // forward: raw tangent, norm cap, ball point per query
  std::vector<Vec> raw(static_cast<std::size_t>(n));
  std::vector<Vec> tang(static_cast<std::size_t>(n));
  out.embeddings.resize(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int q = 0; q < n; ++q) {
    raw[static_cast<std::size_t>(q)] =
        raw_tangent(params, batch.features[static_cast<std::size_t>(q)]);
    tang[static_cast<std::size_t>(q)] =
        cap_norm(raw[static_cast<std::size_t>(q)], params.tangent_cap);
    out.embeddings[static_cast<std::size_t>(q)] =
        exp_map0(tang[static_cast<std::size_t>(q)], c);
  }

  // relabeling of unmatched queries against buffer centroids
  const CentroidSet centroids = class_centroids(buffer, c);
  std::vector<int> unmatched_idx;
  for (int q = 0; q < n; ++q)
    if (batch.matched_class[static_cast<std::size_t>(q)] < 0)
      unmatched_idx.push_back(q);

  std::vector<char> relabel_flag(static_cast<std::size_t>(n), 0);
  auto run_group = [&](const std::vector<int>& members) {
    std::vector<Vec> matched, unmatched;
    std::vector<int> unmatched_members;
    for (int q : members) {
      if (batch.matched_class[static_cast<std::size_t>(q)] >= 0) {
        matched.push_back(out.embeddings[static_cast<std::size_t>(q)]);
      } else {
        unmatched.push_back(out.embeddings[static_cast<std::size_t>(q)]);
        unmatched_members.push_back(q);
      }
    }
    const RelabelDecision d =
        decide_relabel(matched, unmatched, centroids, c, cfg.relabel);
    for (int u : d.relabeled)
      relabel_flag[static_cast<std::size_t>(
          unmatched_members[static_cast<std::size_t>(u)])] = 1;
    out.delta = std::max(out.delta, d.delta);
  };
  if (cfg.scope == DeltaScope::Batch) {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) all[static_cast<std::size_t>(q)] = q;
    run_group(all);
  } else {
    std::set<int> groups(batch.group.begin(), batch.group.end());
    for (int g : groups) {
      std::vector<int> members;
      for (int q = 0; q < n; ++q)
        if (batch.group[static_cast<std::size_t>(q)] == g) members.push_back(q);
      run_group(members);
    }
  }
  for (int q : unmatched_idx)
    if (relabel_flag[static_cast<std::size_t>(q)]) out.relabeled.push_back(q);

  // classification on compact slots
  out.slot_targets.resize(static_cast<std::size_t>(n));
  std::vector<Vec> logits(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int q = 0; q < n; ++q) {
    const int cls = batch.matched_class[static_cast<std::size_t>(q)];
    out.slot_targets[static_cast<std::size_t>(q)] =
        cls >= 0 ? slots.slot_of(cls)
                 : (relabel_flag[static_cast<std::size_t>(q)]
                        ? slots.unknown()
                        : slots.background());
    Vec& lg = logits[static_cast<std::size_t>(q)];
    lg.resize(static_cast<std::size_t>(slots.count()));
    const Vec& z = out.embeddings[static_cast<std::size_t>(q)];
    for (int s = 0; s < slots.count(); ++s) {
      const int row = slots.head_row(params, s);
      const double* hw =
          &params.head_w[static_cast<std::size_t>(row) * params.embed_dim];
      lg[static_cast<std::size_t>(s)] =
          dot(std::span<const double>(hw, static_cast<std::size_t>(params.embed_dim)), z) +
          params.head_b[static_cast<std::size_t>(row)];
    }
  }
  std::vector<double> cls_weights(static_cast<std::size_t>(n), 1.0);
  for (int q = 0; q < n; ++q) {
    if (out.slot_targets[static_cast<std::size_t>(q)] == slots.background())
      cls_weights[static_cast<std::size_t>(q)] = cfg.background_weight;
    else if (out.slot_targets[static_cast<std::size_t>(q)] == slots.unknown())
      cls_weights[static_cast<std::size_t>(q)] = cfg.unknown_weight;
  }
  const LossValue cls_loss =
      classification_loss(logits, out.slot_targets, cls_weights);
  out.cls = cls_loss.value;

  // contrastive + regularizer over matched anchors (buffer added inside)
  std::vector<LabeledEmbedding> anchors;
  std::vector<int> anchor_query;
  for (int q = 0; q < n; ++q) {
    const int cls = batch.matched_class[static_cast<std::size_t>(q)];
    if (cls < 0) continue;
    anchors.push_back(LabeledEmbedding{
        out.embeddings[static_cast<std::size_t>(q)], cls, Source::Batch});
    anchor_query.push_back(q);
  }
  LossValue hyp;
  if (cfg.loss.alpha != 0.0 && !anchors.empty()) {
    Rng rng(step_seed);
    hyp = hyp_contrastive_loss(anchors, buffer, cfg.loss, rng);
    out.hyp = hyp.value;
  }
  LossValue reg;
  if (cfg.loss.beta != 0.0 && !anchors.empty()) {
    reg = superclass_reg_loss(anchors, buffer, categories, cfg.loss);
    out.reg = reg.skipped ? 0.0 : reg.value;
  }
  out.total = total_loss(out.cls, out.hyp, out.reg, cfg.loss);

  // backward: d(total)/d(z_q), then through the head and the exp map
  std::vector<Vec> dz(static_cast<std::size_t>(n),
                      Vec(static_cast<std::size_t>(params.embed_dim), 0.0));
#pragma omp parallel for schedule(static)
  for (int q = 0; q < n; ++q) {
    Vec& g = dz[static_cast<std::size_t>(q)];
    const Vec& lgrad = cls_loss.grads[static_cast<std::size_t>(q)];
    for (int s = 0; s < slots.count(); ++s) {
      const int row = slots.head_row(params, s);
      const double* hw =
          &params.head_w[static_cast<std::size_t>(row) * params.embed_dim];
      axpy(lgrad[static_cast<std::size_t>(s)],
           std::span<const double>(hw, static_cast<std::size_t>(params.embed_dim)), g);
    }
  }
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const int q = anchor_query[a];
    if (!hyp.grads.empty())
      axpy(cfg.loss.alpha, hyp.grads[a], dz[static_cast<std::size_t>(q)]);
    if (!reg.grads.empty() && !reg.skipped)
      axpy(cfg.loss.beta, reg.grads[a], dz[static_cast<std::size_t>(q)]);
  }

  // head gradients: rows are independent
  const int nslots = slots.count();
#pragma omp parallel for schedule(static)
  for (int s = 0; s < nslots; ++s) {
    const int row = slots.head_row(params, s);
    double* hw = &out.grads.head_w[static_cast<std::size_t>(row) * params.embed_dim];
    double bsum = 0.0;
    for (int q = 0; q < n; ++q) {
      const double g = cls_loss.grads[static_cast<std::size_t>(q)][static_cast<std::size_t>(s)];
      if (g == 0.0) continue;
      const Vec& z = out.embeddings[static_cast<std::size_t>(q)];
      for (int e = 0; e < params.embed_dim; ++e)
        hw[e] += g * z[static_cast<std::size_t>(e)];
      bsum += g;
    }
    out.grads.head_b[static_cast<std::size_t>(row)] += bsum;
  }

  // through the exp map and the norm cap, then W rows
  std::vector<Vec> dv(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int q = 0; q < n; ++q) {
    const Vec dt = exp_map0_vjp(tang[static_cast<std::size_t>(q)],
                                dz[static_cast<std::size_t>(q)], c);
    dv[static_cast<std::size_t>(q)] =
        cap_norm_vjp(raw[static_cast<std::size_t>(q)], dt, params.tangent_cap);
  }

#pragma omp parallel for schedule(static)
  for (int r = 0; r < params.embed_dim; ++r) {
    double* wrow = &out.grads.w[static_cast<std::size_t>(r) * params.feature_dim];
    const double* prow = &params.w[static_cast<std::size_t>(r) * params.feature_dim];
    for (int q = 0; q < n; ++q) {
      const double g = dv[static_cast<std::size_t>(q)][static_cast<std::size_t>(r)];
      if (g == 0.0) continue;
      const Vec& f = batch.features[static_cast<std::size_t>(q)];
      for (int fd = 0; fd < params.feature_dim; ++fd)
        wrow[fd] += g * f[static_cast<std::size_t>(fd)];
    }
    if (cfg.weight_decay > 0.0)
      for (int fd = 0; fd < params.feature_dim; ++fd)
        wrow[fd] += cfg.weight_decay * prow[fd];
  }
  return out;
}

}  // namespace hypow
