#include "hypow/losses.hpp"

#include <algorithm>
#include <cmath>

namespace hypow {
namespace {

// The anchor set A = batch followed by buffer snapshots, in ascending class
// order, oldest entry first. Fixed ordering keeps reductions deterministic.
struct AnchorSet {
  std::vector<const Vec*> points;
  std::vector<int> class_ids;
  std::size_t batch_size = 0;  // entries [0, batch_size) may receive gradients
};

AnchorSet flatten(const std::vector<LabeledEmbedding>& batch,
                  const ReplayBuffer& buffer) {
  AnchorSet a;
  a.batch_size = batch.size();
  for (const LabeledEmbedding& e : batch) {
    a.points.push_back(&e.point);
    a.class_ids.push_back(e.class_id);
  }
  for (int cls : buffer.classes()) {
    for (const Vec& p : buffer.entries(cls)) {
      a.points.push_back(&p);
      a.class_ids.push_back(cls);
    }
  }
  return a;
}

// Buffer entries of `cls`, as indices into the flattened set, minus `self`.
std::vector<int> eligible_positives(const AnchorSet& a, int cls, int self) {
  std::vector<int> out;
  for (std::size_t j = a.batch_size; j < a.points.size(); ++j) {
    if (a.class_ids[j] == cls && static_cast<int>(j) != self)
      out.push_back(static_cast<int>(j));
  }
  return out;
}

// Draws k positives for every anchor in ascending order (the rng call
// sequence is part of the determinism contract shared with ref::).
std::vector<std::vector<int>> draw_positives(const AnchorSet& a, int k,
                                             Rng& rng) {
  std::vector<std::vector<int>> pos(a.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    std::vector<int> elig = eligible_positives(a, a.class_ids[i],
                                               static_cast<int>(i));
    if (elig.empty()) continue;
    const int n = static_cast<int>(elig.size());
    if (k <= n) {
      for (int t = 0; t < k; ++t) {
        std::uniform_int_distribution<int> pick(t, n - 1);
        std::swap(elig[static_cast<std::size_t>(t)],
                  elig[static_cast<std::size_t>(pick(rng))]);
        pos[i].push_back(elig[static_cast<std::size_t>(t)]);
      }
    } else {
      std::uniform_int_distribution<int> pick(0, n - 1);
      for (int t = 0; t < k; ++t)
        pos[i].push_back(elig[static_cast<std::size_t>(pick(rng))]);
    }
  }
  return pos;
}

double lse_neg_over_tau(std::span<const double> dists, double tau) {
  double dmin = dists[0];
  for (double d : dists) dmin = std::min(dmin, d);
  double s = 0.0;
  for (double d : dists) s += std::exp(-(d - dmin) / tau);
  return -dmin / tau + std::log(s);
}

}  // namespace

double contrastive_term(double d_pos, std::span<const double> d_negs,
                        double tau) {
  if (d_negs.empty())
    throw std::invalid_argument("contrastive_term: empty negative set");
  return d_pos / tau + lse_neg_over_tau(d_negs, tau);
}

LossValue hyp_contrastive_loss(const std::vector<LabeledEmbedding>& batch,
                               const ReplayBuffer& buffer,
                               const LossConfig& cfg, Rng& rng) {
  cfg.validate();
  LossValue out;
  out.grads.assign(batch.size(),
                   Vec(batch.empty() ? 0 : batch.front().point.size(), 0.0));
  if (batch.empty()) {
    out.grads.clear();
    return out;
  }
  const Curvature c = cfg.curvature;
  const double tau = cfg.tau1;
  const int k = cfg.positives_per_anchor;

  const AnchorSet a = flatten(batch, buffer);
  const int n = static_cast<int>(a.points.size());
  const auto positives = draw_positives(a, k, rng);

  // full pairwise distance matrix (every other element of A is a potential
  // negative for every anchor)
  std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = hyp_dist(*a.points[i], *a.points[j], c);
      dist[static_cast<std::size_t>(i) * n + j] = d;
      dist[static_cast<std::size_t>(j) * n + i] = d;
    }
  }

  // per-anchor term and d(loss)/d(dist(i, .)) coefficient row
  std::vector<double> terms(static_cast<std::size_t>(n), 0.0);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<double> coef(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    if (positives[static_cast<std::size_t>(i)].empty()) continue;
    const double* drow = &dist[static_cast<std::size_t>(i) * n];
    double* crow = &coef[static_cast<std::size_t>(i) * n];
    const double inv_k = 1.0 / static_cast<double>(k);
    double term = 0.0;
    bool any = false;
    const int own = a.class_ids[static_cast<std::size_t>(i)];
    for (int p : positives[static_cast<std::size_t>(i)]) {
      // negatives: the different-class part of A ({i, i+} drop out with it)
      double dmin = 0.0;
      bool first = true;
      for (int j = 0; j < n; ++j) {
        if (a.class_ids[static_cast<std::size_t>(j)] == own) continue;
        if (first || drow[j] < dmin) dmin = drow[j];
        first = false;
      }
      if (first) continue;  // no other class present: anchor has no negatives
      double z = 0.0;
      for (int j = 0; j < n; ++j) {
        if (a.class_ids[static_cast<std::size_t>(j)] == own) continue;
        z += std::exp(-(drow[j] - dmin) / tau);
      }
      term += inv_k * (drow[p] / tau - dmin / tau + std::log(z));
      any = true;
      crow[p] += inv_k / tau;
      for (int j = 0; j < n; ++j) {
        if (a.class_ids[static_cast<std::size_t>(j)] == own) continue;
        const double w = std::exp(-(drow[j] - dmin) / tau) / z;
        crow[j] -= inv_k * w / tau;
      }
    }
    if (any) {
      terms[static_cast<std::size_t>(i)] = term;
      used[static_cast<std::size_t>(i)] = 1;
    }
  }

  for (int i = 0; i < n; ++i) {
    if (used[static_cast<std::size_t>(i)]) {
      out.value += terms[static_cast<std::size_t>(i)];
      ++out.anchors;
    }
  }

  // gradient assembly, one batch slot per thread; fixed index order within
  const int b = static_cast<int>(a.batch_size);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < b; ++j) {
    Vec& g = out.grads[static_cast<std::size_t>(j)];
    if (used[static_cast<std::size_t>(j)]) {
      const double* crow = &coef[static_cast<std::size_t>(j) * n];
      for (int m = 0; m < n; ++m) {
        if (m == j || crow[m] == 0.0) continue;
        const DistGrad dg = dist_grad(*a.points[j], *a.points[m], c);
        axpy(crow[m], dg.wrt_x, g);
      }
    }
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      const double cij = coef[static_cast<std::size_t>(i) * n + j];
      if (cij == 0.0) continue;
      const DistGrad dg = dist_grad(*a.points[i], *a.points[j], c);
      axpy(cij, dg.wrt_y, g);
    }
  }
  return out;
}

std::optional<Vec> superclass_centroid(const ReplayBuffer& buffer,
                                       const CategoryMap& categories,
                                       int category, Curvature c) {
  std::vector<Vec> members;
  for (int cls : categories.classes_in(category)) {
    for (const Vec& p : buffer.entries(cls)) members.push_back(p);
  }
  if (members.empty()) return std::nullopt;
  return hyp_ave(members, c);
}

LossValue superclass_reg_loss(const std::vector<LabeledEmbedding>& batch,
                              const ReplayBuffer& buffer,
                              const CategoryMap& categories,
                              const LossConfig& cfg) {
  cfg.validate();
  LossValue out;
  out.grads.assign(batch.size(),
                   Vec(batch.empty() ? 0 : batch.front().point.size(), 0.0));
  const Curvature c = cfg.curvature;
  const double tau = cfg.tau2;

  std::vector<int> cats;
  std::vector<Vec> centroids;
  for (int p = 0; p < categories.num_categories(); ++p) {
    if (auto z = superclass_centroid(buffer, categories, p, c)) {
      cats.push_back(p);
      centroids.push_back(std::move(*z));
    }
  }
  if (cats.size() < 2) {
    out.skipped = true;
    return out;
  }

  const AnchorSet a = flatten(batch, buffer);
  const int n = static_cast<int>(a.points.size());
  const int pcount = static_cast<int>(cats.size());
  std::vector<double> terms(static_cast<std::size_t>(n), 0.0);
  std::vector<char> used(static_cast<std::size_t>(n), 0);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const int own_cat = categories.category_of(a.class_ids[i]);
    int own = -1;
    for (int q = 0; q < pcount; ++q)
      if (cats[static_cast<std::size_t>(q)] == own_cat) own = q;
    if (own < 0) continue;  // own category has no centroid yet

    std::vector<double> d(static_cast<std::size_t>(pcount));
    for (int q = 0; q < pcount; ++q)
      d[static_cast<std::size_t>(q)] =
          hyp_dist(*a.points[i], centroids[static_cast<std::size_t>(q)], c);

    double dmin = 0.0;
    bool first = true;
    for (int q = 0; q < pcount; ++q) {
      if (q == own) continue;
      if (first || d[static_cast<std::size_t>(q)] < dmin)
        dmin = d[static_cast<std::size_t>(q)];
      first = false;
    }
    double z = 0.0;
    for (int q = 0; q < pcount; ++q) {
      if (q == own) continue;
      z += std::exp(-(d[static_cast<std::size_t>(q)] - dmin) / tau);
    }
    terms[static_cast<std::size_t>(i)] =
        d[static_cast<std::size_t>(own)] / tau - dmin / tau + std::log(z);
    used[static_cast<std::size_t>(i)] = 1;

    if (i < static_cast<int>(a.batch_size)) {
      Vec& g = out.grads[static_cast<std::size_t>(i)];
      {
        const DistGrad dg =
            dist_grad(*a.points[i], centroids[static_cast<std::size_t>(own)], c);
        axpy(1.0 / tau, dg.wrt_x, g);
      }
      for (int q = 0; q < pcount; ++q) {
        if (q == own) continue;
        const double w =
            std::exp(-(d[static_cast<std::size_t>(q)] - dmin) / tau) / z;
        const DistGrad dg =
            dist_grad(*a.points[i], centroids[static_cast<std::size_t>(q)], c);
        axpy(-w / tau, dg.wrt_x, g);
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    if (used[static_cast<std::size_t>(i)]) {
      out.value += terms[static_cast<std::size_t>(i)];
      ++out.anchors;
    }
  }
  return out;
}

double total_loss(double cls_loss, double hyp_loss, double reg_loss,
                  const LossConfig& cfg) {
  return cls_loss + cfg.alpha * hyp_loss + cfg.beta * reg_loss;
}

LossValue classification_loss(const std::vector<Vec>& scores,
                              const std::vector<int>& targets) {
  return classification_loss(scores, targets, {});
}

LossValue classification_loss(const std::vector<Vec>& scores,
                              const std::vector<int>& targets,
                              const std::vector<double>& weights) {
  if (scores.size() != targets.size())
    throw std::invalid_argument("classification_loss: size mismatch");
  if (!weights.empty() && weights.size() != scores.size())
    throw std::invalid_argument("classification_loss: weights size mismatch");
  LossValue out;
  const int n = static_cast<int>(scores.size());
  if (n == 0) return out;
  for (int q = 0; q < n; ++q) {
    if (targets[static_cast<std::size_t>(q)] < 0 ||
        targets[static_cast<std::size_t>(q)] >=
            static_cast<int>(scores[static_cast<std::size_t>(q)].size()))
      throw std::invalid_argument("classification_loss: label out of range");
  }
  out.grads.assign(scores.size(), Vec());
  std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
#pragma omp parallel for schedule(static)
  for (int q = 0; q < n; ++q) {
    const Vec& s = scores[static_cast<std::size_t>(q)];
    const int t = targets[static_cast<std::size_t>(q)];
    const double w =
        weights.empty() ? 1.0 : weights[static_cast<std::size_t>(q)];
    double smax = s[0];
    for (double v : s) smax = std::max(smax, v);
    double z = 0.0;
    for (double v : s) z += std::exp(v - smax);
    losses[static_cast<std::size_t>(q)] =
        -w * (s[static_cast<std::size_t>(t)] - smax - std::log(z));
    Vec& g = out.grads[static_cast<std::size_t>(q)];
    g.resize(s.size());
    for (std::size_t j = 0; j < s.size(); ++j)
      g[j] = w * std::exp(s[j] - smax) / z / n;
    g[static_cast<std::size_t>(t)] -= w / n;
  }
  for (int q = 0; q < n; ++q) out.value += losses[static_cast<std::size_t>(q)];
  out.value /= n;
  out.anchors = n;
  return out;
}

namespace ref {

LossValue hyp_contrastive_loss(const std::vector<LabeledEmbedding>& batch,
                               const ReplayBuffer& buffer,
                               const LossConfig& cfg, Rng& rng) {
  cfg.validate();
  LossValue out;
  out.grads.assign(batch.size(),
                   Vec(batch.empty() ? 0 : batch.front().point.size(), 0.0));
  if (batch.empty()) {
    out.grads.clear();
    return out;
  }
  const Curvature c = cfg.curvature;
  const double tau = cfg.tau1;
  const int k = cfg.positives_per_anchor;
  const AnchorSet a = flatten(batch, buffer);
  const int n = static_cast<int>(a.points.size());
  const auto positives = draw_positives(a, k, rng);
  const int b = static_cast<int>(a.batch_size);

  for (int i = 0; i < n; ++i) {
    if (positives[static_cast<std::size_t>(i)].empty()) continue;
    const double inv_k = 1.0 / static_cast<double>(k);
    bool any = false;
    const int own = a.class_ids[static_cast<std::size_t>(i)];
    for (int p : positives[static_cast<std::size_t>(i)]) {
      std::vector<double> dn;
      std::vector<int> negs;
      for (int j = 0; j < n; ++j) {
        if (a.class_ids[static_cast<std::size_t>(j)] == own) continue;
        negs.push_back(j);
        dn.push_back(hyp_dist(*a.points[i], *a.points[j], c));
      }
      if (negs.empty()) continue;
      const double dp = hyp_dist(*a.points[i], *a.points[p], c);
      out.value += inv_k * contrastive_term(dp, dn, tau);
      any = true;

      if (i < b) {
        const DistGrad dg = dist_grad(*a.points[i], *a.points[p], c);
        axpy(inv_k / tau, dg.wrt_x, out.grads[static_cast<std::size_t>(i)]);
      }
      double dmin = dn[0];
      for (double d : dn) dmin = std::min(dmin, d);
      double z = 0.0;
      for (double d : dn) z += std::exp(-(d - dmin) / tau);
      for (std::size_t t = 0; t < negs.size(); ++t) {
        const int j = negs[t];
        const double w = std::exp(-(dn[t] - dmin) / tau) / z;
        const double cij = -inv_k * w / tau;
        const DistGrad dg = dist_grad(*a.points[i], *a.points[j], c);
        if (i < b) axpy(cij, dg.wrt_x, out.grads[static_cast<std::size_t>(i)]);
        if (j < b) axpy(cij, dg.wrt_y, out.grads[static_cast<std::size_t>(j)]);
      }
    }
    if (any) ++out.anchors;
  }
  return out;
}

LossValue superclass_reg_loss(const std::vector<LabeledEmbedding>& batch,
                              const ReplayBuffer& buffer,
                              const CategoryMap& categories,
                              const LossConfig& cfg) {
  cfg.validate();
  LossValue out;
  out.grads.assign(batch.size(),
                   Vec(batch.empty() ? 0 : batch.front().point.size(), 0.0));
  const Curvature c = cfg.curvature;
  const double tau = cfg.tau2;

  std::vector<int> cats;
  std::vector<Vec> centroids;
  for (int p = 0; p < categories.num_categories(); ++p) {
    if (auto z = superclass_centroid(buffer, categories, p, c)) {
      cats.push_back(p);
      centroids.push_back(std::move(*z));
    }
  }
  if (cats.size() < 2) {
    out.skipped = true;
    return out;
  }
  const AnchorSet a = flatten(batch, buffer);
  const int b = static_cast<int>(a.batch_size);
  for (int i = 0; i < static_cast<int>(a.points.size()); ++i) {
    const int own_cat = categories.category_of(a.class_ids[i]);
    int own = -1;
    for (std::size_t q = 0; q < cats.size(); ++q)
      if (cats[q] == own_cat) own = static_cast<int>(q);
    if (own < 0) continue;

    const double dp =
        hyp_dist(*a.points[i], centroids[static_cast<std::size_t>(own)], c);
    std::vector<double> dn;
    std::vector<int> other;
    for (std::size_t q = 0; q < cats.size(); ++q) {
      if (static_cast<int>(q) == own) continue;
      other.push_back(static_cast<int>(q));
      dn.push_back(hyp_dist(*a.points[i], centroids[q], c));
    }
    out.value += contrastive_term(dp, dn, tau);
    ++out.anchors;
    if (i >= b) continue;
    Vec& g = out.grads[static_cast<std::size_t>(i)];
    {
      const DistGrad dg =
          dist_grad(*a.points[i], centroids[static_cast<std::size_t>(own)], c);
      axpy(1.0 / tau, dg.wrt_x, g);
    }
    double dmin = dn[0];
    for (double d : dn) dmin = std::min(dmin, d);
    double z = 0.0;
    for (double d : dn) z += std::exp(-(d - dmin) / tau);
    for (std::size_t t = 0; t < other.size(); ++t) {
      const double w = std::exp(-(dn[t] - dmin) / tau) / z;
      const DistGrad dg = dist_grad(
          *a.points[i], centroids[static_cast<std::size_t>(other[t])], c);
      axpy(-w / tau, dg.wrt_x, g);
    }
  }
  return out;
}

}  // namespace ref
}  // namespace hypow
