#include "hypow/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hypow/splitsim.hpp"

namespace hypow {

void WorldConfig::validate() const {
  if (num_categories < 1 || classes_per_category < 1)
    throw std::invalid_argument("world: need at least one category and class");
  if (feature_dim < 2) throw std::invalid_argument("world: feature_dim < 2");
  if (num_tasks < 2) throw std::invalid_argument("world: num_tasks must be >= 2");
  if (!(category_spread > 0) || class_spread < 0 || noise_sigma < 0)
    throw std::invalid_argument("world: spreads must be positive");
  if (split_mode == SplitMode::High && classes_per_category < num_tasks)
    throw std::invalid_argument(
        "world: high split needs classes_per_category >= num_tasks");
  if (split_mode == SplitMode::Low && num_categories < num_tasks)
    throw std::invalid_argument(
        "world: low split needs num_categories >= num_tasks");
  if (known_per_scene < 0 || unknown_per_scene < 0 || background_per_scene < 0)
    throw std::invalid_argument("world: negative scene rates");
  if (!(box_jitter >= 0) || box_jitter > 0.2)
    throw std::invalid_argument("world: box_jitter outside [0, 0.2]");
  if (train_scenes_per_task < 1 || eval_scenes_per_task < 1)
    throw std::invalid_argument("world: scene counts must be >= 1");
}

std::vector<int> TaskSchedule::known_at(int task) const {
  std::vector<int> out;
  for (int t = 0; t <= task && t < num_tasks(); ++t)
    out.insert(out.end(), new_classes[static_cast<std::size_t>(t)].begin(),
               new_classes[static_cast<std::size_t>(t)].end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> TaskSchedule::unknown_at(int task) const {
  std::vector<int> out;
  for (int t = task + 1; t < num_tasks(); ++t)
    out.insert(out.end(), new_classes[static_cast<std::size_t>(t)].begin(),
               new_classes[static_cast<std::size_t>(t)].end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

Vec gaussian_vec(int dim, double sigma, Rng& rng) {
  std::normal_distribution<double> g(0.0, sigma);
  Vec v(static_cast<std::size_t>(dim));
  for (double& x : v) x = g(rng);
  return v;
}

Vec unit_direction(int dim, Rng& rng) {
  Vec v = gaussian_vec(dim, 1.0, rng);
  const double n = norm(v);
  if (n < 1e-12) {
    v.assign(static_cast<std::size_t>(dim), 0.0);
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= n;
  return v;
}

// taskof(category, class-within-category) under the three regimes
int task_of(const WorldConfig& cfg, int category, int member) {
  switch (cfg.split_mode) {
    case SplitMode::High:
      return member % cfg.num_tasks;
    case SplitMode::Low:
      return category % cfg.num_tasks;
    case SplitMode::Medium:
      // even categories are task-exclusive, odd ones spread across tasks
      if (category % 2 == 0) return (category / 2) % cfg.num_tasks;
      return member % cfg.num_tasks;
  }
  return 0;
}

Box random_box(Rng& rng) {
  std::uniform_real_distribution<double> size(0.08, 0.30);
  const double w = size(rng);
  const double h = size(rng);
  std::uniform_real_distribution<double> px(0.0, 1.0 - w);
  std::uniform_real_distribution<double> py(0.0, 1.0 - h);
  const double x0 = px(rng);
  const double y0 = py(rng);
  return Box{x0, y0, x0 + w, y0 + h};
}

Box jitter_box(const Box& b, double jitter, Rng& rng) {
  if (jitter == 0.0) return b;
  std::uniform_real_distribution<double> u(-jitter, jitter);
  const double w = b.x1 - b.x0;
  const double h = b.y1 - b.y0;
  const double dx = u(rng) * w;
  const double dy = u(rng) * h;
  const double sw = 1.0 + u(rng);
  const double sh = 1.0 + u(rng);
  Box out;
  out.x0 = std::clamp(b.x0 + dx, 0.0, 1.0);
  out.y0 = std::clamp(b.y0 + dy, 0.0, 1.0);
  out.x1 = std::clamp(out.x0 + w * sw, out.x0 + 1e-3, 1.0);
  out.y1 = std::clamp(out.y0 + h * sh, out.y0 + 1e-3, 1.0);
  return out;
}

}  // namespace

World gen_world(const WorldConfig& cfg) {
  cfg.validate();
  World w;
  w.cfg = cfg;
  Rng rng(derive_seed(cfg.seed, "world"));

  // mutually separated category prototypes; bounded retries, then the
  // requested geometry is declared infeasible
  const int p = cfg.num_categories;
  const Vec object_center = [&] {
    Vec u = unit_direction(cfg.feature_dim, rng);
    for (double& x : u) x *= cfg.objectness_offset * cfg.category_spread;
    return u;
  }();
  std::vector<Vec> cat_protos;
  bool ok = false;
  for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
    cat_protos.clear();
    for (int i = 0; i < p; ++i) {
      Vec proto = unit_direction(cfg.feature_dim, rng);
      for (double& x : proto) x *= cfg.category_spread;
      axpy(1.0, object_center, proto);
      cat_protos.push_back(std::move(proto));
    }
    ok = true;
    for (int i = 0; i < p && ok; ++i)
      for (int j = i + 1; j < p && ok; ++j)
        if (std::sqrt(dist_sq(cat_protos[static_cast<std::size_t>(i)],
                              cat_protos[static_cast<std::size_t>(j)])) <
            cfg.category_spread)
          ok = false;
  }
  if (!ok)
    throw std::invalid_argument(
        "gen_world: infeasible geometry, cannot separate category prototypes "
        "by category_spread");

  std::map<int, int> class_to_cat;
  w.tasks.new_classes.assign(static_cast<std::size_t>(cfg.num_tasks), {});
  for (int cat = 0; cat < p; ++cat) {
    for (int k = 0; k < cfg.classes_per_category; ++k) {
      const int cls = cat * cfg.classes_per_category + k;
      Vec proto = cat_protos[static_cast<std::size_t>(cat)];
      const Vec offset = gaussian_vec(cfg.feature_dim, cfg.class_spread, rng);
      axpy(1.0, offset, proto);
      w.class_prototypes.push_back(std::move(proto));
      class_to_cat[cls] = cat;
      w.tasks.new_classes[static_cast<std::size_t>(task_of(cfg, cat, k))]
          .push_back(cls);
    }
  }
  for (auto& task : w.tasks.new_classes) {
    if (task.empty())
      throw std::invalid_argument("gen_world: a task received no classes");
    std::sort(task.begin(), task.end());
  }
  w.categories = CategoryMap(std::move(class_to_cat));
  for (const Vec& proto : w.class_prototypes)
    w.max_prototype_norm = std::max(w.max_prototype_norm, norm(proto));
  return w;
}

SceneRecord gen_scene(const World& world, int task_index, int scene_id,
                      Rng& rng) {
  const WorldConfig& cfg = world.cfg;
  if (task_index < 0 || task_index >= cfg.num_tasks)
    throw std::invalid_argument("gen_scene: bad task index");
  SceneRecord s;
  s.scene_id = scene_id;
  s.task_index = task_index;
  const std::vector<int> known = world.tasks.known_at(task_index);
  const std::vector<int> unknown = world.tasks.unknown_at(task_index);

  auto add_object = [&](int cls, bool annotated) {
    SceneObject o;
    o.class_id = cls;
    o.annotated = annotated;
    o.box = random_box(rng);
    o.query_box = jitter_box(o.box, cfg.box_jitter, rng);
    o.feature = world.class_prototypes[static_cast<std::size_t>(cls)];
    if (cfg.noise_sigma > 0) {
      const Vec noise = gaussian_vec(cfg.feature_dim, cfg.noise_sigma, rng);
      axpy(1.0, noise, o.feature);
    }
    s.objects.push_back(std::move(o));
  };

  std::uniform_int_distribution<int> pick_known(0, static_cast<int>(known.size()) - 1);
  for (int i = 0; i < cfg.known_per_scene; ++i)
    add_object(known[static_cast<std::size_t>(pick_known(rng))], true);
  if (!unknown.empty()) {
    std::uniform_int_distribution<int> pick_unknown(
        0, static_cast<int>(unknown.size()) - 1);
    for (int i = 0; i < cfg.unknown_per_scene; ++i)
      add_object(unknown[static_cast<std::size_t>(pick_unknown(rng))], false);
  }

  for (int i = 0; i < cfg.background_per_scene; ++i) {
    BackgroundQuery q;
    q.box = random_box(rng);
    q.feature = gaussian_vec(cfg.feature_dim, cfg.background_sigma, rng);
    s.background.push_back(std::move(q));
  }
  return s;
}

std::vector<SceneRecord> gen_scene_set(const World& world, int task_index,
                                       std::uint64_t seed, int count,
                                       int id_offset) {
  std::vector<SceneRecord> scenes(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, "scene", static_cast<std::uint64_t>(task_index),
                        static_cast<std::uint64_t>(i)));
    scenes[static_cast<std::size_t>(i)] =
        gen_scene(world, task_index, id_offset + i, rng);
  }
  return scenes;
}

std::vector<double> world_semantic_overlap(const World& world) {
  WordEmbeddingTable table;
  SplitDefinition split;
  for (std::size_t cls = 0; cls < world.class_prototypes.size(); ++cls)
    table.insert("class_" + std::to_string(cls), world.class_prototypes[cls]);
  for (const auto& task : world.tasks.new_classes) {
    std::vector<std::string> names;
    for (int cls : task) names.push_back("class_" + std::to_string(cls));
    split.tasks.push_back(std::move(names));
  }
  std::vector<double> out;
  for (int t = 1; t < split.num_tasks(); ++t) {
    const auto s = semantic_overlap(split, table, t);
    out.push_back(s.value_or(0.0));
  }
  return out;
}

StepBatch make_step_batch(std::span<const SceneRecord* const> scenes,
                          const std::set<int>& active_classes) {
  StepBatch b;
  int group = 0;
  for (const SceneRecord* s : scenes) {
    for (const SceneObject& o : s->objects) {
      b.features.push_back(o.feature);
      // the class id of an unannotated object is never read here
      const bool labeled = o.annotated && active_classes.count(o.class_id) > 0;
      b.matched_class.push_back(labeled ? o.class_id : -1);
      b.group.push_back(group);
    }
    for (const BackgroundQuery& q : s->background) {
      b.features.push_back(q.feature);
      b.matched_class.push_back(-1);
      b.group.push_back(group);
    }
    ++group;
  }
  return b;
}

namespace {

struct FrozenRelabelState {
  CentroidSet centroids;
  double delta = 0.0;
};

// End-of-task relabel state: centroids from the final buffer, delta as the
// greatest distance from any revealed-class training embedding (final
// parameters) to any centroid.
FrozenRelabelState freeze_relabel_state(const EmbedderParams& params,
                                        const ReplayBuffer& buffer,
                                        std::span<const SceneRecord> scenes,
                                        const std::set<int>& revealed,
                                        const Curvature c) {
  FrozenRelabelState f;
  f.centroids = class_centroids(buffer, c);
  if (f.centroids.empty()) return f;
  std::vector<Vec> matched;
  for (const SceneRecord& s : scenes) {
    for (const SceneObject& o : s.objects) {
      if (!o.annotated || revealed.count(o.class_id) == 0) continue;
      matched.push_back(embed(params, o.feature, c));
    }
  }
  f.delta = batch_threshold(matched, f.centroids, c).value_or(0.0);
  return f;
}

struct EvalOutput {
  std::vector<DetectionRecord> detections;
  std::vector<GtObject> ground_truth;
};

EvalOutput evaluate_task(const World& world, const EmbedderParams& params,
                         const MethodConfig& method,
                         const FrozenRelabelState& frozen, int task,
                         std::span<const SceneRecord> scenes) {
  const Curvature c = method.loss.curvature;
  const std::vector<int> known = world.tasks.known_at(task);
  const std::set<int> unknown_set = [&] {
    const auto u = world.tasks.unknown_at(task);
    return std::set<int>(u.begin(), u.end());
  }();
  const int n_known = static_cast<int>(known.size());

  std::vector<std::vector<DetectionRecord>> dets_per_scene(scenes.size());
  std::vector<std::vector<GtObject>> gts_per_scene(scenes.size());

#pragma omp parallel for schedule(static)
  for (int si = 0; si < static_cast<int>(scenes.size()); ++si) {
    const SceneRecord& s = scenes[static_cast<std::size_t>(si)];
    auto& dets = dets_per_scene[static_cast<std::size_t>(si)];
    auto& gts = gts_per_scene[static_cast<std::size_t>(si)];

    auto classify = [&](const Vec& feature, const Box& qbox) {
      const Vec z = embed(params, feature, c);
      Vec logits(static_cast<std::size_t>(n_known) + 2);
      for (int k = 0; k < n_known; ++k) {
        const int row = known[static_cast<std::size_t>(k)];
        const double* hw =
            &params.head_w[static_cast<std::size_t>(row) * params.embed_dim];
        logits[static_cast<std::size_t>(k)] =
            dot(std::span<const double>(hw,
                                        static_cast<std::size_t>(params.embed_dim)),
                z) +
            params.head_b[static_cast<std::size_t>(row)];
      }
      for (int extra = 0; extra < 2; ++extra) {
        const int row = extra == 0 ? params.unknown_slot() : params.background_slot();
        const double* hw =
            &params.head_w[static_cast<std::size_t>(row) * params.embed_dim];
        logits[static_cast<std::size_t>(n_known + extra)] =
            dot(std::span<const double>(hw,
                                        static_cast<std::size_t>(params.embed_dim)),
                z) +
            params.head_b[static_cast<std::size_t>(row)];
      }
      double lmax = logits[0];
      for (double v : logits) lmax = std::max(lmax, v);
      double zsum = 0.0;
      for (double v : logits) zsum += std::exp(v - lmax);
      int best = 0;
      for (std::size_t j = 1; j < logits.size(); ++j)
        if (logits[j] > logits[static_cast<std::size_t>(best)])
          best = static_cast<int>(j);
      const double pbest = std::exp(logits[static_cast<std::size_t>(best)] - lmax) / zsum;

      if (best < n_known) {
        dets.push_back(DetectionRecord{s.scene_id,
                                       known[static_cast<std::size_t>(best)],
                                       pbest, qbox});
        return;
      }
      // not a known argmax: the frozen relabel rule decides unknown/background
      bool as_unknown = false;
      if (method.relabel == RelabelMode::AllUnmatched) {
        as_unknown = true;
      } else if (method.relabel == RelabelMode::Adaptive &&
                 !frozen.centroids.empty()) {
        double dmin = std::numeric_limits<double>::infinity();
        for (const auto& [cls, cent] : frozen.centroids.by_class)
          dmin = std::min(dmin, hyp_dist(z, cent, c));
        as_unknown = dmin <= frozen.delta;
      }
      if (as_unknown) {
        const double pu =
            std::exp(logits[static_cast<std::size_t>(n_known)] - lmax) / zsum;
        const double pb =
            std::exp(logits[static_cast<std::size_t>(n_known + 1)] - lmax) / zsum;
        dets.push_back(DetectionRecord{s.scene_id, kUnknownClass, pu + pb, qbox});
      }
    };

    for (const SceneObject& o : s.objects) {
      classify(o.feature, o.query_box);
      gts.push_back(GtObject{s.scene_id, o.class_id,
                             unknown_set.count(o.class_id) > 0, o.box});
    }
    for (const BackgroundQuery& q : s.background) classify(q.feature, q.box);
  }

  EvalOutput out;
  for (const auto& d : dets_per_scene)
    out.detections.insert(out.detections.end(), d.begin(), d.end());
  for (const auto& g : gts_per_scene)
    out.ground_truth.insert(out.ground_truth.end(), g.begin(), g.end());
  return out;
}

}  // namespace

ProtocolResult run_protocol(const World& world, const MethodConfig& method,
                            std::uint64_t method_seed,
                            const ProtocolHooks* hooks, bool keep_detections) {
  method.loss.validate();
  const WorldConfig& wc = world.cfg;
  const Curvature c = method.loss.curvature;

  Rng init_rng(derive_seed(method_seed, "init"));
  EmbedderParams params =
      EmbedderParams::init(wc.feature_dim, method.embed_dim,
                           wc.total_classes(), init_rng, method.w_init_scale);
  params.tangent_cap = method.tangent_cap;
  ReplayBuffer buffer(method.buffer_capacity);
  ExemplarStore exemplars;
  exemplars.capacity = method.exemplars_per_class;

  const Schedule schedule = default_schedule(wc.num_tasks, method.schedule);
  ProtocolResult result;
  std::size_t global_step = 0;

  std::vector<std::vector<SceneRecord>> train_scenes(
      static_cast<std::size_t>(wc.num_tasks));
  for (int t = 0; t < wc.num_tasks; ++t)
    train_scenes[static_cast<std::size_t>(t)] = gen_scene_set(
        world, t, derive_seed(wc.seed, "train-scenes", static_cast<std::uint64_t>(t)),
        wc.train_scenes_per_task, t * 100000);

  for (int t = 0; t < wc.num_tasks; ++t) {
    for (const Phase& phase : schedule.phases) {
      if (phase.task != t) continue;
      const std::vector<int> active_vec =
          phase.kind == PhaseKind::Task
              ? world.tasks.new_classes[static_cast<std::size_t>(t)]
              : world.tasks.known_at(t);
      const std::set<int> active(active_vec.begin(), active_vec.end());

      // fine-tune phases replay stored exemplar scenes next to current data
      std::vector<const SceneRecord*> stream;
      for (const SceneRecord& s : train_scenes[static_cast<std::size_t>(t)])
        stream.push_back(&s);
      if (phase.kind == PhaseKind::Finetune) {
        for (const auto& [cls, scenes] : exemplars.per_class)
          for (const SceneRecord& s : scenes) stream.push_back(&s);
      }

      for (int epoch = 0; epoch < phase.epochs; ++epoch) {
        std::vector<int> order(stream.size());
        for (std::size_t i = 0; i < order.size(); ++i)
          order[i] = static_cast<int>(i);
        Rng order_rng(derive_seed(method_seed, "order",
                                  static_cast<std::uint64_t>(global_step),
                                  static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), order_rng);

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(method.batch_scenes)) {
          std::vector<const SceneRecord*> chunk;
          for (std::size_t i = start;
               i < std::min(order.size(),
                            start + static_cast<std::size_t>(method.batch_scenes));
               ++i)
            chunk.push_back(stream[static_cast<std::size_t>(order[i])]);

          const StepBatch batch = make_step_batch(chunk, active);
          StepConfig scfg;
          scfg.loss = method.loss;
          scfg.relabel = method.relabel;
          scfg.scope = method.scope;
          scfg.background_weight = method.background_weight;
          scfg.unknown_weight = method.unknown_weight;
          scfg.weight_decay = method.weight_decay;
          const StepOutcome outcome =
              training_step(params, batch, buffer, world.categories, active_vec,
                            scfg, derive_seed(method_seed, "step", global_step));
          ParamGrads scaled = outcome.grads;
          for (double& g : scaled.head_w) g *= method.head_lr_scale;
          for (double& g : scaled.head_b) g *= method.head_lr_scale;
          sgd_step(params, scaled, phase.lr, global_step);

          std::size_t matched = 0;
          for (std::size_t q = 0; q < batch.matched_class.size(); ++q) {
            if (batch.matched_class[q] < 0) continue;
            ++matched;
            buffer.push(batch.matched_class[q], outcome.embeddings[q]);
          }
          if (hooks && hooks->on_step) {
            StepObservation obs;
            obs.step = global_step;
            obs.task = t;
            obs.phase = phase.kind;
            obs.total = outcome.total;
            obs.cls = outcome.cls;
            obs.hyp = outcome.hyp;
            obs.reg = outcome.reg;
            obs.delta = outcome.delta;
            obs.matched = matched;
            obs.unmatched = batch.features.size() - matched;
            obs.relabeled = outcome.relabeled.size();
            hooks->on_step(obs);
          }
          ++global_step;
        }
      }
    }

    // task boundary: exemplars, frozen relabel state, held-out evaluation
    Rng ex_rng(derive_seed(method_seed, "exemplars", static_cast<std::uint64_t>(t)));
    const auto& new_cls = world.tasks.new_classes[static_cast<std::size_t>(t)];
    snapshot_exemplars(exemplars, train_scenes[static_cast<std::size_t>(t)],
                       std::set<int>(new_cls.begin(), new_cls.end()),
                       method.exemplars_per_class, ex_rng);

    const std::vector<int> revealed_vec = world.tasks.known_at(t);
    const FrozenRelabelState frozen = freeze_relabel_state(
        params, buffer, train_scenes[static_cast<std::size_t>(t)],
        std::set<int>(revealed_vec.begin(), revealed_vec.end()), c);

    const std::vector<SceneRecord> eval_scenes = gen_scene_set(
        world, t, derive_seed(wc.seed, "eval-scenes", static_cast<std::uint64_t>(t)),
        wc.eval_scenes_per_task, 1000000 + t * 100000);
    EvalOutput eval =
        evaluate_task(world, params, method, frozen, t, eval_scenes);

    TaskOutput to;
    to.frozen_delta = frozen.delta;
    const std::vector<int> previous = t > 0 ? world.tasks.known_at(t - 1)
                                            : std::vector<int>{};
    to.metrics = evaluate_detections(eval.detections, eval.ground_truth,
                                     previous, new_cls, method.iou_threshold);
    to.metrics.task = t + 1;
    if (keep_detections) {
      to.detections = std::move(eval.detections);
      to.ground_truth = std::move(eval.ground_truth);
    }
    result.tasks.push_back(std::move(to));

    if (hooks && hooks->on_task_end) {
      TaskEndState state;
      state.task = t;
      state.params = &params;
      state.buffer = &buffer;
      state.frozen_delta = frozen.delta;
      hooks->on_task_end(state);
    }
  }
  return result;
}

AblationTables ablation_suite(const World& world, const MethodConfig& base,
                              std::uint64_t method_seed) {
  AblationTables tables;
  auto run = [&](const std::string& name, const MethodConfig& m) {
    const ProtocolResult r = run_protocol(world, m, method_seed);
    AblationRow row;
    row.name = name;
    for (const TaskOutput& t : r.tasks) row.per_task.push_back(t.metrics);
    return row;
  };

  tables.components.push_back(run("full", base));
  {
    MethodConfig m = base;
    m.loss.curvature = Curvature(0.0);
    tables.components.push_back(run("cosine_c0", m));
  }
  {
    MethodConfig m = base;
    m.loss.beta = 0.0;
    tables.components.push_back(run("no_superclass_reg", m));
  }
  {
    MethodConfig m = base;
    m.relabel = RelabelMode::AllUnmatched;
    tables.components.push_back(run("all_unmatched_relabel", m));
  }

  for (double c : {0.0, 0.1, 0.2, 0.5}) {
    MethodConfig m = base;
    m.loss.curvature = Curvature(c);
    char name[32];
    std::snprintf(name, sizeof(name), "c=%.1f", c);
    tables.curvature.push_back(run(name, m));
  }
  return tables;
}

}  // namespace hypow
