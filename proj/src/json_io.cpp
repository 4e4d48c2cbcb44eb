#include "hypow/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace hypow {
namespace {

std::string split_mode_name(SplitMode m) {
  switch (m) {
    case SplitMode::Low: return "low";
    case SplitMode::Medium: return "medium";
    case SplitMode::High: return "high";
  }
  return "high";
}

SplitMode split_mode_from(const std::string& s) {
  if (s == "low") return SplitMode::Low;
  if (s == "medium") return SplitMode::Medium;
  if (s == "high") return SplitMode::High;
  throw std::invalid_argument("unknown split mode: " + s);
}

std::string relabel_name(RelabelMode m) {
  switch (m) {
    case RelabelMode::Adaptive: return "adaptive";
    case RelabelMode::AllUnmatched: return "all-unmatched";
    case RelabelMode::Off: return "off";
  }
  return "adaptive";
}

RelabelMode relabel_from(const std::string& s) {
  if (s == "adaptive") return RelabelMode::Adaptive;
  if (s == "all-unmatched") return RelabelMode::AllUnmatched;
  if (s == "off") return RelabelMode::Off;
  throw std::invalid_argument("unknown relabel mode: " + s);
}

}  // namespace

Json to_json(const WorldConfig& c) {
  return Json{{"num_categories", c.num_categories},
              {"classes_per_category", c.classes_per_category},
              {"feature_dim", c.feature_dim},
              {"category_spread", c.category_spread},
              {"class_spread", c.class_spread},
              {"objectness_offset", c.objectness_offset},
              {"noise_sigma", c.noise_sigma},
              {"num_tasks", c.num_tasks},
              {"split_mode", split_mode_name(c.split_mode)},
              {"seed", c.seed},
              {"known_per_scene", c.known_per_scene},
              {"unknown_per_scene", c.unknown_per_scene},
              {"background_per_scene", c.background_per_scene},
              {"background_sigma", c.background_sigma},
              {"box_jitter", c.box_jitter},
              {"train_scenes_per_task", c.train_scenes_per_task},
              {"eval_scenes_per_task", c.eval_scenes_per_task}};
}

WorldConfig world_config_from_json(const Json& j) {
  WorldConfig c;
  c.num_categories = j.value("num_categories", c.num_categories);
  c.classes_per_category = j.value("classes_per_category", c.classes_per_category);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.category_spread = j.value("category_spread", c.category_spread);
  c.class_spread = j.value("class_spread", c.class_spread);
  c.objectness_offset = j.value("objectness_offset", c.objectness_offset);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.num_tasks = j.value("num_tasks", c.num_tasks);
  c.split_mode = split_mode_from(j.value("split_mode", split_mode_name(c.split_mode)));
  c.seed = j.value("seed", c.seed);
  c.known_per_scene = j.value("known_per_scene", c.known_per_scene);
  c.unknown_per_scene = j.value("unknown_per_scene", c.unknown_per_scene);
  c.background_per_scene = j.value("background_per_scene", c.background_per_scene);
  c.background_sigma = j.value("background_sigma", c.background_sigma);
  c.box_jitter = j.value("box_jitter", c.box_jitter);
  c.train_scenes_per_task = j.value("train_scenes_per_task", c.train_scenes_per_task);
  c.eval_scenes_per_task = j.value("eval_scenes_per_task", c.eval_scenes_per_task);
  return c;
}

Json to_json(const MethodConfig& c) {
  return Json{{"alpha", c.loss.alpha},
              {"beta", c.loss.beta},
              {"tau1", c.loss.tau1},
              {"tau2", c.loss.tau2},
              {"curvature", c.loss.curvature.value()},
              {"positives_per_anchor", c.loss.positives_per_anchor},
              {"relabel", relabel_name(c.relabel)},
              {"delta_scope", c.scope == DeltaScope::Batch ? "batch" : "image"},
              {"buffer_capacity", c.buffer_capacity},
              {"exemplars_per_class", c.exemplars_per_class},
              {"batch_scenes", c.batch_scenes},
              {"embed_dim", c.embed_dim},
              {"w_init_scale", c.w_init_scale},
              {"tangent_cap", c.tangent_cap},
              {"background_weight", c.background_weight},
              {"unknown_weight", c.unknown_weight},
              {"weight_decay", c.weight_decay},
              {"head_lr_scale", c.head_lr_scale},
              {"iou_threshold", c.iou_threshold},
              {"schedule",
               Json{{"task1_epochs", c.schedule.task1_epochs},
                    {"tail_epochs", c.schedule.tail_epochs},
                    {"task_epochs", c.schedule.task_epochs},
                    {"finetune_epochs", c.schedule.finetune_epochs},
                    {"lr", c.schedule.lr},
                    {"tail_lr", c.schedule.tail_lr}}}};
}

MethodConfig method_config_from_json(const Json& j) {
  MethodConfig c;
  c.loss.alpha = j.value("alpha", c.loss.alpha);
  c.loss.beta = j.value("beta", c.loss.beta);
  c.loss.tau1 = j.value("tau1", c.loss.tau1);
  c.loss.tau2 = j.value("tau2", c.loss.tau2);
  c.loss.curvature = Curvature(j.value("curvature", c.loss.curvature.value()));
  c.loss.positives_per_anchor =
      j.value("positives_per_anchor", c.loss.positives_per_anchor);
  c.relabel = relabel_from(j.value("relabel", relabel_name(c.relabel)));
  c.scope = j.value("delta_scope", std::string("batch")) == "image"
                ? DeltaScope::Image
                : DeltaScope::Batch;
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.exemplars_per_class = j.value("exemplars_per_class", c.exemplars_per_class);
  c.batch_scenes = j.value("batch_scenes", c.batch_scenes);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.w_init_scale = j.value("w_init_scale", c.w_init_scale);
  c.tangent_cap = j.value("tangent_cap", c.tangent_cap);
  c.background_weight = j.value("background_weight", c.background_weight);
  c.unknown_weight = j.value("unknown_weight", c.unknown_weight);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.head_lr_scale = j.value("head_lr_scale", c.head_lr_scale);
  c.iou_threshold = j.value("iou_threshold", c.iou_threshold);
  if (j.contains("schedule")) {
    const Json& s = j["schedule"];
    c.schedule.task1_epochs = s.value("task1_epochs", c.schedule.task1_epochs);
    c.schedule.tail_epochs = s.value("tail_epochs", c.schedule.tail_epochs);
    c.schedule.task_epochs = s.value("task_epochs", c.schedule.task_epochs);
    c.schedule.finetune_epochs =
        s.value("finetune_epochs", c.schedule.finetune_epochs);
    c.schedule.lr = s.value("lr", c.schedule.lr);
    c.schedule.tail_lr = s.value("tail_lr", c.schedule.tail_lr);
  }
  return c;
}

Json to_json(const RunConfig& c) {
  return Json{{"version", kSchemaVersion},
              {"artifact", kArtifactVersion},
              {"seed", c.seed},
              {"world", to_json(c.world)},
              {"method", to_json(c.method)}};
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("world")) c.world = world_config_from_json(j["world"]);
  if (j.contains("method")) c.method = method_config_from_json(j["method"]);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw std::invalid_argument("invalid config JSON in " + path + ": " +
                                e.what());
  }
  return run_config_from_json(j);
}

Json to_json(const Box& b) { return Json::array({b.x0, b.y0, b.x1, b.y1}); }

Box box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4)
    throw std::invalid_argument("box must be [x0, y0, x1, y1]");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
             j[3].get<double>()};
}

Json to_json(const MetricsReport& r) {
  Json per_class = Json::object();
  for (const auto& [cls, ap] : r.per_class_ap)
    per_class[std::to_string(cls)] = ap;
  return Json{{"version", kSchemaVersion},
              {"task", r.task},
              {"u_recall", r.u_recall ? Json(*r.u_recall) : Json(nullptr)},
              {"map_previous",
               r.map_previous ? Json(*r.map_previous) : Json(nullptr)},
              {"map_current", r.map_current},
              {"map_both", r.map_both},
              {"a_ose", r.a_ose},
              {"per_class_ap", per_class}};
}

MetricsReport metrics_report_from_json(const Json& j) {
  MetricsReport r;
  r.task = j.value("task", 1);
  if (j.contains("u_recall") && !j["u_recall"].is_null())
    r.u_recall = j["u_recall"].get<double>();
  if (j.contains("map_previous") && !j["map_previous"].is_null())
    r.map_previous = j["map_previous"].get<double>();
  r.map_current = j.value("map_current", 0.0);
  r.map_both = j.value("map_both", 0.0);
  r.a_ose = j.value("a_ose", 0);
  if (j.contains("per_class_ap"))
    for (const auto& [key, val] : j["per_class_ap"].items())
      r.per_class_ap[std::stoi(key)] = val.get<double>();
  return r;
}

Json world_to_json(const World& w) {
  Json protos = Json::array();
  for (const Vec& p : w.class_prototypes) protos.push_back(p);
  Json cats = Json::object();
  for (const auto& [cls, cat] : w.categories.mapping())
    cats[std::to_string(cls)] = cat;
  Json tasks = Json::array();
  for (const auto& t : w.tasks.new_classes) tasks.push_back(t);
  return Json{{"version", kSchemaVersion},
              {"artifact", kArtifactVersion},
              {"config", to_json(w.cfg)},
              {"class_prototypes", protos},
              {"categories", cats},
              {"task_classes", tasks},
              {"max_prototype_norm", w.max_prototype_norm}};
}

Json to_json(const GroundTruthFile& g) {
  Json objs = Json::array();
  for (const GtObject& o : g.objects)
    objs.push_back(Json{{"scene", o.scene_id},
                        {"class", o.class_id},
                        {"unknown", o.unknown},
                        {"box", to_json(o.box)}});
  return Json{{"version", kSchemaVersion},
              {"task", g.task},
              {"previous_classes", g.previous_classes},
              {"current_classes", g.current_classes},
              {"objects", objs}};
}

GroundTruthFile ground_truth_from_json(const Json& j) {
  GroundTruthFile g;
  g.task = j.value("task", 1);
  if (j.contains("previous_classes"))
    g.previous_classes = j["previous_classes"].get<std::vector<int>>();
  if (j.contains("current_classes"))
    g.current_classes = j["current_classes"].get<std::vector<int>>();
  for (const Json& o : j.at("objects")) {
    GtObject gt;
    gt.scene_id = o.at("scene").get<int>();
    gt.class_id = o.at("class").get<int>();
    gt.unknown = o.value("unknown", false);
    gt.box = box_from_json(o.at("box"));
    g.objects.push_back(gt);
  }
  return g;
}

std::string detections_to_jsonl(std::span<const DetectionRecord> dets) {
  std::ostringstream out;
  for (const DetectionRecord& d : dets) {
    out << Json{{"v", kSchemaVersion},
                {"scene", d.scene_id},
                {"class", d.class_id},
                {"confidence", d.confidence},
                {"box", to_json(d.box)}}
               .dump()
        << "\n";
  }
  return out.str();
}

std::vector<DetectionRecord> detections_from_jsonl(const std::string& text) {
  std::vector<DetectionRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw std::runtime_error("detections line " + std::to_string(lineno) +
                               ": " + e.what());
    }
    DetectionRecord d;
    d.scene_id = j.at("scene").get<int>();
    d.class_id = j.at("class").get<int>();
    d.confidence = j.at("confidence").get<double>();
    d.box = box_from_json(j.at("box"));
    out.push_back(d);
  }
  return out;
}

Json to_json(const Checkpoint& c) {
  Json buffer = Json::object();
  for (const auto& [cls, entries] : c.buffer_entries) {
    Json ring = Json::array();
    for (const Vec& v : entries) ring.push_back(v);
    buffer[std::to_string(cls)] = ring;
  }
  return Json{{"version", kSchemaVersion},
              {"artifact", kArtifactVersion},
              {"task", c.task},
              {"params",
               Json{{"feature_dim", c.params.feature_dim},
                    {"embed_dim", c.params.embed_dim},
                    {"num_classes", c.params.num_classes},
                    {"tangent_cap", c.params.tangent_cap},
                    {"w", c.params.w},
                    {"head_w", c.params.head_w},
                    {"head_b", c.params.head_b}}},
              {"buffer_capacity", c.buffer_capacity},
              {"buffer", buffer},
              {"frozen_delta", c.frozen_delta},
              {"rng_state", c.rng_state}};
}

Checkpoint checkpoint_from_json(const Json& j) {
  Checkpoint c;
  c.task = j.value("task", 0);
  const Json& p = j.at("params");
  c.params.feature_dim = p.at("feature_dim").get<int>();
  c.params.embed_dim = p.at("embed_dim").get<int>();
  c.params.num_classes = p.at("num_classes").get<int>();
  c.params.tangent_cap = p.value("tangent_cap", 4.0);
  c.params.w = p.at("w").get<std::vector<double>>();
  c.params.head_w = p.at("head_w").get<std::vector<double>>();
  c.params.head_b = p.at("head_b").get<std::vector<double>>();
  c.buffer_capacity = j.value("buffer_capacity", 10);
  if (j.contains("buffer"))
    for (const auto& [key, ring] : j["buffer"].items()) {
      std::vector<Vec> entries;
      for (const Json& v : ring) entries.push_back(v.get<Vec>());
      c.buffer_entries[std::stoi(key)] = std::move(entries);
    }
  c.frozen_delta = j.value("frozen_delta", 0.0);
  c.rng_state = j.value("rng_state", std::string());
  return c;
}

namespace {

Json row_to_json(const AblationRow& row) {
  Json per_task = Json::array();
  for (const MetricsReport& m : row.per_task) per_task.push_back(to_json(m));
  return Json{{"name", row.name}, {"per_task", per_task}};
}

}  // namespace

Json ablation_to_json(const AblationTables& t) {
  Json components = Json::array();
  for (const AblationRow& r : t.components) components.push_back(row_to_json(r));
  Json curvature = Json::array();
  for (const AblationRow& r : t.curvature) curvature.push_back(row_to_json(r));
  return Json{{"version", kSchemaVersion},
              {"artifact", kArtifactVersion},
              {"components", components},
              {"curvature", curvature}};
}

std::string ablation_to_text(const AblationTables& t) {
  std::ostringstream out;
  auto table = [&](const std::string& title,
                   const std::vector<AblationRow>& rows) {
    out << title << "\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-24s", "variant");
    out << buf;
    if (!rows.empty()) {
      for (std::size_t t_i = 0; t_i < rows.front().per_task.size(); ++t_i) {
        std::snprintf(buf, sizeof(buf), " | T%zu U-Recall  T%zu mAP", t_i + 1,
                      t_i + 1);
        out << buf;
      }
    }
    out << "\n";
    for (const AblationRow& r : rows) {
      std::snprintf(buf, sizeof(buf), "%-24s", r.name.c_str());
      out << buf;
      for (const MetricsReport& m : r.per_task) {
        if (m.u_recall)
          std::snprintf(buf, sizeof(buf), " |    %6.4f    %6.4f", *m.u_recall,
                        m.map_both);
        else
          std::snprintf(buf, sizeof(buf), " |       n/a    %6.4f", m.map_both);
        out << buf;
      }
      out << "\n";
    }
    out << "\n";
  };
  table("component ablation", t.components);
  table("curvature sweep", t.curvature);
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hypow
