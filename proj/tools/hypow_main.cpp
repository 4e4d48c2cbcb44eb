// hypow: Poincare-ball open-world detection experiments on a synthetic
// simulator. Subcommands: geom-check, train, ablate, split-sim, eval.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "hypow/geom_check.hpp"
#include "hypow/json_io.hpp"
#include "hypow/splitsim.hpp"

namespace fs = std::filesystem;
using namespace hypow;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("HYPOW_OUT");
  return env ? env : "hypow-out";
}

int cmd_geom_check(std::uint64_t seed, int trials, bool arctan) {
  const GeomCheckReport report = run_geometry_checks(
      seed, trials, arctan ? DistKind::Arctan : DistKind::Artanh);
  std::printf("geometry checks (seed=%llu, trials=%d, dist=%s)\n",
              static_cast<unsigned long long>(seed), trials,
              arctan ? "arctan-variant" : "artanh");
  for (const CheckLine& l : report.lines)
    std::printf("  [%s] %-40s worst=%.3e tol=%.3e\n", l.pass ? "PASS" : "FAIL",
                l.name.c_str(), l.worst, l.tolerance);
  return report.all_pass() ? 0 : 1;
}

void apply_overrides(RunConfig& cfg, const std::optional<std::uint64_t>& seed,
                     const std::optional<std::string>& relabel,
                     const std::optional<double>& curvature,
                     const std::optional<std::string>& split_mode) {
  if (seed) cfg.seed = *seed;
  if (relabel) {
    if (*relabel == "adaptive") cfg.method.relabel = RelabelMode::Adaptive;
    else if (*relabel == "all-unmatched") cfg.method.relabel = RelabelMode::AllUnmatched;
    else if (*relabel == "off") cfg.method.relabel = RelabelMode::Off;
    else throw std::invalid_argument("bad --relabel value: " + *relabel);
  }
  if (curvature) cfg.method.loss.curvature = Curvature(*curvature);
  if (split_mode) {
    if (*split_mode == "low") cfg.world.split_mode = SplitMode::Low;
    else if (*split_mode == "medium") cfg.world.split_mode = SplitMode::Medium;
    else if (*split_mode == "high") cfg.world.split_mode = SplitMode::High;
    else throw std::invalid_argument("bad --split-mode value: " + *split_mode);
  }
}

// world data derives from the root seed; the method stream stays separate
void wire_seeds(RunConfig& cfg) {
  cfg.world.seed = derive_seed(cfg.seed, "world-data");
}

int cmd_train(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const World world = gen_world(cfg.world);
  write_text_file(out_dir + "/run_config.json", to_json(cfg).dump(2) + "\n");
  write_text_file(out_dir + "/world.json", world_to_json(world).dump(2) + "\n");

  struct TaskDump {
    Checkpoint ckpt;
  };
  std::vector<TaskDump> dumps;
  ProtocolHooks hooks;
  hooks.on_task_end = [&](const TaskEndState& s) {
    TaskDump d;
    d.ckpt.task = s.task;
    d.ckpt.params = *s.params;
    d.ckpt.buffer_capacity = s.buffer->capacity();
    for (int cls : s.buffer->classes()) {
      const auto& ring = s.buffer->entries(cls);
      d.ckpt.buffer_entries[cls] = std::vector<Vec>(ring.begin(), ring.end());
    }
    d.ckpt.frozen_delta = s.frozen_delta;
    std::ostringstream rng_state;
    rng_state << Rng(derive_seed(cfg.seed, "step"));  // stream root for resume
    d.ckpt.rng_state = rng_state.str();
    dumps.push_back(std::move(d));
  };

  const ProtocolResult result = run_protocol(
      world, cfg.method, derive_seed(cfg.seed, "method"), &hooks, true);

  Json all = Json::array();
  std::ostringstream summary;
  summary << "hypow train summary (seed " << cfg.seed << ")\n";
  for (std::size_t t = 0; t < result.tasks.size(); ++t) {
    const TaskOutput& task = result.tasks[t];
    const std::string tag = "task_" + std::to_string(t + 1);
    Json metrics = to_json(task.metrics);
    metrics["config"] = to_json(cfg);
    write_text_file(out_dir + "/" + tag + "_metrics.json",
                    metrics.dump(2) + "\n");
    write_text_file(out_dir + "/" + tag + "_detections.jsonl",
                    detections_to_jsonl(task.detections));
    GroundTruthFile gt;
    gt.task = static_cast<int>(t) + 1;
    gt.previous_classes =
        t > 0 ? world.tasks.known_at(static_cast<int>(t) - 1) : std::vector<int>{};
    gt.current_classes = world.tasks.new_classes[t];
    gt.objects = task.ground_truth;
    write_text_file(out_dir + "/" + tag + "_ground_truth.json",
                    to_json(gt).dump(2) + "\n");
    write_text_file(out_dir + "/" + tag + "_checkpoint.json",
                    to_json(dumps[t].ckpt).dump() + "\n");
    all.push_back(to_json(task.metrics));

    char line[256];
    if (task.metrics.u_recall)
      std::snprintf(line, sizeof(line),
                    "task %zu: U-Recall %.4f  mAP(both) %.4f  A-OSE %d\n",
                    t + 1, *task.metrics.u_recall, task.metrics.map_both,
                    task.metrics.a_ose);
    else
      std::snprintf(line, sizeof(line),
                    "task %zu: U-Recall n/a  mAP(both) %.4f  A-OSE %d\n",
                    t + 1, task.metrics.map_both, task.metrics.a_ose);
    summary << line;
  }
  write_text_file(out_dir + "/metrics_all.json",
                  Json{{"version", kSchemaVersion},
                       {"config", to_json(cfg)},
                       {"tasks", all}}
                          .dump(2) +
                      "\n");
  write_text_file(out_dir + "/summary.txt", summary.str());
  std::cout << summary.str();
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const World world = gen_world(cfg.world);
  const AblationTables tables =
      ablation_suite(world, cfg.method, derive_seed(cfg.seed, "method"));
  Json j = ablation_to_json(tables);
  j["config"] = to_json(cfg);
  write_text_file(out_dir + "/ablation.json", j.dump(2) + "\n");
  const std::string text = ablation_to_text(tables);
  write_text_file(out_dir + "/ablation.txt", text);
  std::cout << text;
  return 0;
}

int cmd_split_sim(const std::string& split_path,
                  const std::string& embeddings_path,
                  const std::string& out_path) {
  const Json sj = Json::parse(read_text_file(split_path));
  SplitDefinition split;
  for (const Json& task : sj.at("tasks"))
    split.tasks.push_back(task.get<std::vector<std::string>>());
  const WordEmbeddingTable table = WordEmbeddingTable::load(embeddings_path);
  const RegimeReport report = regime_report(split, table);

  Json out{{"version", kSchemaVersion},
           {"overlap", report.overlap},
           {"mean", report.mean},
           {"regime", report.regime}};
  std::printf("%-6s %-10s\n", "task", "S_t");
  for (std::size_t t = 0; t < report.overlap.size(); ++t)
    std::printf("%-6zu %.6f\n", t + 1, report.overlap[t]);
  std::printf("mean %.6f -> regime %s\n", report.mean, report.regime.c_str());
  if (!out_path.empty()) write_text_file(out_path, out.dump(2) + "\n");
  return 0;
}

int cmd_eval(const std::string& detections_path, const std::string& gt_path,
             const std::string& out_path, double iou_threshold) {
  const auto dets = detections_from_jsonl(read_text_file(detections_path));
  const GroundTruthFile gt =
      ground_truth_from_json(Json::parse(read_text_file(gt_path)));
  MetricsReport report =
      evaluate_detections(dets, gt.objects, gt.previous_classes,
                          gt.current_classes, iou_threshold);
  report.task = gt.task;
  const Json j = to_json(report);
  std::cout << j.dump(2) << "\n";
  if (!out_path.empty()) write_text_file(out_path, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poincare-ball open-world detection experiments"};
  app.require_subcommand(1);

  // geom-check
  auto* geom = app.add_subcommand("geom-check", "run the geometry invariant suite");
  std::uint64_t geom_seed = 7;
  int geom_trials = 2000;
  bool geom_arctan = false;
  geom->add_option("--seed", geom_seed, "random seed");
  geom->add_option("--trials", geom_trials, "random trials per check");
  geom->add_flag("--arctan", geom_arctan, "use the printed arctan variant");

  // train / ablate share config handling
  std::string config_path, out_dir = default_out_dir();
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> relabel_override, split_override;
  std::optional<double> curvature_override;
  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run config JSON")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed_override, "root seed override");
    cmd->add_option("--relabel", relabel_override,
                    "adaptive | all-unmatched | off");
    cmd->add_option("--curvature", curvature_override, "ball curvature c");
    cmd->add_option("--split-mode", split_override, "low | medium | high");
  };
  auto* train = app.add_subcommand("train", "run the incremental protocol");
  add_run_options(train);
  auto* ablate = app.add_subcommand("ablate", "component + curvature ablations");
  add_run_options(ablate);

  // split-sim
  auto* split = app.add_subcommand("split-sim", "semantic overlap of a split");
  std::string split_path, embeddings_path, split_out;
  split->add_option("--split", split_path, "split definition JSON")->required();
  split->add_option("--embeddings", embeddings_path, "word embedding text file")
      ->required();
  split->add_option("--out", split_out, "optional JSON report path");

  // eval
  auto* eval = app.add_subcommand("eval", "score an external detection dump");
  std::string det_path, gt_path, eval_out;
  double eval_iou = 0.5;
  eval->add_option("--detections", det_path, "detections JSONL")->required();
  eval->add_option("--ground-truth", gt_path, "ground truth JSON")->required();
  eval->add_option("--out", eval_out, "optional JSON report path");
  eval->add_option("--iou", eval_iou, "IoU threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (geom->parsed())
      return cmd_geom_check(geom_seed, geom_trials, geom_arctan);
    if (train->parsed() || ablate->parsed()) {
      RunConfig cfg = load_run_config(config_path);
      apply_overrides(cfg, seed_override, relabel_override, curvature_override,
                      split_override);
      wire_seeds(cfg);
      return train->parsed() ? cmd_train(cfg, out_dir) : cmd_ablate(cfg, out_dir);
    }
    if (split->parsed())
      return cmd_split_sim(split_path, embeddings_path, split_out);
    if (eval->parsed()) return cmd_eval(det_path, gt_path, eval_out, eval_iou);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
