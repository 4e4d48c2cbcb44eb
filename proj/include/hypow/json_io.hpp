#pragma once

#include <json.hpp>
#include <string>

#include "hypow/memory.hpp"
#include "hypow/metrics.hpp"
#include "hypow/sim.hpp"

namespace hypow {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";

/// Root of every run: world + method + one root seed. The output directory
/// is intentionally not part of the serialized form, so reruns into
/// different directories stay byte-identical.
struct RunConfig {
  WorldConfig world;
  MethodConfig method;
  std::uint64_t seed = 1;
};

Json to_json(const WorldConfig& cfg);
WorldConfig world_config_from_json(const Json& j);

Json to_json(const MethodConfig& cfg);
MethodConfig method_config_from_json(const Json& j);

Json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::string& path);

Json to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const Json& j);

Json to_json(const Box& b);
Box box_from_json(const Json& j);

/// World dump: config, prototypes, categories, task composition.
Json world_to_json(const World& w);

/// Ground-truth file for external scoring (cmd eval): every object visible,
/// with the previous/current class partition of the evaluated task.
struct GroundTruthFile {
  int task = 1;  // 1-based
  std::vector<int> previous_classes;
  std::vector<int> current_classes;
  std::vector<GtObject> objects;
};

Json to_json(const GroundTruthFile& g);
GroundTruthFile ground_truth_from_json(const Json& j);

/// Line-delimited detections, one JSON record per line; class_id -1 means
/// unknown. Throws std::runtime_error naming the offending line.
std::string detections_to_jsonl(std::span<const DetectionRecord> dets);
std::vector<DetectionRecord> detections_from_jsonl(const std::string& text);

/// Versioned checkpoint: parameters, replay buffer, task index, rng state.
struct Checkpoint {
  int task = 0;  // 0-based task just finished
  EmbedderParams params;
  int buffer_capacity = 10;
  std::map<int, std::vector<Vec>> buffer_entries;
  double frozen_delta = 0.0;
  std::string rng_state;
};

Json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const Json& j);

Json ablation_to_json(const AblationTables& t);
std::string ablation_to_text(const AblationTables& t);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace hypow
