#pragma once

#include <map>
#include <optional>
#include <string>

#include "hypow/util.hpp"

namespace hypow {

/// Word-embedding lookup parsed from a whitespace text file (token followed
/// by d reals per line). Multi-word class names resolve to the mean of
/// their token vectors.
class WordEmbeddingTable {
 public:
  /// Throws std::runtime_error naming the line on malformed input.
  /// Duplicate tokens: last occurrence wins; a warning goes to stderr.
  static WordEmbeddingTable load(const std::string& path);

  /// Throws std::runtime_error naming the first unresolvable token.
  Vec resolve(const std::string& class_name) const;

  void insert(const std::string& token, Vec v);
  bool contains(const std::string& token) const {
    return vectors_.count(token) > 0;
  }
  std::size_t size() const { return vectors_.size(); }
  int dim() const { return dim_; }

 private:
  std::map<std::string, Vec> vectors_;
  int dim_ = -1;
};

/// Class-name lists per task; known set at task t is the union of tasks
/// 1..t, unknown set the remainder.
struct SplitDefinition {
  std::vector<std::vector<std::string>> tasks;

  int num_tasks() const { return static_cast<int>(tasks.size()); }
  std::vector<std::string> known_at(int t) const;    // 1-based t
  std::vector<std::string> unknown_at(int t) const;  // 1-based t
};

/// Mean over unknowns of the max cosine similarity to any known class
/// embedding, for 1 <= t <= T-1. Empty unknown set -> nullopt.
std::optional<double> semantic_overlap(const SplitDefinition& split,
                                       const WordEmbeddingTable& table, int t);

struct RegimeThresholds {
  double low_below = 0.45;   // mean overlap below this -> low
  double high_above = 0.75;  // at or above this -> high
};

struct RegimeReport {
  std::vector<double> overlap;  // S_1 .. S_{T-1}
  double mean = 0.0;
  std::string regime;  // "low" | "medium" | "high"
};

RegimeReport regime_report(const SplitDefinition& split,
                           const WordEmbeddingTable& table,
                           const RegimeThresholds& thr = {});

}  // namespace hypow
