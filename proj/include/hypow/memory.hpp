#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>

#include "hypow/scene.hpp"
#include "hypow/util.hpp"

namespace hypow {

/// Per-class ring store of embedding snapshots, capacity m per class,
/// oldest-first eviction. Stored entries are value copies; later training
/// steps never mutate them.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity_per_class = 10)
      : capacity_(capacity_per_class) {
    if (capacity_per_class < 0)
      throw std::invalid_argument("buffer capacity must be >= 0");
  }

  void push(int class_id, Vec point) {
    if (capacity_ == 0) return;
    auto& ring = store_[class_id];
    ring.push_back(std::move(point));
    if (static_cast<int>(ring.size()) > capacity_) ring.pop_front();
  }

  int capacity() const { return capacity_; }

  const std::deque<Vec>& entries(int class_id) const {
    static const std::deque<Vec> kEmpty;
    auto it = store_.find(class_id);
    return it == store_.end() ? kEmpty : it->second;
  }

  /// Classes with at least one stored entry, ascending.
  std::vector<int> classes() const {
    std::vector<int> out;
    out.reserve(store_.size());
    for (const auto& [cls, ring] : store_)
      if (!ring.empty()) out.push_back(cls);
    return out;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [cls, ring] : store_) n += ring.size();
    return n;
  }

  /// k uniform draws from the class ring, without replacement when k does
  /// not exceed the stored count (with replacement otherwise). Returns
  /// nothing for an empty class.
  std::optional<std::vector<Vec>> sample_positive(int class_id, int k,
                                                  Rng& rng) const;

  void clear() { store_.clear(); }

 private:
  int capacity_;
  std::map<int, std::deque<Vec>> store_;  // ordered: deterministic iteration
};

/// Total map class_id -> category id in [0, P). Categories are nonempty.
class CategoryMap {
 public:
  CategoryMap() = default;
  explicit CategoryMap(std::map<int, int> class_to_category);

  int category_of(int class_id) const {
    auto it = map_.find(class_id);
    if (it == map_.end())
      throw std::invalid_argument("CategoryMap: unknown class " +
                                  std::to_string(class_id));
    return it->second;
  }

  int num_categories() const { return num_categories_; }

  /// Member classes of one category, ascending.
  std::vector<int> classes_in(int category) const {
    std::vector<int> out;
    for (const auto& [cls, cat] : map_)
      if (cat == category) out.push_back(cls);
    return out;
  }

  const std::map<int, int>& mapping() const { return map_; }

 private:
  std::map<int, int> map_;
  int num_categories_ = 0;
};

/// End-of-task image exemplars, at most `capacity` scenes per class;
/// replayed during fine-tuning phases. Distinct from the embedding buffer M.
struct ExemplarStore {
  int capacity = 0;
  std::map<int, std::vector<SceneRecord>> per_class;

  std::size_t total_scenes() const {
    std::size_t n = 0;
    for (const auto& [cls, scenes] : per_class) n += scenes.size();
    return n;
  }
};

/// Uniformly samples at most k scenes per class (among scenes containing an
/// annotated object of that class) into `store`.
void snapshot_exemplars(ExemplarStore& store,
                        std::span<const SceneRecord> scenes,
                        const std::set<int>& classes, int k, Rng& rng);

}  // namespace hypow
