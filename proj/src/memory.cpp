#include "hypow/memory.hpp"

#include <algorithm>

namespace hypow {

std::optional<std::vector<Vec>> ReplayBuffer::sample_positive(int class_id,
                                                              int k,
                                                              Rng& rng) const {
  const auto& ring = entries(class_id);
  if (ring.empty()) return std::nullopt;
  if (k <= 0) return std::vector<Vec>{};
  const int n = static_cast<int>(ring.size());
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(k));
  if (k <= n) {
    // partial Fisher-Yates over the index range
    std::vector<int> idx(ring.size());
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(idx[static_cast<std::size_t>(i)],
                idx[static_cast<std::size_t>(pick(rng))]);
      out.push_back(ring[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    }
  } else {
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int i = 0; i < k; ++i)
      out.push_back(ring[static_cast<std::size_t>(pick(rng))]);
  }
  return out;
}

CategoryMap::CategoryMap(std::map<int, int> class_to_category)
    : map_(std::move(class_to_category)) {
  std::set<int> cats;
  for (const auto& [cls, cat] : map_) {
    if (cat < 0) throw std::invalid_argument("CategoryMap: negative category");
    cats.insert(cat);
  }
  num_categories_ = static_cast<int>(cats.size());
  // contiguous category ids keep report tables dense
  for (int expected = 0; const int cat : cats) {
    if (cat != expected++)
      throw std::invalid_argument("CategoryMap: category ids must be 0..P-1");
  }
}

void snapshot_exemplars(ExemplarStore& store,
                        std::span<const SceneRecord> scenes,
                        const std::set<int>& classes, int k, Rng& rng) {
  store.capacity = k;
  if (k <= 0) return;
  for (int cls : classes) {
    std::vector<const SceneRecord*> holding;
    for (const SceneRecord& s : scenes) {
      const bool has = std::any_of(
          s.objects.begin(), s.objects.end(), [cls](const SceneObject& o) {
            return o.annotated && o.class_id == cls;
          });
      if (has) holding.push_back(&s);
    }
    auto& dst = store.per_class[cls];
    dst.clear();
    if (static_cast<int>(holding.size()) <= k) {
      for (const SceneRecord* s : holding) dst.push_back(*s);
      continue;
    }
    std::vector<int> idx(holding.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(idx.size()) - 1);
      std::swap(idx[static_cast<std::size_t>(i)],
                idx[static_cast<std::size_t>(pick(rng))]);
      dst.push_back(*holding[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    }
  }
}

}  // namespace hypow
