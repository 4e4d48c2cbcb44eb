#include "hypow/splitsim.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hypow {

WordEmbeddingTable WordEmbeddingTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  WordEmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    Vec v;
    double x;
    while (ss >> x) v.push_back(x);
    if (token.empty() || v.empty() || !ss.eof())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed embedding line");
    if (table.dim_ >= 0 && static_cast<int>(v.size()) != table.dim_)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": dimension mismatch");
    if (table.contains(token))
      std::cerr << "warning: duplicate token '" << token
                << "' at line " << lineno << ", last occurrence wins\n";
    table.insert(token, std::move(v));
  }
  return table;
}

void WordEmbeddingTable::insert(const std::string& token, Vec v) {
  if (dim_ < 0) dim_ = static_cast<int>(v.size());
  if (static_cast<int>(v.size()) != dim_)
    throw std::invalid_argument("embedding dimension mismatch");
  vectors_[token] = std::move(v);
}

Vec WordEmbeddingTable::resolve(const std::string& class_name) const {
  std::istringstream ss(class_name);
  std::string token;
  Vec acc;
  int count = 0;
  while (ss >> token) {
    auto it = vectors_.find(token);
    if (it == vectors_.end())
      throw std::runtime_error("embedding lookup failed for token '" + token +
                               "' (class '" + class_name + "')");
    if (acc.empty()) acc.assign(it->second.size(), 0.0);
    axpy(1.0, it->second, acc);
    ++count;
  }
  if (count == 0) throw std::runtime_error("empty class name");
  for (double& v : acc) v /= count;
  return acc;
}

std::vector<std::string> SplitDefinition::known_at(int t) const {
  if (t < 1 || t > num_tasks())
    throw std::invalid_argument("task index out of range");
  std::vector<std::string> out;
  for (int i = 0; i < t; ++i)
    out.insert(out.end(), tasks[static_cast<std::size_t>(i)].begin(),
               tasks[static_cast<std::size_t>(i)].end());
  return out;
}

std::vector<std::string> SplitDefinition::unknown_at(int t) const {
  if (t < 1 || t > num_tasks())
    throw std::invalid_argument("task index out of range");
  std::vector<std::string> out;
  for (int i = t; i < num_tasks(); ++i)
    out.insert(out.end(), tasks[static_cast<std::size_t>(i)].begin(),
               tasks[static_cast<std::size_t>(i)].end());
  return out;
}

std::optional<double> semantic_overlap(const SplitDefinition& split,
                                       const WordEmbeddingTable& table,
                                       int t) {
  if (t < 1 || t > split.num_tasks() - 1)
    throw std::invalid_argument("semantic_overlap: t must satisfy 1 <= t <= T-1");
  const auto unknown = split.unknown_at(t);
  if (unknown.empty()) return std::nullopt;
  const auto known = split.known_at(t);

  std::vector<Vec> known_vecs;
  known_vecs.reserve(known.size());
  for (const std::string& name : known) known_vecs.push_back(table.resolve(name));
  std::vector<Vec> unknown_vecs;
  unknown_vecs.reserve(unknown.size());
  for (const std::string& name : unknown)
    unknown_vecs.push_back(table.resolve(name));

  const int nu = static_cast<int>(unknown_vecs.size());
  std::vector<double> best(static_cast<std::size_t>(nu), 0.0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < nu; ++k) {
    const Vec& wk = unknown_vecs[static_cast<std::size_t>(k)];
    const double nk = norm(wk);
    double m = -1.0;
    for (const Vec& wc : known_vecs) {
      const double cosv = dot(wc, wk) / (norm(wc) * nk);
      m = std::max(m, cosv);
    }
    best[static_cast<std::size_t>(k)] = m;
  }
  double s = 0.0;
  for (double v : best) s += v;
  return s / nu;
}

RegimeReport regime_report(const SplitDefinition& split,
                           const WordEmbeddingTable& table,
                           const RegimeThresholds& thr) {
  RegimeReport r;
  for (int t = 1; t <= split.num_tasks() - 1; ++t) {
    const auto s = semantic_overlap(split, table, t);
    if (s) r.overlap.push_back(*s);
  }
  if (r.overlap.empty())
    throw std::invalid_argument("regime_report: no task has unknowns");
  double sum = 0.0;
  for (double v : r.overlap) sum += v;
  r.mean = sum / static_cast<double>(r.overlap.size());
  r.regime = r.mean < thr.low_below
                 ? "low"
                 : (r.mean >= thr.high_above ? "high" : "medium");
  return r;
}

}  // namespace hypow
