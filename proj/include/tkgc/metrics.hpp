#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tkgc/data.hpp"
#include "tkgc/error.hpp"

namespace tkgc {

struct EvaluationReport {
  std::string split;
  std::vector<std::int64_t> ranks;  // per-query filtered ranks, query order
  double mrr = 0.0;
  double hits1 = 0.0, hits3 = 0.0, hits10 = 0.0;
  std::int64_t num_queries = 0;
};

/// All true objects per (subject, relation, timestamp) over the augmented
/// fact set of every split; ranking filters against these.
class FilterMap {
 public:
  static FilterMap build(const TkgDataset& ds) {
    if (!ds.augmented) throw DataError("FilterMap: dataset must be inverse-augmented first");
    FilterMap fm;
    std::map<Key, std::set<std::int64_t>> acc;
    for (const auto& q : ds.all_facts()) acc[{q.subject, q.relation, q.timestamp}].insert(q.object);
    for (auto& [k, objs] : acc) fm.map_.emplace(k, std::vector<std::int64_t>(objs.begin(), objs.end()));
    return fm;
  }

  /// Sorted true objects for the key; empty list when the key is unknown.
  const std::vector<std::int64_t>& objects(std::int64_t s, std::int64_t r, std::int64_t t) const {
    auto it = map_.find({s, r, t});
    return it == map_.end() ? empty_ : it->second;
  }

 private:
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::map<Key, std::vector<std::int64_t>> map_;
  std::vector<std::int64_t> empty_;
};

/// Filtered rank of the gold candidate: competitors that are themselves true
/// answers (the filter set minus gold) are removed, and the rank counts only
/// strictly higher scores, so the gold candidate wins ties.
template <typename T>
std::int64_t rank_query(const std::vector<T>& scores, std::int64_t gold,
                        const std::vector<std::int64_t>& filter) {
  if (gold < 0 || static_cast<std::size_t>(gold) >= scores.size())
    throw Error("rank_query: gold " + std::to_string(gold) + " outside " +
                std::to_string(scores.size()) + " candidates");
  if (!std::binary_search(filter.begin(), filter.end(), gold))
    throw Error("rank_query: gold " + std::to_string(gold) + " missing from its filter set");
  const T gold_score = scores[static_cast<std::size_t>(gold)];
  std::int64_t rank = 1;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (static_cast<std::int64_t>(c) == gold) continue;
    if (std::binary_search(filter.begin(), filter.end(), static_cast<std::int64_t>(c))) continue;
    if (scores[c] > gold_score) ++rank;
  }
  return rank;
}

inline EvaluationReport aggregate_metrics(std::vector<std::int64_t> ranks) {
  if (ranks.empty()) throw Error("aggregate_metrics: no ranks to aggregate");
  EvaluationReport r;
  double inv = 0.0;
  std::int64_t h1 = 0, h3 = 0, h10 = 0;
  for (std::int64_t rank : ranks) {
    if (rank < 1) throw Error("aggregate_metrics: rank " + std::to_string(rank) + " below 1");
    inv += 1.0 / static_cast<double>(rank);
    h1 += rank <= 1;
    h3 += rank <= 3;
    h10 += rank <= 10;
  }
  double n = static_cast<double>(ranks.size());
  r.mrr = inv / n;
  r.hits1 = h1 / n;
  r.hits3 = h3 / n;
  r.hits10 = h10 / n;
  r.num_queries = static_cast<std::int64_t>(ranks.size());
  r.ranks = std::move(ranks);
  return r;
}

/// Numerically stable softmax of a raw score vector.
template <typename T>
std::vector<T> softmax_scores(const std::vector<T>& scores) {
  if (scores.empty()) throw Error("softmax_scores: empty score vector");
  T mx = *std::max_element(scores.begin(), scores.end());
  std::vector<T> out(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = static_cast<T>(std::exp(static_cast<double>(scores[i] - mx)));
    z += static_cast<double>(out[i]);
  }
  for (auto& v : out) v = static_cast<T>(static_cast<double>(v) / z);
  return out;
}

/// Elementwise pooling of per-model score vectors. Callers normalize each
/// vector (softmax) first unless deliberately pooling raw scores.
template <typename T>
std::vector<T> ensemble_scores(const std::vector<std::vector<T>>& per_model,
                               const std::string& pooling) {
  if (per_model.empty()) throw Error("ensemble_scores: no score vectors");
  const std::size_t n = per_model.front().size();
  for (const auto& v : per_model)
    if (v.size() != n)
      throw ShapeError("ensemble_scores: vectors of length " + std::to_string(n) + " and " +
                       std::to_string(v.size()) + " cannot be pooled");
  if (pooling != "avg" && pooling != "max" && pooling != "min")
    throw ConfigError("ensemble_scores: pooling '" + pooling + "' is not one of avg|max|min");
  std::vector<T> out(per_model.front());
  for (std::size_t k = 1; k < per_model.size(); ++k)
    for (std::size_t i = 0; i < n; ++i) {
      if (pooling == "max")
        out[i] = std::max(out[i], per_model[k][i]);
      else if (pooling == "min")
        out[i] = std::min(out[i], per_model[k][i]);
      else
        out[i] += per_model[k][i];
    }
  if (pooling == "avg")
    for (auto& v : out) v = static_cast<T>(static_cast<double>(v) / static_cast<double>(per_model.size()));
  return out;
}

}  // namespace tkgc
