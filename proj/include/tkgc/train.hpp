#pragma once

#include <chrono>
#include <functional>
#include <limits>
#include <set>

#include "tkgc/adam.hpp"
#include "tkgc/checkpoint.hpp"
#include "tkgc/decoder.hpp"
#include "tkgc/encoder.hpp"
#include "tkgc/metrics.hpp"

namespace tkgc {

struct EpochLog {
  std::int64_t epoch = 0;
  double loss = 0.0;
  double val_mrr = 0.0;
  std::int64_t wall_ms = 0;
};
using EpochCallback = std::function<void(const EpochLog&)>;

/// Plateau detector: training stops after `patience` consecutive epochs
/// without strict improvement of the tracked metric.
struct EarlyStopper {
  std::int64_t patience = 5;
  double best = -std::numeric_limits<double>::infinity();
  std::int64_t best_epoch = 0;

  bool observe(std::int64_t epoch, double value) {
    if (value > best) {
      best = value;
      best_epoch = epoch;
      return true;
    }
    return false;
  }
  bool exhausted(std::int64_t epoch) const { return epoch - best_epoch >= patience; }
};

namespace detail {

inline std::vector<std::int64_t> distinct_timestamps(const std::vector<Quadruplet>& facts) {
  std::set<std::int64_t> ts;
  for (const auto& q : facts) ts.insert(q.timestamp);
  return {ts.begin(), ts.end()};
}

inline std::vector<Phase> forward_phases(const TrainConfig& cfg) {
  if (cfg.two_phase) return {Phase::Original, Phase::Inverse};
  return {Phase::Combined};
}

}  // namespace detail

/// Runs the full forward pass over a split and hands every query's raw score
/// vector to `visit(query, timestamp, scores)`. Query order is fixed by the
/// split order and the phase schedule, so different models visit the same
/// queries in the same sequence.
template <typename T, typename Visit>
void for_each_query_scores(const ModelParameters<T>& params, const TkgDataset& ds,
                           const std::vector<Quadruplet>& split, Visit&& visit) {
  for (std::int64_t t_q : detail::distinct_timestamps(split)) {
    for (Phase phase : detail::forward_phases(params.config)) {
      QueryBatch batch = QueryBatch::build(split, t_q, phase);
      if (batch.queries.empty()) continue;
      Tape<T> tape;  // evaluation mode: no dropout, fixed activation slope
      ModelNodes nodes = stage_parameters(tape, params);
      NodeId H = encode_sequence(tape, nodes, params, ds.snapshots, batch);
      for (const Query& q : batch.queries) {
        NodeId h_e = tape.row(H, static_cast<std::size_t>(q.subject));
        NodeId h_r = relation_embedding(tape, nodes, params, q.relation);
        NodeId scores = score_all(tape, h_e, h_r, H, nodes, params);
        visit(q, t_q, tape.value(scores).data);
      }
    }
  }
}

/// Owns the parameters, optimizer and RNG of one training run over a fixed
/// dataset. The dataset must outlive the trainer, be inverse-augmented and
/// have its snapshots built.
template <typename T>
class Trainer {
 public:
  Trainer(const TkgDataset& ds, const TrainConfig& cfg)
      : ds_(ds),
        rng_(cfg.seed),
        params_(ModelParameters<T>::init(cfg, ds.num_entities, ds.num_base_relations,
                                         ds.snapshot_count, rng_)),
        opt_({.lr = cfg.lr}),
        filter_(FilterMap::build(ds)) {
    if (ds.snapshots.empty()) throw DataError("Trainer: dataset snapshots not built");
  }

  const TrainConfig& config() const { return params_.config; }
  ModelParameters<T>& params() { return params_; }
  const ModelParameters<T>& params() const { return params_; }
  AdamOptimizer<T>& optimizer() { return opt_; }

  /// One pass over the training timestamps in chronological order, one
  /// optimizer step per (timestamp, phase). Returns the mean query loss.
  double train_epoch() {
    std::vector<std::int64_t> stamps = detail::distinct_timestamps(ds_.train);
    if (stamps.size() < 2)
      throw DataError("train_epoch: " + std::to_string(stamps.size()) +
                      " training timestamp(s); the earliest timestamp has no history, so at "
                      "least two are needed");
    double total_loss = 0.0;
    std::int64_t total_queries = 0;
    for (std::int64_t t_q : stamps) {
      if (t_q == 0) continue;  // nothing precedes the first snapshot
      for (Phase phase : detail::forward_phases(params_.config)) {
        QueryBatch batch = QueryBatch::build(ds_.train, t_q, phase);
        if (batch.queries.empty()) continue;
        Tape<T> tape({.training = true, .rng = &rng_});
        ModelNodes nodes = stage_parameters(tape, params_);
        NodeId H = encode_sequence(tape, nodes, params_, ds_.snapshots, batch);
        NodeId loss;
        for (const Query& q : batch.queries) {
          NodeId h_e = tape.row(H, static_cast<std::size_t>(q.subject));
          NodeId h_r = relation_embedding(tape, nodes, params_, q.relation);
          NodeId scores = score_all(tape, h_e, h_r, H, nodes, params_);
          NodeId lq = classification_loss(tape, scores, q.gold);
          loss = loss.valid() ? tape.add(loss, lq) : lq;
        }
        loss = tape.scale(loss, static_cast<T>(1.0 / static_cast<double>(batch.queries.size())));
        tape.backward(loss);

        auto trainable = params_.trainable();
        std::vector<const Tensor<T>*> grads;
        grads.reserve(trainable.size());
        for (const auto& [name, tensor] : trainable) grads.push_back(&tape.grad(node_for(nodes, name)));
        opt_.step(trainable, grads);

        total_loss += static_cast<double>(tape.value(loss).data[0]) *
                      static_cast<double>(batch.queries.size());
        total_queries += static_cast<std::int64_t>(batch.queries.size());
      }
    }
    if (total_queries == 0)
      throw DataError("train_epoch: no queries with history (all training facts at timestamp 0)");
    return total_loss / static_cast<double>(total_queries);
  }

  /// Filtered-ranking evaluation of a split against ground-truth history.
  EvaluationReport evaluate(const std::vector<Quadruplet>& split, const std::string& name) const {
    return evaluate_split(params_, ds_, filter_, split, name);
  }

  /// Trains until max epochs or until validation MRR has not improved for
  /// `patience` consecutive epochs; returns the best epoch's checkpoint.
  Checkpoint<T> fit(const EpochCallback& on_epoch = {}) {
    if (ds_.valid.empty()) throw DataError("fit: validation split is empty");
    Checkpoint<T> best;
    EarlyStopper stop{params_.config.patience};
    std::vector<double> history;
    for (std::int64_t epoch = 1; epoch <= params_.config.epochs; ++epoch) {
      auto t0 = std::chrono::steady_clock::now();
      double loss = train_epoch();
      EvaluationReport rep = evaluate(ds_.valid, "valid");
      auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
      history.push_back(rep.mrr);
      if (on_epoch) on_epoch({epoch, loss, rep.mrr, wall});
      if (stop.observe(epoch, rep.mrr)) {
        best.params = params_;
        best.adam_state = opt_.state();
        best.adam_step = opt_.step_count();
        best.epoch = epoch;
      }
      if (stop.exhausted(epoch)) break;
    }
    best.val_mrr_history = std::move(history);
    return best;
  }

  /// Shared by Trainer::evaluate and checkpoint-based evaluation.
  static EvaluationReport evaluate_split(const ModelParameters<T>& params, const TkgDataset& ds,
                                         const FilterMap& filter,
                                         const std::vector<Quadruplet>& split,
                                         const std::string& name) {
    if (split.empty()) throw DataError("evaluate: split '" + name + "' is empty");
    std::vector<std::int64_t> ranks;
    ranks.reserve(split.size());
    for_each_query_scores(params, ds, split, [&](const Query& q, std::int64_t t,
                                                 const std::vector<T>& scores) {
      ranks.push_back(rank_query(scores, q.gold, filter.objects(q.subject, q.relation, t)));
    });
    EvaluationReport rep = aggregate_metrics(std::move(ranks));
    rep.split = name;
    return rep;
  }

 private:
  static NodeId node_for(const ModelNodes& nodes, const std::string& name) {
    for (const auto& [n, id] : nodes.named)
      if (n == name) return id;
    throw Error("trainer: no staged node for parameter " + name);
  }

  const TkgDataset& ds_;
  std::mt19937_64 rng_;
  ModelParameters<T> params_;
  AdamOptimizer<T> opt_;
  FilterMap filter_;
};

/// Evaluates several models as an ensemble: per query, each model's raw score
/// vector is softmax-normalized (unless `raw_scores`), the vectors are pooled
/// elementwise, and the pooled vector is ranked with the usual filtering. All
/// models must agree on the dataset dimensions and the phase schedule; the
/// per-model history lengths are free to differ.
template <typename T>
EvaluationReport evaluate_ensemble(const std::vector<const ModelParameters<T>*>& models,
                                   const TkgDataset& ds, const std::vector<Quadruplet>& split,
                                   const std::string& split_name, const std::string& pooling,
                                   bool raw_scores = false) {
  if (models.empty()) throw Error("ensemble: no models given");
  if (split.empty()) throw DataError("evaluate: split '" + split_name + "' is empty");
  for (const auto* m : models) {
    if (m->num_entities != ds.num_entities || m->num_base_relations != ds.num_base_relations)
      throw DataError("ensemble: model over " + std::to_string(m->num_entities) + " entities / " +
                      std::to_string(m->num_base_relations) + " relations does not fit a dataset with " +
                      std::to_string(ds.num_entities) + " / " + std::to_string(ds.num_base_relations));
    if (m->config.two_phase != models.front()->config.two_phase)
      throw ConfigError("ensemble: models disagree on the phase schedule");
  }

  struct Item {
    Query q;
    std::int64_t t;
  };
  std::vector<Item> items;
  std::vector<std::vector<std::vector<T>>> per_model(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    for_each_query_scores(*models[k], ds, split, [&](const Query& q, std::int64_t t,
                                                     std::vector<T> scores) {
      if (k == 0) items.push_back({q, t});
      per_model[k].push_back(raw_scores ? std::move(scores) : softmax_scores(scores));
    });
    if (per_model[k].size() != items.size())
      throw Error("ensemble: models visited different query counts");
  }

  FilterMap filter = FilterMap::build(ds);
  std::vector<std::int64_t> ranks;
  ranks.reserve(items.size());
  std::vector<std::vector<T>> stack(models.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t k = 0; k < models.size(); ++k) stack[k] = per_model[k][i];
    std::vector<T> pooled = ensemble_scores(stack, pooling);
    ranks.push_back(rank_query(pooled, items[i].q.gold,
                               filter.objects(items[i].q.subject, items[i].q.relation, items[i].t)));
  }
  EvaluationReport rep = aggregate_metrics(std::move(ranks));
  rep.split = split_name;
  return rep;
}

}  // namespace tkgc
