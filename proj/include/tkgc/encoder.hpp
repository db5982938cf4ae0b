#pragma once

#include <map>
#include <set>

#include "tkgc/data.hpp"
#include "tkgc/embedding.hpp"
#include "tkgc/model.hpp"

namespace tkgc {

struct Query {
  std::int64_t subject = 0;
  std::int64_t relation = 0;
  std::int64_t gold = 0;  // object to predict
};

/// The queries of one (timestamp, phase) step plus the relation pools they
/// induce. Pools are built exclusively from this batch's own phase, which is
/// what keeps inverse-pair information from leaking across phases.
struct QueryBatch {
  std::int64_t timestamp = 0;
  Phase phase = Phase::Original;
  std::vector<Query> queries;
  std::vector<std::pair<std::int64_t, std::vector<std::int64_t>>> pools;  // entity -> sorted relations

  static QueryBatch build(const std::vector<Quadruplet>& facts, std::int64_t t_q, Phase phase) {
    QueryBatch b;
    b.timestamp = t_q;
    b.phase = phase;
    std::map<std::int64_t, std::set<std::int64_t>> pools;
    for (const auto& q : facts) {
      if (q.timestamp != t_q) continue;
      if (phase == Phase::Original && q.inverse) continue;
      if (phase == Phase::Inverse && !q.inverse) continue;
      b.queries.push_back({q.subject, q.relation, q.object});
      pools[q.subject].insert(q.relation);
    }
    for (const auto& [e, rs] : pools) b.pools.emplace_back(e, std::vector<std::int64_t>(rs.begin(), rs.end()));
    return b;
  }

  std::vector<std::int64_t> pooled_relation_ids() const {
    std::set<std::int64_t> ids;
    for (const auto& [e, rs] : pools) ids.insert(rs.begin(), rs.end());
    return {ids.begin(), ids.end()};
  }
};

/// Instrumentation knobs for the equivalence checks: forcing beta_0 = 1 must
/// reproduce the skip ablation, zeroed pools must reproduce the
/// relation_aware ablation.
struct EncoderOptions {
  bool force_beta0 = false;
  bool zero_pools = false;
};

template <typename T>
struct EncoderTrace {
  std::vector<std::vector<Tensor<T>>> betas;     // [window step][position] -> |E| x d weights
  std::vector<std::int64_t> pooled_relations;  // relation ids actually pooled
};

inline constexpr double kRreluLower = 0.125;
inline constexpr double kRreluUpper = 1.0 / 3.0;

/// Mean query-relation embedding per entity (|E| x d); zero rows for
/// entities that are not query subjects in this batch.
template <typename T>
NodeId pool_query_relations(Tape<T>& tape, const ModelNodes& nodes,
                            const ModelParameters<T>& params, const QueryBatch& batch) {
  std::vector<std::int64_t> ents, rels;
  for (const auto& [e, rs] : batch.pools)
    for (std::int64_t r : rs) {
      ents.push_back(e);
      rels.push_back(r);
    }
  std::size_t E = static_cast<std::size_t>(params.num_entities);
  std::size_t d = static_cast<std::size_t>(params.config.dim);
  if (ents.empty()) return tape.constant(Tensor<T>::zeros({E, d}));
  return tape.scatter_mean_rows(tape.gather_rows(nodes.relation_table, rels), ents, E);
}

/// One graph layer: mean over composed neighbor messages, transformed and
/// added to the transformed self representation, then rrelu and dropout.
/// Messages are accumulated in sorted neighbor order so the result does not
/// depend on how the snapshot's edge list happens to be ordered.
template <typename T>
NodeId compgcn_layer(Tape<T>& tape, const Snapshot& snapshot, NodeId H_in,
                     const ModelNodes& nodes, const ModelParameters<T>& params,
                     std::size_t layer) {
  std::size_t E = static_cast<std::size_t>(params.num_entities);
  if (snapshot.neighbors.size() != E && !snapshot.empty())
    throw ShapeError("compgcn_layer: snapshot indexes " + std::to_string(snapshot.neighbors.size()) +
                     " entities, model has " + std::to_string(E));
  std::vector<std::int64_t> src, rel, dst;
  for (std::size_t e = 0; e < snapshot.neighbors.size(); ++e) {
    auto pairs = snapshot.neighbors[e];
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [n, r] : pairs) {
      src.push_back(n);
      rel.push_back(r);
      dst.push_back(static_cast<std::int64_t>(e));
    }
  }
  NodeId pre;
  NodeId self_term = tape.matmul(H_in, nodes.gcn_self[layer]);
  if (src.empty()) {
    pre = self_term;
  } else {
    NodeId h_src = tape.gather_rows(H_in, src);
    NodeId h_rel = tape.gather_rows(nodes.relation_table, rel);
    NodeId msgs = params.config.composition == "mult" ? tape.elementwise_mul(h_src, h_rel)
                                                      : tape.add(h_src, h_rel);
    NodeId agg = tape.scatter_mean_rows(msgs, dst, E);
    pre = tape.add(tape.matmul(agg, nodes.gcn_agg[layer]), self_term);
  }
  NodeId out = tape.rrelu(pre, kRreluLower, kRreluUpper);
  return tape.dropout(out, params.config.dropout);
}

/// Additive attention over the current layer output (position 0, zero score)
/// and the previous window inputs (positions 1..m, scored by W_a against the
/// input plus the pooled query relation). Softmax runs per coordinate across
/// positions; the output is the weighted sum.
template <typename T>
NodeId skip_attention(Tape<T>& tape, NodeId current, const std::vector<NodeId>& prev_newest_first,
                      NodeId pooled, const ModelNodes& nodes, const ModelParameters<T>& params,
                      const EncoderOptions& opts = {}, EncoderTrace<T>* trace = nullptr) {
  const Shape s = tape.value(current).shape;  // |E| x d
  const std::size_t m = prev_newest_first.size();

  std::vector<NodeId> inputs;
  inputs.push_back(current);
  for (NodeId p : prev_newest_first) inputs.push_back(p);

  std::vector<NodeId> weights;
  if (opts.force_beta0 || m == 0) {
    weights.push_back(tape.constant(Tensor<T>::full(s, T(1))));
    for (std::size_t j = 1; j <= m; ++j) weights.push_back(tape.constant(Tensor<T>::zeros(s)));
  } else {
    const bool relation_aware = !params.config.ablated("relation_aware");
    std::vector<NodeId> scores;
    scores.push_back(tape.constant(Tensor<T>::zeros(s)));  // position 0: zero score
    for (std::size_t j = 1; j <= m; ++j) {
      NodeId x = prev_newest_first[j - 1];
      if (relation_aware) x = tape.add(x, pooled);
      if (params.config.attention_score == "scalar") {
        // one score per entity, broadcast across coordinates
        NodeId col = tape.matmul(x, tape.reshape(nodes.attention, {s[1], 1}));  // |E| x 1
        scores.push_back(tape.matmul(col, tape.constant(Tensor<T>::full({1, s[1]}, T(1)))));
      } else {
        scores.push_back(tape.matmul(x, nodes.attention));
      }
    }
    weights = tape.softmax_over_positions(scores);
  }

  if (trace) {
    std::vector<Tensor<T>> snapshot_betas;
    for (NodeId w : weights) snapshot_betas.push_back(tape.value(w));
    trace->betas.push_back(std::move(snapshot_betas));
  }

  NodeId out = tape.elementwise_mul(weights[0], inputs[0]);
  for (std::size_t j = 1; j <= m; ++j)
    out = tape.add(out, tape.elementwise_mul(weights[j], inputs[j]));
  return out;
}

/// Runs the window t_q-k .. t_q-1: per snapshot L graph layers, then the skip
/// attention; each step's result is the next step's input, and the final
/// result is the entity representation at t_q. Windows are truncated at the
/// start of history (t_q < k); t_q = 0 has no history at all and is an error.
template <typename T>
NodeId encode_sequence(Tape<T>& tape, const ModelNodes& nodes, const ModelParameters<T>& params,
                       const std::vector<Snapshot>& snapshots, const QueryBatch& batch,
                       const EncoderOptions& opts = {}, EncoderTrace<T>* trace = nullptr) {
  const std::int64_t t_q = batch.timestamp;
  if (t_q < 1)
    throw Error("encode_sequence: timestamp " + std::to_string(t_q) + " has no history");
  if (t_q > static_cast<std::int64_t>(snapshots.size()))
    throw Error("encode_sequence: timestamp " + std::to_string(t_q) + " exceeds the " +
                std::to_string(snapshots.size()) + " known snapshots");
  const std::int64_t k = std::min<std::int64_t>(params.config.history_length, t_q);
  const std::int64_t t_start = t_q - k;
  const bool use_skip = !params.config.ablated("skip");

  NodeId pooled;
  if (use_skip && !params.config.ablated("relation_aware")) {
    if (opts.zero_pools) {
      std::size_t E = static_cast<std::size_t>(params.num_entities);
      std::size_t d = static_cast<std::size_t>(params.config.dim);
      pooled = tape.constant(Tensor<T>::zeros({E, d}));
    } else {
      pooled = pool_query_relations(tape, nodes, params, batch);
      if (trace) trace->pooled_relations = batch.pooled_relation_ids();
    }
  }

  NodeId x = entity_input_all(tape, nodes, params, t_start);
  std::vector<NodeId> prev;  // newest first
  for (std::int64_t i = 0; i < k; ++i) {
    NodeId h = x;
    for (std::int64_t l = 0; l < params.config.layers; ++l)
      h = compgcn_layer(tape, snapshots[t_start + i], h, nodes, params,
                        static_cast<std::size_t>(l));
    NodeId next = use_skip ? skip_attention(tape, h, prev, pooled, nodes, params, opts, trace) : h;
    prev.insert(prev.begin(), x);
    x = next;
  }
  return x;
}

}  // namespace tkgc
