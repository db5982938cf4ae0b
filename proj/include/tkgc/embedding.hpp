#pragma once

#include "tkgc/model.hpp"
#include "tkgc/tape.hpp"

namespace tkgc {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Temporal input rows for all entities at absolute snapshot index t:
/// W_tmp applied to [static | trend*t + sin(2pi * seasonal * t)].
/// Under the dynamic ablation the dynamic half is a zero block.
template <typename T>
NodeId entity_input_all(Tape<T>& tape, const ModelNodes& nodes, const ModelParameters<T>& params,
                        std::int64_t t) {
  if (t < 0) throw Error("entity_input: negative timestamp " + std::to_string(t));
  std::size_t E = static_cast<std::size_t>(params.num_entities);
  std::size_t d = static_cast<std::size_t>(params.config.dim);
  NodeId dynamic;
  if (params.config.ablated("dynamic")) {
    dynamic = tape.constant(Tensor<T>::zeros({E, d}));
  } else {
    NodeId trend = tape.scale(nodes.entity_trend, static_cast<T>(t));
    NodeId seasonal = tape.sine(tape.scale(nodes.entity_seasonal, static_cast<T>(kTwoPi * t)));
    dynamic = tape.add(trend, seasonal);
  }
  NodeId cat = tape.concat_last_axis(nodes.entity_static, dynamic);  // |E| x 2d
  return tape.matmul(cat, nodes.w_tmp);                              // |E| x d
}

/// Single-entity temporal input, a row of entity_input_all.
template <typename T>
NodeId entity_input(Tape<T>& tape, const ModelNodes& nodes, const ModelParameters<T>& params,
                    std::int64_t entity, std::int64_t t) {
  if (entity < 0 || entity >= params.num_entities)
    throw Error("entity_input: entity " + std::to_string(entity) + " out of range [0, " +
                std::to_string(params.num_entities) + ")");
  return tape.row(entity_input_all(tape, nodes, params, t), static_cast<std::size_t>(entity));
}

/// Static relation embedding lookup; valid for base and inverse ids.
template <typename T>
NodeId relation_embedding(Tape<T>& tape, const ModelNodes& nodes,
                          const ModelParameters<T>& params, std::int64_t relation) {
  if (relation < 0 || relation >= 2 * params.num_base_relations)
    throw Error("relation_embedding: relation " + std::to_string(relation) +
                " out of range [0, " + std::to_string(2 * params.num_base_relations) + ")");
  return tape.row(nodes.relation_table, static_cast<std::size_t>(relation));
}

}  // namespace tkgc
