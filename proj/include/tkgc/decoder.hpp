#pragma once

#include "tkgc/model.hpp"
#include "tkgc/tape.hpp"

namespace tkgc {

/// Scores every candidate entity for one (subject, relation) query.
/// convtranse: stack [h_e; h_r] as a 2 x d signal, convolve with same-length
/// padding, flatten, project back to d (dropout here in training), then dot
/// the hidden vector against every candidate row. distmult: plain trilinear
/// product. Scores are raw (pre-softmax); ranking is monotone in them.
template <typename T>
NodeId score_all(Tape<T>& tape, NodeId h_e, NodeId h_r, NodeId candidates,
                 const ModelNodes& nodes, const ModelParameters<T>& params) {
  const auto& ev = tape.value(h_e);
  const auto& rv = tape.value(h_r);
  const auto& cv = tape.value(candidates);
  std::size_t d = static_cast<std::size_t>(params.config.dim);
  if (ev.shape != Shape{d} || rv.shape != Shape{d} || cv.rank() != 2 || cv.cols() != d)
    throw ShapeError("score_all: entity " + shape_str(ev.shape) + ", relation " +
                     shape_str(rv.shape) + ", candidates " + shape_str(cv.shape) +
                     " do not agree on dim " + std::to_string(d));

  if (params.config.decoder == "distmult")
    return tape.matmul(candidates, tape.elementwise_mul(h_e, h_r));

  NodeId stacked = tape.stack_rows({h_e, h_r});  // 2 x d
  std::size_t pad = static_cast<std::size_t>(params.config.kernel_size - 1) / 2;
  NodeId conv = tape.conv1d(stacked, nodes.conv_kernels, pad);  // ch x d
  if (params.config.bias) conv = tape.add_colvec(conv, nodes.conv_bias);
  NodeId hidden = tape.matmul(tape.flatten(conv), nodes.fc);  // d
  if (params.config.bias) hidden = tape.add(hidden, nodes.fc_bias);
  hidden = tape.dropout(hidden, params.config.dropout);
  return tape.matmul(candidates, hidden);  // |E| scores
}

/// Softmax cross-entropy of the score vector against the gold entity.
template <typename T>
NodeId classification_loss(Tape<T>& tape, NodeId scores, std::int64_t gold) {
  const auto& sv = tape.value(scores);
  if (gold < 0 || static_cast<std::size_t>(gold) >= sv.numel())
    throw Error("classification_loss: gold entity " + std::to_string(gold) + " outside " +
                std::to_string(sv.numel()) + " candidates");
  return tape.cross_entropy(scores, static_cast<std::size_t>(gold));
}

}  // namespace tkgc
