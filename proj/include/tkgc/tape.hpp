#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tkgc/tensor.hpp"

namespace tkgc {

/// Identity of a value inside one computation record.
struct NodeId {
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
};

struct TapeOptions {
  bool training = false;        // enables dropout masks and sampled rrelu slopes
  bool check_finite = true;     // reject NaN/Inf outputs as they appear
  std::mt19937_64* rng = nullptr;  // required in training mode when a stochastic op runs
};

/// Reverse-mode computation record. Ops append nodes in topological order;
/// backward() walks them once in reverse. Single-threaded per tape.
template <typename T>
class Tape {
 public:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    const char* op = "leaf";
    std::function<void(Tape&, NodeId)> backprop;  // empty for leaves/constants
  };

  explicit Tape(TapeOptions opts = {}) : opts_(opts) {}

  bool training() const { return opts_.training; }
  std::size_t size() const { return nodes_.size(); }

  const Tensor<T>& value(NodeId id) const { return node(id).value; }
  const Tensor<T>& grad(NodeId id) const { return node(id).grad; }

  NodeId leaf(Tensor<T> v) { return push("leaf", std::move(v), {}); }
  NodeId constant(Tensor<T> v) { return push("constant", std::move(v), {}); }

  // ---- elementwise and structural ops ----

  NodeId add(NodeId a, NodeId b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    require_same("add", av, bv);
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += bv.data[i];
    return push("add", std::move(out), [a, b](Tape& t, NodeId self) {
      auto& g = t.node(self).grad;
      t.accumulate(a, g.data);
      t.accumulate(b, g.data);
    });
  }

  NodeId elementwise_mul(NodeId a, NodeId b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    require_same("elementwise_mul", av, bv);
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= bv.data[i];
    return push("elementwise_mul", std::move(out), [a, b](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad.data;
      const auto& av = t.value(a).data;
      const auto& bv = t.value(b).data;
      auto& ga = t.node(a).grad.data;
      auto& gb = t.node(b).grad.data;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * bv[i];
        gb[i] += g[i] * av[i];
      }
    });
  }

  NodeId scale(NodeId a, T c) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v *= c;
    return push("scale", std::move(out), [a, c](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad.data;
      auto& ga = t.node(a).grad.data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
  }

  NodeId sine(NodeId a) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v = std::sin(v);
    return push("sine", std::move(out), [a](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad.data;
      const auto& x = t.value(a).data;
      auto& ga = t.node(a).grad.data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * std::cos(x[i]);
    });
  }

  /// Adds v (length n) to every row of a (m x n).
  NodeId add_rowvec(NodeId a, NodeId v) {
    const auto& av = value(a);
    const auto& vv = value(v);
    if (av.rank() != 2 || vv.rank() != 1 || vv.shape[0] != av.shape[1])
      throw ShapeError("add_rowvec: " + shape_str(av.shape) + " vs " + shape_str(vv.shape));
    Tensor<T> out = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) out.at2(i, j) += vv.data[j];
    return push("add_rowvec", std::move(out), [a, v](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad;
      t.accumulate(a, g.data);
      auto& gv = t.node(v).grad.data;
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gv[j] += g.at2(i, j);
    });
  }

  /// Adds v (length m) to every column of a (m x n).
  NodeId add_colvec(NodeId a, NodeId v) {
    const auto& av = value(a);
    const auto& vv = value(v);
    if (av.rank() != 2 || vv.rank() != 1 || vv.shape[0] != av.shape[0])
      throw ShapeError("add_colvec: " + shape_str(av.shape) + " vs " + shape_str(vv.shape));
    Tensor<T> out = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) out.at2(i, j) += vv.data[i];
    return push("add_colvec", std::move(out), [a, v](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad;
      t.accumulate(a, g.data);
      auto& gv = t.node(v).grad.data;
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gv[i] += g.at2(i, j);
    });
  }

  /// Scales row i of a (m x n) by v[i].
  NodeId mul_colvec(NodeId a, NodeId v) {
    const auto& av = value(a);
    const auto& vv = value(v);
    if (av.rank() != 2 || vv.rank() != 1 || vv.shape[0] != av.shape[0])
      throw ShapeError("mul_colvec: " + shape_str(av.shape) + " vs " + shape_str(vv.shape));
    Tensor<T> out = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) out.at2(i, j) *= vv.data[i];
    return push("mul_colvec", std::move(out), [a, v](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad;
      const auto& av = t.value(a);
      const auto& vv = t.value(v).data;
      auto& ga = t.node(a).grad;
      auto& gv = t.node(v).grad.data;
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) {
          ga.at2(i, j) += g.at2(i, j) * vv[i];
          gv[i] += g.at2(i, j) * av.at2(i, j);
        }
    });
  }

  NodeId concat_last_axis(NodeId a, NodeId b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    if (av.rank() != bv.rank() || av.rank() < 1 || av.rank() > 2)
      throw ShapeError("concat_last_axis: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    Tensor<T> out;
    if (av.rank() == 1) {
      out = Tensor<T>::zeros({av.shape[0] + bv.shape[0]});
      std::copy(av.data.begin(), av.data.end(), out.data.begin());
      std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.shape[0]);
    } else {
      if (av.rows() != bv.rows())
        throw ShapeError("concat_last_axis: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
      out = Tensor<T>::zeros({av.rows(), av.cols() + bv.cols()});
      for (std::size_t i = 0; i < av.rows(); ++i) {
        std::copy(&av.at2(i, 0), &av.at2(i, 0) + av.cols(), &out.at2(i, 0));
        std::copy(&bv.at2(i, 0), &bv.at2(i, 0) + bv.cols(), &out.at2(i, av.cols()));
      }
    }
    return push("concat_last_axis", std::move(out), [a, b](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad;
      auto& ga = t.node(a).grad;
      auto& gb = t.node(b).grad;
      if (ga.rank() == 1) {
        for (std::size_t i = 0; i < ga.numel(); ++i) ga.data[i] += g.data[i];
        for (std::size_t i = 0; i < gb.numel(); ++i) gb.data[i] += g.data[ga.numel() + i];
      } else {
        for (std::size_t i = 0; i < ga.rows(); ++i) {
          for (std::size_t j = 0; j < ga.cols(); ++j) ga.at2(i, j) += g.at2(i, j);
          for (std::size_t j = 0; j < gb.cols(); ++j) gb.at2(i, j) += g.at2(i, ga.cols() + j);
        }
      }
    });
  }

  NodeId reshape(NodeId a, Shape s) {
    const auto& av = value(a);
    if (shape_numel(s) != av.numel())
      throw ShapeError("reshape: " + shape_str(av.shape) + " to " + shape_str(s));
    Tensor<T> out(std::move(s), av.data);
    return push("reshape", std::move(out), [a](Tape& t, NodeId self) {
      t.accumulate(a, t.node(self).grad.data);
    });
  }

  NodeId flatten(NodeId a) { return reshape(a, {value(a).numel()}); }

  /// Row i of a rank-2 node as a rank-1 vector.
  NodeId row(NodeId a, std::size_t i) {
    const auto& av = value(a);
    if (av.rank() != 2 || i >= av.rows())
      throw ShapeError("row: index " + std::to_string(i) + " in " + shape_str(av.shape));
    return row_reshape(a, i, {av.cols()});
  }

  /// Row j of a rank-2 node, reshaped to an arbitrary shape of the same size.
  NodeId row_reshape(NodeId a, std::size_t j, Shape s) {
    const auto& av = value(a);
    if (av.rank() != 2 || j >= av.rows() || shape_numel(s) != av.cols())
      throw ShapeError("row_reshape: row " + std::to_string(j) + " of " + shape_str(av.shape) +
                       " as " + shape_str(s));
    std::size_t n = av.cols();
    Tensor<T> out(std::move(s), std::vector<T>(av.data.begin() + j * n, av.data.begin() + (j + 1) * n));
    return push("row_reshape", std::move(out), [a, j, n](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad.data;
      auto& ga = t.node(a).grad.data;
      for (std::size_t i = 0; i < n; ++i) ga[j * n + i] += g[i];
    });
  }

  /// Stacks P same-shape inputs as the rows of a P x numel matrix.
  NodeId stack_rows(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw ShapeError("stack_rows: empty input list");
    const auto& first = value(xs[0]);
    for (const auto& x : xs)
      require_same("stack_rows", first, value(x));
    std::size_t n = first.numel();
    Tensor<T> out = Tensor<T>::zeros({xs.size(), n});
    for (std::size_t r = 0; r < xs.size(); ++r)
      std::copy(value(xs[r]).data.begin(), value(xs[r]).data.end(), out.data.begin() + r * n);
    return push("stack_rows", std::move(out), [xs, n](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad.data;
      for (std::size_t r = 0; r < xs.size(); ++r) {
        auto& gx = t.node(xs[r]).grad.data;
        for (std::size_t i = 0; i < n; ++i) gx[i] += g[r * n + i];
      }
    });
  }

  // ---- reductions ----

  NodeId sum(NodeId a) {
    T acc = T(0);
    for (T v : value(a).data) acc += v;
    return push("sum", Tensor<T>::scalar(acc), [a](Tape& t, NodeId self) {
      T g = t.node(self).grad.data[0];
      auto& ga = t.node(a).grad.data;
      for (auto& v : ga) v += g;
    });
  }

  NodeId mean_rows(NodeId a) {
    const auto& av = value(a);
    if (av.rank() != 2) throw ShapeError("mean_rows: expects rank-2, got " + shape_str(av.shape));
    std::size_t m = av.rows(), n = av.cols();
    Tensor<T> out = Tensor<T>::zeros({n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out.data[j] += av.at2(i, j);
    for (auto& v : out.data) v /= T(m);
    return push("mean_rows", std::move(out), [a, m, n](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad.data;
      auto& ga = t.node(a).grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga.at2(i, j) += g[j] / T(m);
    });
  }

  // ---- linear algebra ----

  /// Matrix product. Rank-1 operands are promoted to 1 x k / k x 1 and the
  /// result squeezed back, so matvec, vecmat and dot products all work.
  NodeId matmul(NodeId a, NodeId b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    auto dims = matmul_dims(av, bv);
    auto [m, k, n] = dims;
    Shape out_shape;
    if (av.rank() == 2 && bv.rank() == 2) out_shape = {m, n};
    else if (av.rank() == 1 && bv.rank() == 2) out_shape = {n};
    else if (av.rank() == 2 && bv.rank() == 1) out_shape = {m};
    // both rank-1: scalar, empty shape
    Tensor<T> out = Tensor<T>::zeros(out_shape);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        T aval = av.data[i * k + p];
        if (aval == T(0)) continue;
        const T* brow = &bv.data[p * n];
        T* orow = &out.data[i * n];
        for (std::size_t j = 0; j < n; ++j) orow[j] += aval * brow[j];
      }
    return push("matmul", std::move(out), [a, b, dims](Tape& t, NodeId self) {
      auto [m, k, n] = dims;
      const auto& g = t.node(self).grad.data;
      const auto& av = t.value(a).data;
      const auto& bv = t.value(b).data;
      auto& ga = t.node(a).grad.data;
      auto& gb = t.node(b).grad.data;
      // dA = g . B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T acc = T(0);
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
      // dB = A^T . g
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) {
          T aval = av[i * k + p];
          if (aval == T(0)) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aval * g[i * n + j];
        }
    });
  }

  // ---- gather / scatter over explicit index lists ----

  NodeId gather_rows(NodeId table, std::vector<std::int64_t> idx) {
    const auto& tv = value(table);
    if (tv.rank() != 2) throw ShapeError("gather_rows: table must be rank-2, got " + shape_str(tv.shape));
    std::size_t d = tv.cols();
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= tv.rows())
        throw ShapeError("gather_rows: index " + std::to_string(idx[i]) + " at position " +
                         std::to_string(i) + " outside table " + shape_str(tv.shape));
    Tensor<T> out = Tensor<T>::zeros({idx.size(), d});
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy(&tv.at2(idx[i], 0), &tv.at2(idx[i], 0) + d, &out.at2(i, 0));
    return push("gather_rows", std::move(out), [table, idx = std::move(idx), d](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad;
      auto& gt = t.node(table).grad;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) gt.at2(idx[i], j) += g.at2(i, j);
    });
  }

  /// Averages the rows of `messages` that share the same destination row.
  /// Destinations with no incoming message stay zero. Accumulation follows
  /// the message order, so a canonical message order gives bit-stable sums.
  NodeId scatter_mean_rows(NodeId messages, std::vector<std::int64_t> dst, std::size_t num_rows) {
    const auto& mv = value(messages);
    if (mv.rank() != 2 || dst.size() != mv.rows())
      throw ShapeError("scatter_mean_rows: " + shape_str(mv.shape) + " with " +
                       std::to_string(dst.size()) + " destinations");
    std::size_t d = mv.cols();
    std::vector<std::size_t> count(num_rows, 0);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (dst[i] < 0 || static_cast<std::size_t>(dst[i]) >= num_rows)
        throw ShapeError("scatter_mean_rows: destination " + std::to_string(dst[i]) +
                         " outside " + std::to_string(num_rows) + " rows");
      count[dst[i]]++;
    }
    Tensor<T> out = Tensor<T>::zeros({num_rows, d});
    for (std::size_t i = 0; i < dst.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) out.at2(dst[i], j) += mv.at2(i, j);
    for (std::size_t r = 0; r < num_rows; ++r)
      if (count[r] > 0)
        for (std::size_t j = 0; j < d; ++j) out.at2(r, j) /= T(count[r]);
    return push("scatter_mean_rows", std::move(out),
                [messages, dst = std::move(dst), count = std::move(count), d](Tape& t, NodeId self) {
                  const auto& g = t.node(self).grad;
                  auto& gm = t.node(messages).grad;
                  for (std::size_t i = 0; i < dst.size(); ++i)
                    for (std::size_t j = 0; j < d; ++j)
                      gm.at2(i, j) += g.at2(dst[i], j) / T(count[dst[i]]);
                });
  }

  // ---- softmax over stacked positions ----

  /// Column-wise softmax of a P x N matrix: positions compete down each column.
  NodeId softmax_cols(NodeId a) {
    const auto& av = value(a);
    if (av.rank() != 2) throw ShapeError("softmax_cols: expects rank-2, got " + shape_str(av.shape));
    std::size_t p = av.rows(), n = av.cols();
    Tensor<T> out = Tensor<T>::zeros({p, n});
    for (std::size_t c = 0; c < n; ++c) {
      T mx = av.at2(0, c);
      for (std::size_t r = 1; r < p; ++r) mx = std::max(mx, av.at2(r, c));
      T z = T(0);
      for (std::size_t r = 0; r < p; ++r) {
        out.at2(r, c) = std::exp(av.at2(r, c) - mx);
        z += out.at2(r, c);
      }
      for (std::size_t r = 0; r < p; ++r) out.at2(r, c) /= z;
    }
    return push("softmax_cols", std::move(out), [a, p, n](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad;
      const auto& y = t.node(self).value;
      auto& ga = t.node(a).grad;
      for (std::size_t c = 0; c < n; ++c) {
        T dot = T(0);
        for (std::size_t r = 0; r < p; ++r) dot += g.at2(r, c) * y.at2(r, c);
        for (std::size_t r = 0; r < p; ++r)
          ga.at2(r, c) += y.at2(r, c) * (g.at2(r, c) - dot);
      }
    });
  }

  /// Per-coordinate softmax across a stack of P same-shape arrays.
  /// Returns the P weight arrays, each with the input shape.
  std::vector<NodeId> softmax_over_positions(const std::vector<NodeId>& xs) {
    Shape s = value(xs.at(0)).shape;
    NodeId stacked = stack_rows(xs);
    NodeId weights = softmax_cols(stacked);
    std::vector<NodeId> out;
    out.reserve(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) out.push_back(row_reshape(weights, j, s));
    return out;
  }

  // ---- convolution ----

  /// 1-D cross-correlation of an in_ch x w signal with ch x in_ch x ke kernels,
  /// zero padding p on both sides. Output is ch x (w + 2p - ke + 1).
  NodeId conv1d(NodeId input, NodeId kernels, std::size_t padding) {
    const auto& xv = value(input);
    const auto& kv = value(kernels);
    if (xv.rank() != 2 || kv.rank() != 3 || kv.shape[1] != xv.shape[0])
      throw ShapeError("conv1d: signal " + shape_str(xv.shape) + " vs kernels " + shape_str(kv.shape));
    std::size_t in_ch = xv.shape[0], w = xv.shape[1];
    std::size_t ch = kv.shape[0], ke = kv.shape[2];
    if (w + 2 * padding + 1 < ke)
      throw ShapeError("conv1d: kernel size " + std::to_string(ke) + " exceeds padded signal");
    std::size_t w_out = w + 2 * padding - ke + 1;
    Tensor<T> out = Tensor<T>::zeros({ch, w_out});
    auto kat = [&](std::size_t c, std::size_t ic, std::size_t j) -> const T& {
      return kv.data[(c * in_ch + ic) * ke + j];
    };
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t i = 0; i < w_out; ++i) {
        T acc = T(0);
        for (std::size_t ic = 0; ic < in_ch; ++ic)
          for (std::size_t j = 0; j < ke; ++j) {
            std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(padding);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(w)) continue;
            acc += kat(c, ic, j) * xv.at2(ic, src);
          }
        out.at2(c, i) = acc;
      }
    return push("conv1d", std::move(out),
                [input, kernels, padding, in_ch, w, ch, ke, w_out](Tape& t, NodeId self) {
                  const auto& g = t.node(self).grad;
                  const auto& xv = t.value(input);
                  const auto& kv = t.value(kernels);
                  auto& gx = t.node(input).grad;
                  auto& gk = t.node(kernels).grad;
                  for (std::size_t c = 0; c < ch; ++c)
                    for (std::size_t i = 0; i < w_out; ++i) {
                      T gout = g.at2(c, i);
                      if (gout == T(0)) continue;
                      for (std::size_t ic = 0; ic < in_ch; ++ic)
                        for (std::size_t j = 0; j < ke; ++j) {
                          std::ptrdiff_t src =
                              static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(padding);
                          if (src < 0 || src >= static_cast<std::ptrdiff_t>(w)) continue;
                          gx.at2(ic, src) += gout * kv.data[(c * in_ch + ic) * ke + j];
                          gk.data[(c * in_ch + ic) * ke + j] += gout * xv.at2(ic, src);
                        }
                    }
                });
  }

  // ---- stochastic / mode-dependent ops ----

  /// Inverted-scaling dropout: kept activations are divided by 1-rate in
  /// training so that eval mode is the identity.
  NodeId dropout(NodeId a, double rate) {
    if (rate < 0.0 || rate >= 1.0)
      throw Error("dropout: rate " + std::to_string(rate) + " outside [0,1)");
    const auto& av = value(a);
    if (!opts_.training || rate == 0.0) {
      Tensor<T> out = av;
      return push("dropout", std::move(out), [a](Tape& t, NodeId self) {
        t.accumulate(a, t.node(self).grad.data);
      });
    }
    if (opts_.rng == nullptr) throw Error("dropout: training mode requires an rng");
    std::bernoulli_distribution keep(1.0 - rate);
    std::vector<T> mult(av.numel());
    T inv = T(1.0 / (1.0 - rate));
    for (auto& m : mult) m = keep(*opts_.rng) ? inv : T(0);
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= mult[i];
    return push("dropout", std::move(out), [a, mult = std::move(mult)](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad.data;
      auto& ga = t.node(a).grad.data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mult[i];
    });
  }

  /// Randomized leaky ReLU. Training mode samples the negative slope per
  /// element from U[lower, upper]; otherwise the slope is fixed at the
  /// midpoint (lower+upper)/2.
  NodeId rrelu(NodeId a, double lower, double upper) {
    if (!(lower > 0.0 && lower <= upper && upper < 1.0))
      throw Error("rrelu: bounds (" + std::to_string(lower) + ", " + std::to_string(upper) +
                  ") must satisfy 0 < lower <= upper < 1");
    const auto& av = value(a);
    std::vector<T> slope(av.numel(), T(1));
    if (opts_.training) {
      if (opts_.rng == nullptr) throw Error("rrelu: training mode requires an rng");
      std::uniform_real_distribution<double> dist(lower, upper);
      for (std::size_t i = 0; i < av.numel(); ++i)
        if (av.data[i] < T(0)) slope[i] = T(dist(*opts_.rng));
    } else {
      T mid = T((lower + upper) / 2.0);
      for (std::size_t i = 0; i < av.numel(); ++i)
        if (av.data[i] < T(0)) slope[i] = mid;
    }
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= slope[i];
    return push("rrelu", std::move(out), [a, slope = std::move(slope)](Tape& t, NodeId self) {
      const auto& g = t.node(self).grad.data;
      auto& ga = t.node(a).grad.data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * slope[i];
    });
  }

  // ---- losses ----

  /// Softmax cross-entropy of a score vector against a gold index.
  NodeId cross_entropy(NodeId scores, std::size_t gold) {
    const auto& sv = value(scores);
    if (sv.rank() != 1) throw ShapeError("cross_entropy: scores must be rank-1, got " + shape_str(sv.shape));
    if (gold >= sv.numel())
      throw Error("cross_entropy: gold index " + std::to_string(gold) + " outside " +
                  std::to_string(sv.numel()) + " candidates");
    T mx = *std::max_element(sv.data.begin(), sv.data.end());
    T z = T(0);
    for (T v : sv.data) z += std::exp(v - mx);
    T loss = mx + std::log(z) - sv.data[gold];
    return push("cross_entropy", Tensor<T>::scalar(loss), [scores, gold](Tape& t, NodeId self) {
      T g = t.node(self).grad.data[0];
      const auto& sv = t.value(scores);
      auto& gs = t.node(scores).grad.data;
      T mx = *std::max_element(sv.data.begin(), sv.data.end());
      T z = T(0);
      for (T v : sv.data) z += std::exp(v - mx);
      for (std::size_t i = 0; i < sv.numel(); ++i) {
        T p = std::exp(sv.data[i] - mx) / z;
        gs[i] += g * (p - (i == gold ? T(1) : T(0)));
      }
    });
  }

  // ---- backward ----

  /// Seeds d(loss)/d(loss) = 1 and walks the record once in reverse.
  /// All gradients are zeroed first, so repeated calls are bit-identical.
  void backward(NodeId loss) {
    if (!loss.valid() || static_cast<std::size_t>(loss.index) >= nodes_.size())
      throw Error("backward: invalid loss node");
    if (!value(loss).is_scalar())
      throw Error("backward: loss must be scalar, got " + shape_str(value(loss).shape));
    for (auto& nd : nodes_) nd.grad.fill(T(0));
    nodes_[loss.index].grad.data[0] = T(1);
    for (std::int32_t i = loss.index; i >= 0; --i)
      if (nodes_[i].backprop) nodes_[i].backprop(*this, NodeId{i});
  }

  Node& node(NodeId id) { return nodes_.at(id.index); }
  const Node& node(NodeId id) const { return nodes_.at(id.index); }

  void accumulate(NodeId id, const std::vector<T>& g) {
    auto& dst = node(id).grad.data;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }

 private:
  NodeId push(const char* op, Tensor<T> value, std::function<void(Tape&, NodeId)> backprop) {
    if (opts_.check_finite && !value.all_finite())
      throw NumericError(std::string(op) + ": produced a non-finite value");
    Node nd;
    nd.value = std::move(value);
    nd.grad = Tensor<T>::zeros(nd.value.shape);
    nd.op = op;
    nd.backprop = std::move(backprop);
    nodes_.push_back(std::move(nd));
    return NodeId{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  static void require_same(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    if (!same_shape(a, b))
      throw ShapeError(std::string(op) + ": " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }

  static std::tuple<std::size_t, std::size_t, std::size_t> matmul_dims(const Tensor<T>& a,
                                                                       const Tensor<T>& b) {
    if (a.rank() < 1 || a.rank() > 2 || b.rank() < 1 || b.rank() > 2)
      throw ShapeError("matmul: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    std::size_t m = a.rank() == 2 ? a.shape[0] : 1;
    std::size_t ka = a.rank() == 2 ? a.shape[1] : a.shape[0];
    std::size_t kb = b.rank() == 2 ? b.shape[0] : b.shape[0];
    std::size_t n = b.rank() == 2 ? b.shape[1] : 1;
    if (ka != kb) throw ShapeError("matmul: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    return {m, ka, n};
  }

  TapeOptions opts_;
  std::vector<Node> nodes_;
};

}  // namespace tkgc
