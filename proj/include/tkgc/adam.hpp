#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tkgc/tensor.hpp"

namespace tkgc {

/// Adam with bias correction. State (m, v, step) lives here keyed by
/// parameter name so it can be checkpointed alongside the parameters.
template <typename T>
class AdamOptimizer {
 public:
  struct Hyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit AdamOptimizer(Hyper h = {}) : h_(h) {}

  const Hyper& hyper() const { return h_; }
  std::int64_t step_count() const { return step_; }

  /// Applies one update to every (name, param, grad) triple. All triples
  /// share a single step counter, matching a whole-model optimizer step.
  void step(const std::vector<std::pair<std::string, Tensor<T>*>>& params,
            const std::vector<const Tensor<T>*>& grads) {
    if (params.size() != grads.size())
      throw ShapeError("adam: " + std::to_string(params.size()) + " params vs " +
                       std::to_string(grads.size()) + " grads");
    ++step_;
    double bc1 = 1.0 - std::pow(h_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(h_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& p = *params[i].second;
      const Tensor<T>& g = *grads[i];
      if (!same_shape(p, g))
        throw ShapeError("adam: param " + params[i].first + " " + shape_str(p.shape) +
                         " vs grad " + shape_str(g.shape));
      Moments& st = slot(params[i].first, p.shape);
      for (std::size_t j = 0; j < p.numel(); ++j) {
        double gj = static_cast<double>(g.data[j]);
        st.m[j] = h_.beta1 * st.m[j] + (1.0 - h_.beta1) * gj;
        st.v[j] = h_.beta2 * st.v[j] + (1.0 - h_.beta2) * gj * gj;
        double mhat = st.m[j] / bc1;
        double vhat = st.v[j] / bc2;
        p.data[j] -= static_cast<T>(h_.lr * mhat / (std::sqrt(vhat) + h_.eps));
      }
    }
  }

  // Checkpoint access: moments are stored in double regardless of T.
  struct Moments {
    std::vector<double> m, v;
  };
  std::map<std::string, Moments>& state() { return state_; }
  const std::map<std::string, Moments>& state() const { return state_; }
  void set_step_count(std::int64_t s) { step_ = s; }

 private:
  Moments& slot(const std::string& name, const Shape& shape) {
    auto it = state_.find(name);
    if (it == state_.end()) {
      Moments st;
      st.m.assign(shape_numel(shape), 0.0);
      st.v.assign(shape_numel(shape), 0.0);
      it = state_.emplace(name, std::move(st)).first;
    } else if (it->second.m.size() != shape_numel(shape)) {
      throw ShapeError("adam: state for " + name + " has " + std::to_string(it->second.m.size()) +
                       " entries, param has " + std::to_string(shape_numel(shape)));
    }
    return it->second;
  }

  Hyper h_;
  std::int64_t step_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace tkgc
