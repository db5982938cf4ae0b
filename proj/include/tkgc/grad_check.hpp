#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tkgc/error.hpp"

namespace tkgc {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
};

/// Central-difference check of an analytic gradient. `eval` maps the flat
/// parameter vector to a scalar loss and must be deterministic: it is run
/// twice up front and any mismatch is an error (a stochastic loss makes the
/// comparison meaningless). `indices` empty means check every coordinate.
inline GradCheckResult grad_check(const std::function<double(const std::vector<double>&)>& eval,
                                  std::vector<double> x, const std::vector<double>& analytic,
                                  const std::vector<std::size_t>& indices = {}, double h = 1e-5) {
  if (analytic.size() != x.size())
    throw Error("grad_check: " + std::to_string(analytic.size()) + " analytic entries for " +
                std::to_string(x.size()) + " parameters");
  double probe1 = eval(x);
  double probe2 = eval(x);
  if (probe1 != probe2)
    throw Error("grad_check: eval is not deterministic (" + std::to_string(probe1) + " vs " +
                std::to_string(probe2) + "); fix the mode or seed before checking");
  std::vector<std::size_t> which = indices;
  if (which.empty()) {
    which.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) which[i] = i;
  }
  GradCheckResult res;
  for (std::size_t i : which) {
    if (i >= x.size()) throw Error("grad_check: index " + std::to_string(i) + " out of range");
    double keep = x[i];
    x[i] = keep + h;
    double fp = eval(x);
    x[i] = keep - h;
    double fm = eval(x);
    x[i] = keep;
    double numeric = (fp - fm) / (2.0 * h);
    double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_index = i;
      res.analytic_at_worst = analytic[i];
      res.numeric_at_worst = numeric;
    }
    ++res.checked;
  }
  return res;
}

}  // namespace tkgc
