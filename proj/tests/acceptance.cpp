// Acceptance gate: one check per shipping criterion, each printing exactly
// one [PASS]/[FAIL]/[SKIP] line. Run with no arguments for the full gate or
// with criterion numbers to run a subset (e.g. `acceptance 1 3 9`).
//
// Exit code: 1 if any executed criterion failed, 77 if everything selected
// was skipped (optional checks without their datasets), 0 otherwise.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tkgc/checkpoint.hpp"
#include "tkgc/config.hpp"
#include "tkgc/data.hpp"
#include "tkgc/decoder.hpp"
#include "tkgc/embedding.hpp"
#include "tkgc/encoder.hpp"
#include "tkgc/grad_check.hpp"
#include "tkgc/metrics.hpp"
#include "tkgc/model.hpp"
#include "tkgc/tape.hpp"
#include "tkgc/train.hpp"

namespace {

using namespace tkgc;

struct Outcome {
  enum Status { Pass, Fail, Skip } status = Pass;
  std::string detail;
};
Outcome pass(std::string d = "") { return {Outcome::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::Skip, std::move(d)}; }

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

TkgDataset prepared(std::uint64_t seed, std::int64_t E, std::int64_t R, std::int64_t T,
                    SyntheticPattern pattern) {
  TkgDataset ds = generate_synthetic(seed, E, R, T, pattern);
  add_inverses(ds);
  ds.snapshots = build_snapshots(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// criterion 1: per-operation gradient checks
// ---------------------------------------------------------------------------

// One randomized check instance: leaf shapes, a graph builder over those
// leaves ending in a scalar, and the tape mode it must run under. Stochastic
// ops reseed their own tape RNG on every evaluation, which keeps the loss a
// deterministic function of the parameters.
struct OpPoint {
  std::vector<Shape> shapes;
  std::function<NodeId(Tape<double>&, const std::vector<NodeId>&)> build;
  bool training = false;
  std::uint64_t tape_seed = 0;
  double min_abs = 0.0;  // push drawn values away from activation kinks
};

double eval_op_point(const OpPoint& pt, const std::vector<double>& flat,
                     std::vector<double>* grad) {
  std::mt19937_64 tape_rng(pt.tape_seed);
  TapeOptions opts;
  opts.training = pt.training;
  opts.rng = &tape_rng;
  Tape<double> tape(opts);
  std::vector<NodeId> leaves;
  std::size_t off = 0;
  for (const Shape& s : pt.shapes) {
    std::size_t n = shape_numel(s);
    leaves.push_back(
        tape.leaf(Tensor<double>(s, std::vector<double>(flat.begin() + off, flat.begin() + off + n))));
    off += n;
  }
  NodeId loss = pt.build(tape, leaves);
  double v = tape.value(loss).data[0];
  if (grad) {
    tape.backward(loss);
    grad->clear();
    for (NodeId l : leaves) {
      const auto& g = tape.grad(l).data;
      grad->insert(grad->end(), g.begin(), g.end());
    }
  }
  return v;
}

// Weighted sum against fixed random weights: reduces any output to a scalar
// without symmetrizing the gradient the way a plain sum would.
NodeId wsum(Tape<double>& tape, NodeId x, std::uint64_t wseed) {
  const Tensor<double>& v = tape.value(x);
  std::mt19937_64 wrng(wseed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor<double> w = Tensor<double>::zeros(v.shape);
  for (auto& e : w.data) e = u(wrng);
  return tape.sum(tape.elementwise_mul(x, tape.constant(std::move(w))));
}

Outcome c1_gradient_ops() {
  std::mt19937_64 rng(20240801);
  auto dim = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  struct OpSpec {
    const char* name;
    std::function<OpPoint(int)> make;
  };
  std::vector<OpSpec> ops;
  auto add_op = [&ops](const char* name, std::function<OpPoint(int)> make) {
    ops.push_back({name, std::move(make)});
  };

  add_op("add", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    return OpPoint{{{r, c}, {r, c}},
                   [w = 100u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.add(l[0], l[1]), w);
                   }};
  });
  add_op("elementwise_mul", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    return OpPoint{{{r, c}, {r, c}},
                   [w = 200u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.elementwise_mul(l[0], l[1]), w);
                   }};
  });
  add_op("scale", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    double k = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    return OpPoint{{{r, c}},
                   [k, w = 300u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.scale(l[0], k), w);
                   }};
  });
  add_op("sine", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    return OpPoint{{{r, c}},
                   [w = 400u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.sine(l[0]), w);
                   }};
  });
  add_op("add_rowvec", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    return OpPoint{{{r, c}, {c}},
                   [w = 500u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.add_rowvec(l[0], l[1]), w);
                   }};
  });
  add_op("add_colvec", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    return OpPoint{{{r, c}, {r}},
                   [w = 600u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.add_colvec(l[0], l[1]), w);
                   }};
  });
  add_op("mul_colvec", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    return OpPoint{{{r, c}, {r}},
                   [w = 700u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.mul_colvec(l[0], l[1]), w);
                   }};
  });
  add_op("concat_last_axis", [&](int i) {
    std::size_t r = dim(2, 6), c1 = dim(2, 5), c2 = dim(2, 5);
    return OpPoint{{{r, c1}, {r, c2}},
                   [w = 800u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.concat_last_axis(l[0], l[1]), w);
                   }};
  });
  add_op("reshape", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    return OpPoint{{{r, c}},
                   [r, c, w = 900u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.reshape(l[0], {c, r}), w);
                   }};
  });
  add_op("row", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    std::size_t j = dim(0, r - 1);
    return OpPoint{{{r, c}},
                   [j, w = 1000u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.row(l[0], j), w);
                   }};
  });
  add_op("row_reshape", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    std::size_t j = dim(0, r - 1);
    return OpPoint{{{r, c}},
                   [j, c, w = 1100u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.row_reshape(l[0], j, {1, c}), w);
                   }};
  });
  add_op("stack_rows", [&](int i) {
    std::size_t r = dim(2, 4), c = dim(2, 4);
    return OpPoint{{{r, c}, {r, c}, {r, c}},
                   [w = 1200u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.stack_rows({l[0], l[1], l[2]}), w);
                   }};
  });
  add_op("sum", [&](int) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    return OpPoint{{{r, c}},
                   [](Tape<double>& t, const std::vector<NodeId>& l) { return t.sum(l[0]); }};
  });
  add_op("mean_rows", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    return OpPoint{{{r, c}},
                   [w = 1300u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.mean_rows(l[0]), w);
                   }};
  });
  add_op("matmul", [&](int i) {
    std::size_t r = dim(2, 5), k = dim(2, 5), c = dim(2, 5);
    if (i % 4 == 3)  // rank-1 promotion path
      return OpPoint{{{k}, {k, c}},
                     [w = 1400u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                       return wsum(t, t.matmul(l[0], l[1]), w);
                     }};
    return OpPoint{{{r, k}, {k, c}},
                   [w = 1400u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.matmul(l[0], l[1]), w);
                   }};
  });
  add_op("gather_rows", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6), n = dim(3, 8);
    std::vector<std::int64_t> idx(n);
    for (auto& v : idx) v = static_cast<std::int64_t>(dim(0, r - 1));  // repeats accumulate
    return OpPoint{{{r, c}},
                   [idx, w = 1500u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.gather_rows(l[0], idx), w);
                   }};
  });
  add_op("scatter_mean_rows", [&](int i) {
    std::size_t n = dim(3, 8), c = dim(2, 6), rows = dim(2, 5);
    std::vector<std::int64_t> dst(n);
    for (auto& v : dst) v = static_cast<std::int64_t>(dim(0, rows - 1));  // collisions average
    return OpPoint{{{n, c}},
                   [dst, rows, w = 1600u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.scatter_mean_rows(l[0], dst, rows), w);
                   }};
  });
  add_op("softmax_cols", [&](int i) {
    std::size_t p = dim(2, 5), c = dim(2, 6);
    return OpPoint{{{p, c}},
                   [w = 1700u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.softmax_cols(l[0]), w);
                   }};
  });
  add_op("softmax_over_positions", [&](int i) {
    std::size_t r = dim(2, 4), c = dim(2, 4);
    return OpPoint{{{r, c}, {r, c}, {r, c}},
                   [w = 1800u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     auto ws = t.softmax_over_positions({l[0], l[1], l[2]});
                     NodeId acc = wsum(t, ws[0], w);
                     for (std::size_t j = 1; j < ws.size(); ++j)
                       acc = t.add(acc, wsum(t, ws[j], w + 40u * static_cast<unsigned>(j)));
                     return acc;
                   }};
  });
  add_op("conv1d", [&](int i) {
    std::size_t in_ch = dim(1, 3), width = dim(3, 7), ch = dim(1, 3), ke = dim(1, 3);
    std::size_t pad = dim(0, 2);
    if (width + 2 * pad + 1 < ke) pad = ke;  // keep the padded signal wide enough
    return OpPoint{{{in_ch, width}, {ch, in_ch, ke}},
                   [pad, w = 1900u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                     return wsum(t, t.conv1d(l[0], l[1], pad), w);
                   }};
  });
  add_op("dropout(train)", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    OpPoint pt{{{r, c}},
               [w = 2000u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                 return wsum(t, t.dropout(l[0], 0.3), w);
               }};
    pt.training = true;
    pt.tape_seed = 5000u + static_cast<std::uint64_t>(i);
    return pt;
  });
  add_op("rrelu(eval)", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    OpPoint pt{{{r, c}},
               [w = 2100u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                 return wsum(t, t.rrelu(l[0], 0.125, 1.0 / 3.0), w);
               }};
    pt.min_abs = 0.2;  // finite differences must not cross the kink at zero
    return pt;
  });
  add_op("rrelu(train)", [&](int i) {
    std::size_t r = dim(2, 6), c = dim(2, 6);
    OpPoint pt{{{r, c}},
               [w = 2200u + i](Tape<double>& t, const std::vector<NodeId>& l) {
                 return wsum(t, t.rrelu(l[0], 0.125, 1.0 / 3.0), w);
               }};
    pt.training = true;
    pt.tape_seed = 6000u + static_cast<std::uint64_t>(i);
    pt.min_abs = 0.2;
    return pt;
  });
  add_op("cross_entropy", [&](int) {
    std::size_t n = dim(3, 8);
    std::size_t gold = dim(0, n - 1);
    return OpPoint{{{n}}, [gold](Tape<double>& t, const std::vector<NodeId>& l) {
                     return t.cross_entropy(l[0], gold);
                   }};
  });

  const int points = 100;
  std::size_t total_checks = 0;
  for (const OpSpec& op : ops) {
    for (int i = 0; i < points; ++i) {
      OpPoint pt = op.make(i);
      std::size_t n = 0;
      for (const Shape& s : pt.shapes) n += shape_numel(s);
      std::vector<double> x0(n);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (auto& v : x0) {
        v = u(rng);
        if (pt.min_abs > 0.0) v = (v < 0 ? -1.0 : 1.0) * (pt.min_abs + std::abs(v));
      }
      std::vector<double> analytic;
      eval_op_point(pt, x0, &analytic);
      auto eval = [&pt](const std::vector<double>& x) { return eval_op_point(pt, x, nullptr); };
      GradCheckResult res = grad_check(eval, x0, analytic, {}, 1e-5);
      total_checks += res.checked;
      if (res.max_rel_error > 1e-4)
        return fail(std::string(op.name) + " point " + std::to_string(i) + ": rel error " +
                    fmt(res.max_rel_error) + " at coordinate " + std::to_string(res.worst_index) +
                    " (analytic " + fmt(res.analytic_at_worst) + ", numeric " +
                    fmt(res.numeric_at_worst) + ")");
    }
  }
  return pass(std::to_string(ops.size()) + " ops x " + std::to_string(points) +
              " random points, " + std::to_string(total_checks) +
              " coordinates, all rel errors <= 1e-4");
}

// ---------------------------------------------------------------------------
// criterion 2: end-to-end gradient through the full loss
// ---------------------------------------------------------------------------

Outcome c2_end_to_end_gradient() {
  TkgDataset ds = prepared(9, 12, 3, 8, SyntheticPattern::CyclicDeterministic);
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.history_length = 2;
  cfg.layers = 2;
  cfg.channels = 4;
  cfg.kernel_size = 3;
  cfg.dropout = 0.2;  // inert outside training mode
  cfg.seed = 9;

  std::mt19937_64 rng(cfg.seed);
  ModelParameters<double> base =
      ModelParameters<double>::init(cfg, ds.num_entities, ds.num_base_relations,
                                    ds.snapshot_count, rng);

  std::vector<std::int64_t> stamps = detail::distinct_timestamps(ds.train);
  std::int64_t t_q = stamps.back();
  QueryBatch batch = QueryBatch::build(ds.train, t_q, Phase::Original);
  if (batch.queries.empty()) return fail("no queries at the chosen timestamp");

  std::vector<std::string> names;
  std::vector<std::size_t> sizes;
  std::size_t total = 0;
  for (auto& [name, tensor] : base.trainable()) {
    names.push_back(name);
    sizes.push_back(tensor->numel());
    total += tensor->numel();
  }

  auto write_flat = [&](ModelParameters<double>& p, const std::vector<double>& x) {
    std::size_t off = 0;
    for (auto& [name, tensor] : p.trainable()) {
      std::copy(x.begin() + off, x.begin() + off + tensor->numel(), tensor->data.begin());
      off += tensor->numel();
    }
  };
  auto read_flat = [&](ModelParameters<double>& p) {
    std::vector<double> x;
    x.reserve(total);
    for (auto& [name, tensor] : p.trainable())
      x.insert(x.end(), tensor->data.begin(), tensor->data.end());
    return x;
  };

  auto loss_of = [&](const std::vector<double>& x, std::vector<double>* grad) {
    ModelParameters<double> p = base;
    write_flat(p, x);
    Tape<double> tape;  // deterministic activation mode
    ModelNodes nodes = stage_parameters(tape, p);
    NodeId H = encode_sequence(tape, nodes, p, ds.snapshots, batch);
    NodeId loss{};
    bool first = true;
    for (const Query& q : batch.queries) {
      NodeId h_e = tape.row(H, static_cast<std::size_t>(q.subject));
      NodeId h_r = relation_embedding(tape, nodes, p, q.relation);
      NodeId scores = score_all(tape, h_e, h_r, H, nodes, p);
      NodeId lq = classification_loss(tape, scores, q.gold);
      loss = first ? lq : tape.add(loss, lq);
      first = false;
    }
    loss = tape.scale(loss, 1.0 / static_cast<double>(batch.queries.size()));
    double v = tape.value(loss).data[0];
    if (grad) {
      tape.backward(loss);
      grad->clear();
      std::map<std::string, NodeId> by_name(nodes.named.begin(), nodes.named.end());
      for (const std::string& name : names) {
        const auto& g = tape.grad(by_name.at(name)).data;
        grad->insert(grad->end(), g.begin(), g.end());
      }
    }
    return v;
  };

  std::vector<double> x0 = read_flat(base);
  std::vector<double> analytic;
  loss_of(x0, &analytic);

  std::vector<std::size_t> all_idx(total);
  std::iota(all_idx.begin(), all_idx.end(), 0u);
  std::mt19937_64 pick(77);
  std::shuffle(all_idx.begin(), all_idx.end(), pick);
  std::vector<std::size_t> idx(all_idx.begin(), all_idx.begin() + 60);
  std::sort(idx.begin(), idx.end());

  auto eval = [&](const std::vector<double>& x) { return loss_of(x, nullptr); };
  GradCheckResult res = grad_check(eval, x0, analytic, idx, 1e-5);
  if (res.checked < 50) return fail("only checked " + std::to_string(res.checked) + " parameters");
  if (res.max_rel_error > 1e-3)
    return fail("rel error " + fmt(res.max_rel_error) + " at flat parameter " +
                std::to_string(res.worst_index) + " (analytic " + fmt(res.analytic_at_worst) +
                ", numeric " + fmt(res.numeric_at_worst) + ")");
  return pass(std::to_string(res.checked) + " of " + std::to_string(total) +
              " parameters checked through the full loss, max rel error " +
              fmt(res.max_rel_error));
}

// ---------------------------------------------------------------------------
// criterion 3: ranking against a sort-based oracle
// ---------------------------------------------------------------------------

// Brute-force reference: materialize the unfiltered candidates plus the gold,
// sort by score with the gold winning ties, and read off its position.
std::int64_t oracle_rank(const std::vector<double>& scores, std::int64_t gold,
                         const std::vector<std::int64_t>& filter) {
  std::vector<std::int64_t> cand;
  for (std::int64_t e = 0; e < static_cast<std::int64_t>(scores.size()); ++e)
    if (e == gold || !std::binary_search(filter.begin(), filter.end(), e)) cand.push_back(e);
  std::sort(cand.begin(), cand.end(), [&](std::int64_t a, std::int64_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return (a == gold) > (b == gold);
  });
  auto it = std::find(cand.begin(), cand.end(), gold);
  return static_cast<std::int64_t>(it - cand.begin()) + 1;
}

Outcome c3_ranking_oracle() {
  std::mt19937_64 rng(31337);
  const std::int64_t E = 50;
  std::vector<std::int64_t> ranks, oracle_ranks;
  for (int q = 0; q < 200; ++q) {
    std::vector<double> scores(E);
    bool tie_heavy = q % 2 == 0;
    for (auto& s : scores) {
      double v = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
      s = tie_heavy ? std::round(v * 2.0) / 2.0 : v;  // coarse grid forces ties
    }
    std::int64_t gold = std::uniform_int_distribution<std::int64_t>(0, E - 1)(rng);
    std::set<std::int64_t> filt{gold};
    for (std::int64_t e = 0; e < E; ++e)
      if (std::bernoulli_distribution(0.3)(rng)) filt.insert(e);
    std::vector<std::int64_t> filter(filt.begin(), filt.end());

    std::int64_t got = rank_query(scores, gold, filter);
    std::int64_t want = oracle_rank(scores, gold, filter);
    if (got != want)
      return fail("query " + std::to_string(q) + ": rank_query " + std::to_string(got) +
                  " vs oracle " + std::to_string(want));
    ranks.push_back(got);
    oracle_ranks.push_back(want);
  }

  EvaluationReport rep = aggregate_metrics(ranks);
  double mrr = 0.0, h1 = 0.0, h3 = 0.0, h10 = 0.0;
  for (std::int64_t r : oracle_ranks) {
    mrr += 1.0 / static_cast<double>(r);
    h1 += r <= 1;
    h3 += r <= 3;
    h10 += r <= 10;
  }
  double n = static_cast<double>(oracle_ranks.size());
  mrr /= n; h1 /= n; h3 /= n; h10 /= n;
  if (std::abs(rep.mrr - mrr) > 1e-12 || std::abs(rep.hits1 - h1) > 1e-12 ||
      std::abs(rep.hits3 - h3) > 1e-12 || std::abs(rep.hits10 - h10) > 1e-12)
    return fail("aggregate_metrics disagrees with direct averages");
  return pass("200 queries over 50 candidates (tie-heavy and filtered), ranks and aggregates exact");
}

// ---------------------------------------------------------------------------
// criterion 4: structural parameter counts
// ---------------------------------------------------------------------------

Outcome c4_parameter_counts() {
  TrainConfig cfg;  // defaults: dim 200, 2 layers, convtranse decoder
  std::mt19937_64 rng(1);
  ModelParameters<double> p = ModelParameters<double>::init(cfg, 7128, 230, 365, rng);
  ParameterCountReport r = p.count_report();

  if (r.input_formula != 4448800)
    return fail("input formula produced " + std::to_string(r.input_formula));
  if (r.input_actual != r.input_formula)
    return fail("input-side count " + std::to_string(r.input_actual) + " != formula " +
                std::to_string(r.input_formula));
  if (r.skip_formula != 40000 || r.skip_actual != 40000)
    return fail("skip-flow count " + std::to_string(r.skip_actual) + " / formula " +
                std::to_string(r.skip_formula) + " != 40000");
  bool noted = false;
  for (const auto& n : r.notes)
    if (n.find("fully connected") != std::string::npos) noted = true;
  if (!noted) return fail("decoder discrepancy note missing from the count report");

  std::ostringstream os;
  os << "input " << r.input_actual << " (= 3d|E| + 2d^2 + 2d|R|), skip " << r.skip_actual
     << " (= d^2); decoder " << r.decoder_actual << " beside reference formula "
     << r.decoder_formula << "\n";
  for (const auto& n : r.notes) os << "    note: " << n << "\n";
  std::string detail = os.str();
  detail.pop_back();
  return pass(detail);
}

// ---------------------------------------------------------------------------
// criterion 5: overfit a deterministic synthetic dataset
// ---------------------------------------------------------------------------

Outcome c5_overfit() {
  TkgDataset ds = prepared(1, 20, 4, 30, SyntheticPattern::CyclicDeterministic);
  TrainConfig cfg;
  cfg.dim = 32;
  cfg.history_length = 3;
  cfg.lr = 0.01;
  cfg.epochs = 200;
  cfg.patience = 15;
  cfg.seed = 7;
  cfg.validate();

  Trainer<double> trainer(ds, cfg);
  std::int64_t epochs_run = 0;
  double best = 0.0;
  Checkpoint<double> ck = trainer.fit([&](const EpochLog& log) {
    epochs_run = log.epoch;
    best = std::max(best, log.val_mrr);
  });
  if (epochs_run > 200) return fail("ran " + std::to_string(epochs_run) + " epochs");
  if (best < 0.9)
    return fail("best validation MRR " + fmt(best) + " after " + std::to_string(epochs_run) +
                " epochs (needs >= 0.9 within 200)");
  return pass("validation MRR " + fmt(best) + " within " + std::to_string(epochs_run) +
              " epochs (best at epoch " + std::to_string(ck.epoch) + ")");
}

// ---------------------------------------------------------------------------
// criterion 6: attention weights form a valid per-coordinate mixture
// ---------------------------------------------------------------------------

Outcome c6_attention_invariants() {
  TkgDataset ds = prepared(11, 10, 3, 8, SyntheticPattern::UniformRandom);
  TrainConfig cfg;
  cfg.dim = 6;
  cfg.history_length = 4;
  cfg.layers = 1;
  cfg.seed = 11;

  std::mt19937_64 rng(cfg.seed);
  ModelParameters<double> params =
      ModelParameters<double>::init(cfg, ds.num_entities, ds.num_base_relations,
                                    ds.snapshot_count, rng);

  std::vector<std::int64_t> stamps = detail::distinct_timestamps(ds.train);
  std::int64_t t_q = stamps.back();
  for (Phase phase : {Phase::Original, Phase::Inverse}) {
    QueryBatch batch = QueryBatch::build(ds.train, t_q, phase);
    if (batch.queries.empty()) continue;

    Tape<double> tape;
    ModelNodes nodes = stage_parameters(tape, params);
    EncoderTrace<double> trace;
    encode_sequence(tape, nodes, params, ds.snapshots, batch, {}, &trace);
    if (trace.betas.empty()) return fail("no attention steps recorded");

    for (std::size_t step = 0; step < trace.betas.size(); ++step) {
      const auto& betas = trace.betas[step];
      std::size_t n = betas[0].numel();
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const auto& b : betas) {
          if (b.data[i] < -1e-9)
            return fail("negative weight " + fmt(b.data[i]) + " at step " + std::to_string(step));
          s += b.data[i];
        }
        if (std::abs(s - 1.0) > 1e-6)
          return fail("weights at step " + std::to_string(step) + " coordinate " +
                      std::to_string(i) + " sum to " + fmt(s));
      }
    }
  }

  // zeroed scoring matrix: every position must get the same weight
  ModelParameters<double> flat = params;
  flat.attention = Tensor<double>::zeros(flat.attention.shape);
  QueryBatch batch = QueryBatch::build(ds.train, t_q, Phase::Original);
  Tape<double> tape;
  ModelNodes nodes = stage_parameters(tape, flat);
  EncoderTrace<double> trace;
  encode_sequence(tape, nodes, flat, ds.snapshots, batch, {}, &trace);
  for (std::size_t step = 0; step < trace.betas.size(); ++step) {
    const auto& betas = trace.betas[step];
    double uniform = 1.0 / static_cast<double>(betas.size());
    for (const auto& b : betas)
      for (double v : b.data)
        if (std::abs(v - uniform) > 1e-6)
          return fail("zeroed scorer gave weight " + fmt(v) + " at step " + std::to_string(step) +
                      " instead of uniform " + fmt(uniform));
  }
  return pass("nonnegative, per-coordinate sums 1 within 1e-6 across phases; zeroed scorer uniform");
}

// ---------------------------------------------------------------------------
// criterion 7: two-phase propagation closes the single-phase leak
// ---------------------------------------------------------------------------

Outcome c7_leakage_regression() {
  TkgDataset ds = prepared(5, 16, 8, 40, SyntheticPattern::LeakProbe);
  TrainConfig base;
  base.dim = 32;
  base.history_length = 3;
  base.lr = 0.01;
  base.epochs = 30;
  base.patience = 30;

  FilterMap filter = FilterMap::build(ds);
  auto best_test_mrr = [&](TrainConfig cfg) {
    Trainer<double> trainer(ds, cfg);
    Checkpoint<double> best = trainer.fit();
    return Trainer<double>::evaluate_split(best.params, ds, filter, ds.test, "test").mrr;
  };

  std::vector<double> gaps;
  std::ostringstream os;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    TrainConfig combined = base;
    combined.seed = seed;
    combined.two_phase = false;
    double mrr_leaky = best_test_mrr(combined);

    TrainConfig split = base;
    split.seed = seed;
    split.two_phase = true;
    double mrr_safe = best_test_mrr(split);

    gaps.push_back(mrr_leaky - mrr_safe);
    os << " seed " << seed << ": single-phase " << fmt(mrr_leaky) << " vs two-phase "
       << fmt(mrr_safe) << ";";
  }
  double mean_gap = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
  int seeds_with_gap = static_cast<int>(std::count_if(gaps.begin(), gaps.end(),
                                                      [](double g) { return g >= 0.1; }));
  // soft assertion across the three seeds: the mean gap must clear the bar
  // and no more than one seed may fall under it
  if (mean_gap < 0.1 || seeds_with_gap < 2)
    return fail("mean single-phase advantage " + fmt(mean_gap) + " (" +
                std::to_string(seeds_with_gap) + "/3 seeds >= 0.1);" + os.str());
  return pass("mean single-phase advantage " + fmt(mean_gap) + " MRR across 3 seeds;" + os.str());
}

// ---------------------------------------------------------------------------
// criterion 8: ablations match their instrumented equivalents
// ---------------------------------------------------------------------------

Outcome c8_ablation_consistency() {
  TkgDataset ds = prepared(17, 12, 4, 10, SyntheticPattern::UniformRandom);
  TrainConfig cfg;
  cfg.dim = 10;
  cfg.history_length = 3;
  cfg.seed = 17;

  std::mt19937_64 rng(cfg.seed);
  ModelParameters<double> full =
      ModelParameters<double>::init(cfg, ds.num_entities, ds.num_base_relations,
                                    ds.snapshot_count, rng);

  std::vector<std::int64_t> stamps = detail::distinct_timestamps(ds.train);
  std::int64_t t_q = stamps.back();
  QueryBatch batch = QueryBatch::build(ds.train, t_q, Phase::Original);

  auto run = [&](const ModelParameters<double>& p, EncoderOptions opts) {
    Tape<double> tape;
    ModelNodes nodes = stage_parameters(tape, p);
    NodeId H = encode_sequence(tape, nodes, p, ds.snapshots, batch, opts);
    Tensor<double> out = tape.value(H);
    const Query& q = batch.queries.front();
    NodeId h_e = tape.row(H, static_cast<std::size_t>(q.subject));
    NodeId h_r = relation_embedding(tape, nodes, p, q.relation);
    NodeId s = score_all(tape, h_e, h_r, H, nodes, p);
    return std::make_pair(out, tape.value(s));
  };

  ModelParameters<double> no_skip = full;
  no_skip.config.ablate = {"skip"};
  auto [h_forced, s_forced] = run(full, {.force_beta0 = true, .zero_pools = false});
  auto [h_noskip, s_noskip] = run(no_skip, {});
  if (h_forced.data != h_noskip.data || s_forced.data != s_noskip.data)
    return fail("forcing beta_0 = 1 does not reproduce the skip ablation bit-for-bit");

  ModelParameters<double> no_rel = full;
  no_rel.config.ablate = {"relation_aware"};
  auto [h_zeroed, s_zeroed] = run(full, {.force_beta0 = false, .zero_pools = true});
  auto [h_norel, s_norel] = run(no_rel, {});
  if (h_zeroed.data != h_norel.data || s_zeroed.data != s_norel.data)
    return fail("zeroing relation pools does not reproduce the relation_aware ablation bit-for-bit");

  return pass("encoder outputs and decoder scores bit-identical for both ablation pairs");
}

// ---------------------------------------------------------------------------
// criterion 9: same-seed determinism
// ---------------------------------------------------------------------------

Outcome c9_determinism() {
  TkgDataset ds = prepared(23, 14, 3, 16, SyntheticPattern::UniformRandom);
  TrainConfig cfg;
  cfg.dim = 12;
  cfg.history_length = 2;
  cfg.layers = 1;
  cfg.channels = 4;
  cfg.epochs = 3;
  cfg.seed = 23;

  Trainer<double> a(ds, cfg), b(ds, cfg);
  for (int e = 0; e < 3; ++e) {
    double la = a.train_epoch(), lb = b.train_epoch();
    if (std::abs(la - lb) > 1e-10)
      return fail("epoch " + std::to_string(e + 1) + " losses differ by " + fmt(std::abs(la - lb)));
  }
  EvaluationReport ra = a.evaluate(ds.test, "test"), rb = b.evaluate(ds.test, "test");
  if (ra.mrr != rb.mrr || ra.hits1 != rb.hits1 || ra.hits3 != rb.hits3 ||
      ra.hits10 != rb.hits10 || ra.num_queries != rb.num_queries || ra.ranks != rb.ranks)
    return fail("evaluation reports differ between same-seed runs");
  return pass("3 epochs loss-identical within 1e-10 and evaluation reports exactly equal");
}

// ---------------------------------------------------------------------------
// criteria 10/11: optional checks against the public datasets
// ---------------------------------------------------------------------------

std::string dataset_root() {
  const char* env = std::getenv("TKGC_DATA_DIR");
  return env ? env : "data";
}

bool has_dataset(const std::string& dir) {
  std::ifstream f(dir + "/stat.txt");
  return f.good();
}

Outcome c10_dataset_statistics() {
  std::string root = dataset_root();
  bool icews = has_dataset(root + "/ICEWS14");
  bool wiki = has_dataset(root + "/WIKI");
  if (!icews && !wiki)
    return skip("no ICEWS14/WIKI under '" + root + "' (set TKGC_DATA_DIR to enable)");

  std::ostringstream os;
  if (icews) {
    TkgDataset ds = load_dataset(root + "/ICEWS14");
    DatasetStatistics st = compute_statistics(ds);
    if (st.num_entities != 7128) return fail("ICEWS14 entities " + std::to_string(st.num_entities));
    if (st.num_relations != 230) return fail("ICEWS14 relations " + std::to_string(st.num_relations));
    if (st.num_facts != 89730) return fail("ICEWS14 facts " + std::to_string(st.num_facts));
    if (st.num_snapshots != 365)
      return fail("ICEWS14 snapshots " + std::to_string(st.num_snapshots));
    if (st.train_snapshots != 304 || st.valid_snapshots != 30 || st.test_snapshots != 31)
      return fail("ICEWS14 split snapshots " + std::to_string(st.train_snapshots) + "/" +
                  std::to_string(st.valid_snapshots) + "/" + std::to_string(st.test_snapshots));
    if (std::abs(st.facts_per_snapshot - 245.8) > 0.05)
      return fail("ICEWS14 facts/snapshot " + fmt(st.facts_per_snapshot));
    os << "ICEWS14: 7128 entities, 230 relations, 89730 facts, 365 snapshots (304/30/31), "
       << fmt(st.facts_per_snapshot) << " facts/snapshot.";
  } else {
    os << "ICEWS14 not present, skipped.";
  }
  if (wiki) {
    TkgDataset ds = load_dataset(root + "/WIKI");
    DatasetStatistics st = compute_statistics(ds);
    if (!st.repetition_pct) return fail("WIKI repetition proportion unavailable");
    if (std::abs(*st.repetition_pct - 85.68) > 0.5)
      return fail("WIKI repetition proportion " + fmt(*st.repetition_pct) +
                  "% outside 85.68 +- 0.5");
    os << " WIKI: repetition proportion " << fmt(*st.repetition_pct) << "%.";
  } else {
    os << " WIKI not present, skipped.";
  }
  return pass(os.str());
}

Outcome c11_full_training() {
  std::string root = dataset_root();
  if (!has_dataset(root + "/ICEWS14"))
    return skip("no ICEWS14 under '" + root + "' (set TKGC_DATA_DIR to enable)");
  if (!std::getenv("TKGC_LONG_RUN"))
    return skip("extended experiment; set TKGC_LONG_RUN=1 to train the full model (hours)");

  TkgDataset ds = load_dataset(root + "/ICEWS14");
  add_inverses(ds);
  ds.snapshots = build_snapshots(ds);
  TrainConfig cfg;  // defaults
  Trainer<double> trainer(ds, cfg);
  trainer.fit();
  double mrr = trainer.evaluate(ds.test, "test").mrr;
  if (mrr < 0.46 || mrr > 0.50)
    return fail("full-data test MRR " + fmt(mrr) + " outside [0.46, 0.50]");
  return pass("full-data test MRR " + fmt(mrr));
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* label;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> criteria = {
      {1, "every differentiable op passes central-difference gradient checks", c1_gradient_ops},
      {2, "end-to-end loss gradient matches finite differences", c2_end_to_end_gradient},
      {3, "filtered ranking agrees with a sort-based oracle", c3_ranking_oracle},
      {4, "parameter counts match the documented formulas", c4_parameter_counts},
      {5, "training overfits the deterministic synthetic dataset", c5_overfit},
      {6, "attention weights form a valid per-coordinate mixture", c6_attention_invariants},
      {7, "two-phase propagation closes the single-phase leak", c7_leakage_regression},
      {8, "ablation flags match their instrumented equivalents", c8_ablation_consistency},
      {9, "same-seed training is bit-reproducible", c9_determinism},
      {10, "public dataset statistics match the documented values", c10_dataset_statistics},
      {11, "full-data training reaches the documented test MRR band", c11_full_training},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    int id = std::atoi(argv[i]);
    if (id < 1 || id > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion '" << argv[i] << "' (valid: 1.."
                << criteria.size() << ")\n";
      return 2;
    }
    selected.insert(id);
  }

  int passed = 0, failed = 0, skipped = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Outcome::Pass ? "[PASS]" : o.status == Outcome::Fail ? "[FAIL]" : "[SKIP]";
    std::cout << tag << " criterion " << c.id << ": " << c.label;
    if (!o.detail.empty()) std::cout << " -- " << o.detail;
    std::cout << "\n";
    (o.status == Outcome::Pass ? passed : o.status == Outcome::Fail ? failed : skipped)++;
  }

  std::cout << passed << " passed, " << failed << " failed, " << skipped << " skipped\n";
  if (failed > 0) return 1;
  if (passed == 0 && skipped > 0) return 77;
  return 0;
}
