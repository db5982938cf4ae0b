#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "tkgc/checkpoint.hpp"
#include "tkgc/train.hpp"

using nlohmann::json;
using namespace tkgc;

namespace {

struct CommonArgs {
  std::string data;
  std::string out;
  std::string config_file;
  std::vector<std::uint64_t> seeds;
  std::optional<std::int64_t> dim, history_length, layers, epochs, patience, channels, kernel_size,
      interval;
  std::optional<double> dropout, lr;
  std::optional<std::string> decoder, composition, precision, attention_score;
  std::optional<bool> two_phase, bias;
  std::vector<std::string> ablate;
};

// defaults < config file < explicit flags
TrainConfig resolve_config(const CommonArgs& a) {
  TrainConfig cfg;
  if (!a.config_file.empty()) apply_config_file(cfg, a.config_file);
  if (a.dim) cfg.dim = *a.dim;
  if (a.history_length) cfg.history_length = *a.history_length;
  if (a.layers) cfg.layers = *a.layers;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.patience) cfg.patience = *a.patience;
  if (a.channels) cfg.channels = *a.channels;
  if (a.kernel_size) cfg.kernel_size = *a.kernel_size;
  if (a.interval) cfg.interval = *a.interval;
  if (a.dropout) cfg.dropout = *a.dropout;
  if (a.lr) cfg.lr = *a.lr;
  if (a.decoder) cfg.decoder = *a.decoder;
  if (a.composition) cfg.composition = *a.composition;
  if (a.precision) cfg.precision = *a.precision;
  if (a.attention_score) cfg.attention_score = *a.attention_score;
  if (a.two_phase) cfg.two_phase = *a.two_phase;
  if (a.bias) cfg.bias = *a.bias;
  if (!a.ablate.empty()) cfg.ablate = a.ablate;
  if (!a.seeds.empty()) cfg.seed = a.seeds.front();
  cfg.validate();
  return cfg;
}

void add_config_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_file, "JSON config file (flag values override it)");
  cmd->add_option("--seed", a.seeds, "RNG seed; repeat the flag to run several seeds");
  cmd->add_option("--dim", a.dim, "embedding dimension");
  cmd->add_option("--history-length", a.history_length, "snapshots fed to the encoder");
  cmd->add_option("--layers", a.layers, "graph layers per snapshot");
  cmd->add_option("--dropout", a.dropout, "dropout rate in [0,1)");
  cmd->add_option("--lr", a.lr, "Adam learning rate");
  cmd->add_option("--epochs", a.epochs, "maximum training epochs");
  cmd->add_option("--patience", a.patience, "epochs without validation improvement before stopping");
  cmd->add_option("--decoder", a.decoder, "decoder kind")
      ->check(CLI::IsMember({"convtranse", "distmult"}));
  cmd->add_option("--composition", a.composition, "neighbor/relation composition")
      ->check(CLI::IsMember({"sum", "mult"}));
  cmd->add_option("--ablate", a.ablate, "disable a component; repeatable")
      ->check(CLI::IsMember({"dynamic", "relation-aware", "relation_aware", "skip"}));
  cmd->add_option("--precision", a.precision, "scalar type for parameters and math")
      ->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("--channels", a.channels, "decoder convolution channels");
  cmd->add_option("--kernel-size", a.kernel_size, "decoder kernel width (odd)");
  cmd->add_option("--attention-score", a.attention_score, "skip attention scoring variant")
      ->check(CLI::IsMember({"vector", "scalar"}));
  cmd->add_option("--interval", a.interval, "raw timestamp units per snapshot (0 = infer)");
  cmd->add_flag("--two-phase,!--single-phase", a.two_phase,
                "run original and inverse queries as separate forward passes");
  cmd->add_flag("--bias,!--no-bias", a.bias, "decoder bias terms");
}

void emit(const json& j, const std::string& out_path) {
  std::cout << j.dump(2) << "\n";
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + out_path);
    f << j.dump(2) << "\n";
  }
}

TkgDataset load_prepared(const std::string& dir, std::int64_t interval) {
  TkgDataset ds = load_dataset(dir, interval);
  add_inverses(ds);
  ds.snapshots = build_snapshots(ds);
  return ds;
}

json report_json(const EvaluationReport& rep, const std::string& digest) {
  return json{{"split", rep.split},         {"mrr", rep.mrr},
              {"hits1", rep.hits1},         {"hits3", rep.hits3},
              {"hits10", rep.hits10},       {"num_queries", rep.num_queries},
              {"config_digest", digest}};
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

int cmd_stats(const std::string& data, std::int64_t interval, const std::string& out) {
  TkgDataset ds = load_dataset(data, interval);
  DatasetStatistics st = compute_statistics(ds);
  json j{{"data", data},
         {"num_entities", st.num_entities},
         {"num_relations", st.num_relations},
         {"num_facts", st.num_facts},
         {"num_snapshots", st.num_snapshots},
         {"train_facts", st.train_facts},
         {"valid_facts", st.valid_facts},
         {"test_facts", st.test_facts},
         {"train_snapshots", st.train_snapshots},
         {"valid_snapshots", st.valid_snapshots},
         {"test_snapshots", st.test_snapshots},
         {"facts_per_snapshot", st.facts_per_snapshot}};
  if (st.repetition_pct)
    j["repetition_pct"] = *st.repetition_pct;
  else
    j["repetition_pct"] = nullptr;
  emit(j, out);
  return 0;
}

int cmd_synth(std::uint64_t seed, std::int64_t entities, std::int64_t relations,
              std::int64_t timestamps, const std::string& pattern, const std::string& out) {
  TkgDataset ds = generate_synthetic(seed, entities, relations, timestamps, parse_pattern(pattern));
  write_dataset(ds, out);
  DatasetStatistics st = compute_statistics(ds);
  emit(json{{"out", out},
            {"pattern", pattern},
            {"seed", seed},
            {"num_entities", st.num_entities},
            {"num_relations", st.num_relations},
            {"num_facts", st.num_facts},
            {"num_snapshots", st.num_snapshots}},
       "");
  return 0;
}

std::string seed_path(const std::string& out, std::uint64_t seed, bool multi) {
  if (!multi) return out;
  std::size_t dot = out.rfind('.');
  std::size_t slash = out.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return out + ".seed" + std::to_string(seed);
  return out.substr(0, dot) + ".seed" + std::to_string(seed) + out.substr(dot);
}

class LineLog {
 public:
  explicit LineLog(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw IoError("cannot write log file " + path);
    }
  }
  void event(const json& j) {
    std::cout << j.dump() << "\n";
    if (file_.is_open()) file_ << j.dump() << "\n";
  }

 private:
  std::ofstream file_;
};

template <typename T>
void train_one_seed(const TkgDataset& ds, TrainConfig cfg, const std::string& ckpt_path,
                    LineLog& log, std::vector<double>& best_mrrs) {
  Trainer<T> trainer(ds, cfg);
  auto report = trainer.params().count_report();
  log.event(json{{"event", "start"},
                 {"seed", cfg.seed},
                 {"config_digest", config_digest(cfg)},
                 {"ablate", cfg.ablate},
                 {"total_trainable", report.total_trainable},
                 {"parameter_report", report.to_string()}});
  Checkpoint<T> best = trainer.fit([&](const EpochLog& l) {
    log.event(json{{"event", "epoch"},
                   {"seed", cfg.seed},
                   {"epoch", l.epoch},
                   {"loss", l.loss},
                   {"val_mrr", l.val_mrr},
                   {"wall_ms", l.wall_ms}});
  });
  save_checkpoint(best, ckpt_path);
  double best_mrr = best.val_mrr_history.empty()
                        ? 0.0
                        : best.val_mrr_history[static_cast<std::size_t>(best.epoch) - 1];
  best_mrrs.push_back(best_mrr);
  log.event(json{{"event", "done"},
                 {"seed", cfg.seed},
                 {"best_epoch", best.epoch},
                 {"best_val_mrr", best_mrr},
                 {"epochs_run", best.val_mrr_history.size()},
                 {"checkpoint", ckpt_path}});
}

int cmd_train(const CommonArgs& args, const std::string& log_path) {
  TrainConfig cfg = resolve_config(args);  // validates before any data work
  if (args.data.empty()) throw ConfigError("train: --data is required");
  std::string out = args.out.empty() ? "tkgc.ckpt" : args.out;
  std::vector<std::uint64_t> seeds = args.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed}
                                                        : args.seeds;
  TkgDataset ds = load_prepared(args.data, cfg.interval);
  LineLog log(log_path);
  log.event(json{{"event", "config"},
                 {"config", json::parse(config_to_json(cfg))},
                 {"config_digest", config_digest(cfg)},
                 {"data", args.data},
                 {"seeds", seeds}});
  std::vector<double> best_mrrs;
  for (std::uint64_t seed : seeds) {
    cfg.seed = seed;
    std::string path = seed_path(out, seed, seeds.size() > 1);
    if (cfg.precision == "f32")
      train_one_seed<float>(ds, cfg, path, log, best_mrrs);
    else
      train_one_seed<double>(ds, cfg, path, log, best_mrrs);
  }
  if (seeds.size() > 1) {
    double mean = 0.0;
    for (double m : best_mrrs) mean += m;
    mean /= static_cast<double>(best_mrrs.size());
    log.event(json{{"event", "summary"},
                   {"seeds", seeds},
                   {"best_val_mrrs", best_mrrs},
                   {"mean_best_val_mrr", mean}});
  }
  return 0;
}

const std::vector<Quadruplet>& pick_split(const TkgDataset& ds, const std::string& split) {
  return split == "valid" ? ds.valid : ds.test;
}

void check_dims(const CheckpointInfo& info, const TkgDataset& ds, const std::string& ckpt) {
  if (info.num_entities != ds.num_entities || info.num_base_relations != ds.num_base_relations)
    throw DataError("checkpoint " + ckpt + " was trained on " + std::to_string(info.num_entities) +
                    " entities / " + std::to_string(info.num_base_relations) +
                    " relations; this dataset has " + std::to_string(ds.num_entities) + " / " +
                    std::to_string(ds.num_base_relations));
}

template <typename T>
EvaluationReport eval_checkpoint(const std::string& ckpt, const TkgDataset& ds,
                                 const std::string& split) {
  Checkpoint<T> ck = load_checkpoint<T>(ckpt);
  FilterMap filter = FilterMap::build(ds);
  return Trainer<T>::evaluate_split(ck.params, ds, filter, pick_split(ds, split), split);
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& split,
             const std::string& out) {
  CheckpointInfo info = read_checkpoint_info(ckpt);
  TkgDataset ds = load_prepared(data, info.config.interval);
  check_dims(info, ds, ckpt);
  EvaluationReport rep = info.config.precision == "f32" ? eval_checkpoint<float>(ckpt, ds, split)
                                                        : eval_checkpoint<double>(ckpt, ds, split);
  json j = report_json(rep, config_digest(info.config));
  j["checkpoint"] = ckpt;
  j["data"] = data;
  j["config"] = json::parse(config_to_json(info.config));
  emit(j, out);
  return 0;
}

template <typename T>
EvaluationReport eval_ensemble_t(const std::vector<std::string>& ckpts, const TkgDataset& ds,
                                 const std::string& split, const std::string& pooling, bool raw) {
  std::vector<Checkpoint<T>> loaded;
  loaded.reserve(ckpts.size());
  for (const auto& p : ckpts) loaded.push_back(load_checkpoint<T>(p));
  std::vector<const ModelParameters<T>*> models;
  for (const auto& ck : loaded) models.push_back(&ck.params);
  return evaluate_ensemble(models, ds, pick_split(ds, split), split, pooling, raw);
}

int cmd_ensemble(const std::vector<std::string>& ckpts, const std::string& data,
                 const std::string& split, const std::string& pooling, bool raw,
                 const std::string& out) {
  std::vector<CheckpointInfo> infos;
  for (const auto& p : ckpts) infos.push_back(read_checkpoint_info(p));
  for (const auto& info : infos)
    if (info.config.precision != infos.front().config.precision)
      throw ConfigError("ensemble: checkpoints mix f32 and f64 precisions");
  TkgDataset ds = load_prepared(data, infos.front().config.interval);
  for (std::size_t i = 0; i < ckpts.size(); ++i) check_dims(infos[i], ds, ckpts[i]);

  EvaluationReport rep = infos.front().config.precision == "f32"
                             ? eval_ensemble_t<float>(ckpts, ds, split, pooling, raw)
                             : eval_ensemble_t<double>(ckpts, ds, split, pooling, raw);

  std::string combined = pooling + (raw ? "|raw" : "|softmax");
  json models = json::array();
  for (std::size_t i = 0; i < ckpts.size(); ++i) {
    std::string digest = config_digest(infos[i].config);
    combined += "|" + digest;
    models.push_back(json{{"checkpoint", ckpts[i]},
                          {"config_digest", digest},
                          {"history_length", infos[i].config.history_length}});
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(combined)));
  json j = report_json(rep, buf);
  j["pooling"] = pooling;
  j["raw_scores"] = raw;
  j["models"] = models;
  emit(j, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal knowledge graph completion: train, evaluate and analyze"};
  app.require_subcommand(1);

  auto* stats = app.add_subcommand("stats", "dataset statistics as JSON");
  std::string stats_data, stats_out;
  std::int64_t stats_interval = 0;
  stats->add_option("--data", stats_data, "dataset directory")->required();
  stats->add_option("--interval", stats_interval, "raw timestamp units per snapshot (0 = infer)");
  stats->add_option("--out", stats_out, "also write the JSON here");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::uint64_t synth_seed = 1;
  std::int64_t synth_e = 20, synth_r = 4, synth_t = 30;
  std::string synth_pattern = "cyclic-deterministic", synth_out;
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--entities", synth_e, "entity count");
  synth->add_option("--relations", synth_r, "relation count");
  synth->add_option("--timestamps", synth_t, "snapshot count");
  synth->add_option("--pattern", synth_pattern, "fact pattern")
      ->check(CLI::IsMember({"cyclic-deterministic", "uniform-random", "leak-probe"}));
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "fit a model with early stopping");
  CommonArgs train_args;
  std::string train_log;
  train->add_option("--data", train_args.data, "dataset directory")->required();
  train->add_option("--out", train_args.out, "checkpoint path (default tkgc.ckpt)");
  train->add_option("--log", train_log, "also append line-JSON events here");
  add_config_flags(train, train_args);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split, "split to evaluate")
      ->check(CLI::IsMember({"valid", "test"}));
  eval->add_option("--out", eval_out, "also write the report here");

  auto* ens = app.add_subcommand("ensemble", "pool several checkpoints' scores");
  std::vector<std::string> ens_ckpts;
  std::string ens_data, ens_split = "test", ens_pooling = "avg", ens_out;
  bool ens_raw = false;
  ens->add_option("--checkpoint", ens_ckpts, "checkpoint file; repeatable")->required();
  ens->add_option("--data", ens_data, "dataset directory")->required();
  ens->add_option("--split", ens_split, "split to evaluate")
      ->check(CLI::IsMember({"valid", "test"}));
  ens->add_option("--pooling", ens_pooling, "score pooling")
      ->check(CLI::IsMember({"avg", "max", "min"}));
  ens->add_flag("--raw", ens_raw, "pool raw scores instead of softmax-normalized ones");
  ens->add_option("--out", ens_out, "also write the report here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*stats) return cmd_stats(stats_data, stats_interval, stats_out);
    if (*synth)
      return cmd_synth(synth_seed, synth_e, synth_r, synth_t, synth_pattern, synth_out);
    if (*train) return cmd_train(train_args, train_log);
    if (*eval) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_out);
    if (*ens) return cmd_ensemble(ens_ckpts, ens_data, ens_split, ens_pooling, ens_raw, ens_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
