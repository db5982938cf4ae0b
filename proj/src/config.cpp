#include "tkgc/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tkgc {

using nlohmann::json;

namespace {

std::string normalize_ablation(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

const std::set<std::string> kAblations = {"dynamic", "relation_aware", "skip"};

}  // namespace

bool TrainConfig::ablated(const std::string& what) const {
  for (const auto& a : ablate)
    if (normalize_ablation(a) == what) return true;
  return false;
}

void TrainConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be >= 1, got " + std::to_string(dim));
  if (history_length < 1)
    throw ConfigError("history_length must be >= 1, got " + std::to_string(history_length));
  if (layers < 1) throw ConfigError("layers must be >= 1, got " + std::to_string(layers));
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("dropout must be in [0,1), got " + std::to_string(dropout));
  if (lr <= 0.0) throw ConfigError("lr must be positive, got " + std::to_string(lr));
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (patience < 1) throw ConfigError("patience must be >= 1, got " + std::to_string(patience));
  if (decoder != "convtranse" && decoder != "distmult")
    throw ConfigError("decoder must be convtranse or distmult, got '" + decoder + "'");
  if (composition != "sum" && composition != "mult")
    throw ConfigError("composition must be sum or mult, got '" + composition + "'");
  if (channels < 1) throw ConfigError("channels must be >= 1, got " + std::to_string(channels));
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ConfigError("kernel_size must be odd and >= 1 for same-length padding, got " +
                      std::to_string(kernel_size));
  if (precision != "f64" && precision != "f32")
    throw ConfigError("precision must be f64 or f32, got '" + precision + "'");
  if (attention_score != "vector" && attention_score != "scalar")
    throw ConfigError("attention_score must be vector or scalar, got '" + attention_score + "'");
  if (interval < 0) throw ConfigError("interval must be >= 0, got " + std::to_string(interval));
  for (const auto& a : ablate)
    if (!kAblations.count(normalize_ablation(a)))
      throw ConfigError("unknown ablation '" + a + "' (expected dynamic, relation-aware or skip)");
}

void apply_config_json(TrainConfig& cfg, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  auto get = [&](const char* key, auto& field) {
    using F = std::decay_t<decltype(field)>;
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<F>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  };

  static const std::set<std::string> known = {
      "dim",      "history_length", "layers",    "dropout",         "lr",
      "epochs",   "patience",       "seed",      "decoder",         "composition",
      "ablate",   "channels",       "kernel_size", "precision",     "attention_score",
      "two_phase", "bias",          "interval"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  get("dim", cfg.dim);
  get("history_length", cfg.history_length);
  get("layers", cfg.layers);
  get("dropout", cfg.dropout);
  get("lr", cfg.lr);
  get("epochs", cfg.epochs);
  get("patience", cfg.patience);
  get("seed", cfg.seed);
  get("decoder", cfg.decoder);
  get("composition", cfg.composition);
  get("ablate", cfg.ablate);
  get("channels", cfg.channels);
  get("kernel_size", cfg.kernel_size);
  get("precision", cfg.precision);
  get("attention_score", cfg.attention_score);
  get("two_phase", cfg.two_phase);
  get("bias", cfg.bias);
  get("interval", cfg.interval);
}

void apply_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_json(cfg, buf.str());
}

std::string config_to_json(const TrainConfig& cfg) {
  json j;  // nlohmann::json orders keys alphabetically -> canonical
  j["dim"] = cfg.dim;
  j["history_length"] = cfg.history_length;
  j["layers"] = cfg.layers;
  j["dropout"] = cfg.dropout;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["patience"] = cfg.patience;
  j["seed"] = cfg.seed;
  j["decoder"] = cfg.decoder;
  j["composition"] = cfg.composition;
  std::vector<std::string> ablate = cfg.ablate;
  for (auto& a : ablate) a = normalize_ablation(a);
  std::sort(ablate.begin(), ablate.end());
  j["ablate"] = ablate;
  j["channels"] = cfg.channels;
  j["kernel_size"] = cfg.kernel_size;
  j["precision"] = cfg.precision;
  j["attention_score"] = cfg.attention_score;
  j["two_phase"] = cfg.two_phase;
  j["bias"] = cfg.bias;
  j["interval"] = cfg.interval;
  return j.dump();
}

std::string config_digest(const TrainConfig& cfg) {
  std::string text = config_to_json(cfg);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  for (int shift = 60; shift >= 0; shift -= 4) os << ((h >> shift) & 0xF);
  return os.str();
}

}  // namespace tkgc
