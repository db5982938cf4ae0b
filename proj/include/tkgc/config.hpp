#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tkgc/error.hpp"

namespace tkgc {

/// Flat training configuration. JSON config files use exactly these field
/// names; command-line flags are the kebab-case spelling of the same keys.
struct TrainConfig {
  std::int64_t dim = 200;
  std::int64_t history_length = 3;
  std::int64_t layers = 2;
  double dropout = 0.2;
  double lr = 1e-3;
  std::int64_t epochs = 30;
  std::int64_t patience = 5;
  std::uint64_t seed = 1;
  std::string decoder = "convtranse";      // convtranse | distmult
  std::string composition = "sum";         // sum | mult
  std::vector<std::string> ablate;         // subset of {dynamic, relation_aware, skip}
  std::int64_t channels = 50;
  std::int64_t kernel_size = 3;            // odd, for same-length padding
  std::string precision = "f64";           // f64 | f32
  std::string attention_score = "vector";  // vector (default) | scalar variant
  bool two_phase = true;                   // false = single combined phase (leak demo)
  bool bias = true;                        // conv/fc biases in the decoder
  std::int64_t interval = 0;               // raw timestamp units per snapshot; 0 = infer

  bool ablated(const std::string& what) const;
  void validate() const;  // throws ConfigError
};

/// Parses a JSON object and applies its values over `cfg`. Unknown keys and
/// wrong value types are ConfigErrors naming the key.
void apply_config_json(TrainConfig& cfg, const std::string& json_text);

/// Reads a JSON config file and applies it over `cfg`.
void apply_config_file(TrainConfig& cfg, const std::string& path);

/// Canonical JSON rendering (sorted keys) of the full configuration.
std::string config_to_json(const TrainConfig& cfg);

/// FNV-1a 64-bit hex digest of the canonical JSON; identifies a configuration
/// in reports and logs.
std::string config_digest(const TrainConfig& cfg);

}  // namespace tkgc
