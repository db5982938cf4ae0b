#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tkgc/adam.hpp"
#include "tkgc/config.hpp"
#include "tkgc/model.hpp"

namespace tkgc {

/// Everything needed to resume or evaluate a training run.
template <typename T>
struct Checkpoint {
  ModelParameters<T> params;
  std::map<std::string, typename AdamOptimizer<T>::Moments> adam_state;
  std::int64_t adam_step = 0;
  std::int64_t epoch = 0;  // epoch the parameters were taken from
  std::vector<double> val_mrr_history;
};

/// Header fields readable without committing to a scalar type; used to
/// dispatch on the stored precision and to cross-check dataset dimensions.
struct CheckpointInfo {
  TrainConfig config;
  std::int64_t num_entities = 0;
  std::int64_t num_base_relations = 0;
  std::int64_t num_timestamps = 0;
  std::int64_t epoch = 0;
  std::int64_t adam_step = 0;
  std::vector<double> val_mrr_history;
};

/// Single-file binary format: magic bytes, u32 format version, then named
/// little-endian sections (a JSON metadata section plus one section per
/// parameter tensor and optimizer moment vector). Round-trips bit-exactly.
template <typename T>
void save_checkpoint(const Checkpoint<T>& ck, const std::string& path);

CheckpointInfo read_checkpoint_info(const std::string& path);

/// Loads a checkpoint whose stored precision matches T (f32 = float,
/// f64 = double); mismatches, truncation, bad magic, unknown versions and
/// missing or malformed sections all raise IoError/ConfigError.
template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

}  // namespace tkgc
