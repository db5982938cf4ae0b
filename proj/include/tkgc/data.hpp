#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tkgc/error.hpp"

namespace tkgc {

/// Query subsets used by two-phase forward propagation. Combined exists to
/// demonstrate the leakage the two-phase split prevents.
enum class Phase { Original, Inverse, Combined };

struct Quadruplet {
  std::int64_t subject = 0;
  std::int64_t relation = 0;  // augmented ids occupy [R, 2R)
  std::int64_t object = 0;
  std::int64_t timestamp = 0;
  bool inverse = false;  // phase tag, set by add_inverses

  friend auto operator<=>(const Quadruplet&, const Quadruplet&) = default;
};

struct Edge {
  std::int64_t subject = 0;
  std::int64_t relation = 0;
  std::int64_t object = 0;
};

/// One timestamp's multi-relational graph. The neighbor index lists, for each
/// entity o, the (subject, relation) pairs of edges arriving at o, in a fixed
/// sorted order so aggregation is independent of input edge order.
struct Snapshot {
  std::int64_t timestamp = 0;
  std::vector<Edge> edges;
  std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> neighbors;

  bool empty() const { return edges.empty(); }
};

struct TkgDataset {
  std::int64_t num_entities = 0;
  std::int64_t num_base_relations = 0;
  std::int64_t snapshot_count = 0;
  std::vector<Quadruplet> train, valid, test;
  std::vector<Snapshot> snapshots;  // filled via build_snapshots
  std::int64_t raw_origin = 0;      // smallest raw timestamp in the files
  std::int64_t raw_interval = 1;    // raw units per snapshot index
  bool augmented = false;

  std::vector<Quadruplet> all_facts() const;
};

struct DatasetStatistics {
  std::int64_t num_entities = 0;
  std::int64_t num_relations = 0;
  std::int64_t num_facts = 0;
  std::int64_t num_snapshots = 0;
  std::int64_t train_facts = 0, valid_facts = 0, test_facts = 0;
  std::int64_t train_snapshots = 0, valid_snapshots = 0, test_snapshots = 0;
  double facts_per_snapshot = 0.0;
  std::optional<double> repetition_pct;  // absent when the test split is empty
};

/// Reads train.txt / valid.txt / test.txt (columns: subject relation object
/// timestamp; extra columns ignored) plus stat.txt ("E R"). Raw timestamps
/// are mapped to contiguous snapshot indices by dividing the offset from the
/// smallest timestamp by the interval; interval 0 means infer it as the GCD
/// of gaps between successive distinct raw timestamps.
TkgDataset load_dataset(const std::string& directory, std::int64_t interval_override = 0);

/// Appends (o, r+R, s, t) for every fact, tagged as the inverse phase.
void add_inverses(TkgDataset& ds);

/// Original-phase facts of a split, in their stored order.
std::vector<Quadruplet> originals_only(const std::vector<Quadruplet>& facts);

/// Per-timestamp graphs over the full augmented fact set, empty snapshots
/// included so indices stay aligned with timestamps.
std::vector<Snapshot> build_snapshots(const TkgDataset& ds);

/// Pre-augmentation counts and the repetition proportion: the percentage of
/// test facts also present verbatim at the immediately preceding timestamp
/// anywhere in the dataset.
DatasetStatistics compute_statistics(const TkgDataset& ds);

enum class SyntheticPattern {
  CyclicDeterministic,  // ring facts (e, e mod R, (e+1) mod E) at every timestamp
  UniformRandom,        // E facts per timestamp drawn iid
  LeakProbe             // disjoint subject/object pairings; only the inverse pairing is informative
};

SyntheticPattern parse_pattern(const std::string& name);
std::string pattern_name(SyntheticPattern p);

/// Deterministic synthetic dataset with a chronological 80/10/10 split.
TkgDataset generate_synthetic(std::uint64_t seed, std::int64_t num_entities,
                              std::int64_t num_relations, std::int64_t num_timestamps,
                              SyntheticPattern pattern);

/// Writes a dataset back out in the load_dataset file format.
void write_dataset(const TkgDataset& ds, const std::string& directory);

}  // namespace tkgc
