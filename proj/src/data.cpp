#include "tkgc/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

namespace tkgc {

std::vector<Quadruplet> TkgDataset::all_facts() const {
  std::vector<Quadruplet> out;
  out.reserve(train.size() + valid.size() + test.size());
  out.insert(out.end(), train.begin(), train.end());
  out.insert(out.end(), valid.begin(), valid.end());
  out.insert(out.end(), test.begin(), test.end());
  return out;
}

namespace {

struct RawFact {
  std::int64_t s, r, o, t;
  std::size_t line;
};

std::vector<RawFact> read_fact_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<RawFact> facts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(line);
    RawFact f;
    f.line = lineno;
    if (!(ls >> f.s >> f.r >> f.o >> f.t))
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected at least 4 integer columns");
    facts.push_back(f);
  }
  return facts;
}

void check_ids(const std::vector<RawFact>& facts, const std::string& path, std::int64_t E,
               std::int64_t R) {
  for (const RawFact& f : facts) {
    auto where = [&] { return path + ":" + std::to_string(f.line) + ": "; };
    if (f.s < 0 || f.s >= E)
      throw DataError(where() + "entity id " + std::to_string(f.s) + " out of range [0, " +
                      std::to_string(E) + ")");
    if (f.o < 0 || f.o >= E)
      throw DataError(where() + "entity id " + std::to_string(f.o) + " out of range [0, " +
                      std::to_string(E) + ")");
    if (f.r < 0 || f.r >= R)
      throw DataError(where() + "relation id " + std::to_string(f.r) + " out of range [0, " +
                      std::to_string(R) + ")");
    if (f.t < 0) throw DataError(where() + "negative timestamp " + std::to_string(f.t));
  }
}

std::int64_t ts_min(const std::vector<Quadruplet>& v) {
  std::int64_t m = v.front().timestamp;
  for (const auto& q : v) m = std::min(m, q.timestamp);
  return m;
}
std::int64_t ts_max(const std::vector<Quadruplet>& v) {
  std::int64_t m = v.front().timestamp;
  for (const auto& q : v) m = std::max(m, q.timestamp);
  return m;
}

std::int64_t count_distinct_ts(const std::vector<Quadruplet>& v) {
  std::set<std::int64_t> ts;
  for (const auto& q : v) ts.insert(q.timestamp);
  return static_cast<std::int64_t>(ts.size());
}

}  // namespace

TkgDataset load_dataset(const std::string& directory, std::int64_t interval_override) {
  namespace fs = std::filesystem;
  std::string stat_path = (fs::path(directory) / "stat.txt").string();
  std::ifstream stat(stat_path);
  if (!stat) throw IoError("cannot open " + stat_path);
  std::int64_t E = 0, R = 0;
  if (!(stat >> E >> R)) throw DataError(stat_path + ": expected two integers (entities, relations)");
  if (E <= 0 || R <= 0)
    throw DataError(stat_path + ": nonpositive counts " + std::to_string(E) + " " + std::to_string(R));

  const char* names[3] = {"train.txt", "valid.txt", "test.txt"};
  std::vector<RawFact> raw[3];
  for (int i = 0; i < 3; ++i) {
    std::string path = (fs::path(directory) / names[i]).string();
    raw[i] = read_fact_file(path);
    check_ids(raw[i], path, E, R);
  }
  if (raw[0].empty()) throw DataError(directory + ": train split is empty");

  // Normalize raw timestamps to contiguous snapshot indices.
  std::set<std::int64_t> distinct;
  for (const auto& split : raw)
    for (const auto& f : split) distinct.insert(f.t);
  std::int64_t origin = *distinct.begin();
  std::int64_t interval = interval_override;
  if (interval <= 0) {
    interval = 0;
    std::int64_t prev = origin;
    for (auto it = std::next(distinct.begin()); it != distinct.end(); ++it) {
      interval = std::gcd(interval, *it - prev);
      prev = *it;
    }
    if (interval == 0) interval = 1;  // single distinct timestamp
  }

  TkgDataset ds;
  ds.num_entities = E;
  ds.num_base_relations = R;
  ds.raw_origin = origin;
  ds.raw_interval = interval;
  std::vector<Quadruplet>* splits[3] = {&ds.train, &ds.valid, &ds.test};
  for (int i = 0; i < 3; ++i) {
    splits[i]->reserve(raw[i].size());
    for (const auto& f : raw[i]) {
      std::int64_t off = f.t - origin;
      if (off % interval != 0)
        throw DataError(std::string(names[i]) + ": timestamp " + std::to_string(f.t) +
                        " is not a multiple of interval " + std::to_string(interval) +
                        " from origin " + std::to_string(origin));
      splits[i]->push_back({f.s, f.r, f.o, off / interval, false});
    }
  }
  std::int64_t max_index = 0;
  for (auto* split : splits)
    for (const auto& q : *split) max_index = std::max(max_index, q.timestamp);
  ds.snapshot_count = max_index + 1;

  // Chronological split boundaries.
  if (!ds.valid.empty() && ts_max(ds.train) >= ts_min(ds.valid))
    throw DataError(directory + ": train timestamps overlap valid (max train " +
                    std::to_string(ts_max(ds.train)) + " >= min valid " +
                    std::to_string(ts_min(ds.valid)) + ")");
  if (!ds.test.empty()) {
    std::int64_t before = ds.valid.empty() ? ts_max(ds.train) : ts_max(ds.valid);
    if (before >= ts_min(ds.test))
      throw DataError(directory + ": earlier splits overlap test (max " + std::to_string(before) +
                      " >= min test " + std::to_string(ts_min(ds.test)) + ")");
  }
  return ds;
}

void add_inverses(TkgDataset& ds) {
  if (ds.augmented) throw DataError("dataset is already augmented with inverse facts");
  std::int64_t R = ds.num_base_relations;
  for (auto* split : {&ds.train, &ds.valid, &ds.test}) {
    std::size_t n = split->size();
    split->reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const Quadruplet& q = (*split)[i];
      split->push_back({q.object, q.relation + R, q.subject, q.timestamp, true});
    }
  }
  ds.augmented = true;
}

std::vector<Quadruplet> originals_only(const std::vector<Quadruplet>& facts) {
  std::vector<Quadruplet> out;
  for (const auto& q : facts)
    if (!q.inverse) out.push_back(q);
  return out;
}

std::vector<Snapshot> build_snapshots(const TkgDataset& ds) {
  if (!ds.augmented) throw DataError("build_snapshots requires an augmented dataset");
  std::vector<Snapshot> snaps(ds.snapshot_count);
  for (std::int64_t t = 0; t < ds.snapshot_count; ++t) snaps[t].timestamp = t;
  for (const auto& q : ds.all_facts())
    snaps[q.timestamp].edges.push_back({q.subject, q.relation, q.object});
  for (auto& snap : snaps) {
    // Canonical edge order keeps aggregation independent of file order.
    std::sort(snap.edges.begin(), snap.edges.end(), [](const Edge& a, const Edge& b) {
      return std::tie(a.object, a.subject, a.relation) < std::tie(b.object, b.subject, b.relation);
    });
    snap.neighbors.assign(ds.num_entities, {});
    for (const auto& e : snap.edges) snap.neighbors[e.object].push_back({e.subject, e.relation});
  }
  return snaps;
}

DatasetStatistics compute_statistics(const TkgDataset& ds) {
  std::vector<Quadruplet> train = originals_only(ds.train);
  std::vector<Quadruplet> valid = originals_only(ds.valid);
  std::vector<Quadruplet> test = originals_only(ds.test);

  DatasetStatistics st;
  st.num_entities = ds.num_entities;
  st.num_relations = ds.num_base_relations;
  st.train_facts = static_cast<std::int64_t>(train.size());
  st.valid_facts = static_cast<std::int64_t>(valid.size());
  st.test_facts = static_cast<std::int64_t>(test.size());
  st.num_facts = st.train_facts + st.valid_facts + st.test_facts;
  st.num_snapshots = ds.snapshot_count;
  st.train_snapshots = count_distinct_ts(train);
  st.valid_snapshots = count_distinct_ts(valid);
  st.test_snapshots = count_distinct_ts(test);
  st.facts_per_snapshot =
      ds.snapshot_count > 0 ? static_cast<double>(st.num_facts) / ds.snapshot_count : 0.0;

  if (!test.empty()) {
    std::set<std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t>> present;
    for (const auto* split : {&train, &valid, &test})
      for (const auto& q : *split) present.insert({q.subject, q.relation, q.object, q.timestamp});
    std::int64_t hits = 0;
    for (const auto& q : test)
      if (present.count({q.subject, q.relation, q.object, q.timestamp - 1})) ++hits;
    st.repetition_pct = 100.0 * static_cast<double>(hits) / static_cast<double>(test.size());
  }
  return st;
}

SyntheticPattern parse_pattern(const std::string& name) {
  if (name == "cyclic-deterministic") return SyntheticPattern::CyclicDeterministic;
  if (name == "uniform-random") return SyntheticPattern::UniformRandom;
  if (name == "leak-probe") return SyntheticPattern::LeakProbe;
  throw ConfigError("unknown synthetic pattern '" + name +
                    "' (expected cyclic-deterministic, uniform-random or leak-probe)");
}

std::string pattern_name(SyntheticPattern p) {
  switch (p) {
    case SyntheticPattern::CyclicDeterministic: return "cyclic-deterministic";
    case SyntheticPattern::UniformRandom: return "uniform-random";
    case SyntheticPattern::LeakProbe: return "leak-probe";
  }
  return "?";
}

TkgDataset generate_synthetic(std::uint64_t seed, std::int64_t num_entities,
                              std::int64_t num_relations, std::int64_t num_timestamps,
                              SyntheticPattern pattern) {
  if (num_entities < 2)
    throw DataError("synthetic dataset needs at least 2 entities, got " +
                    std::to_string(num_entities));
  if (num_relations < 1 || num_timestamps < 1)
    throw DataError("synthetic dataset needs positive relation and timestamp counts");

  std::mt19937_64 rng(seed);
  std::vector<Quadruplet> facts;
  for (std::int64_t t = 0; t < num_timestamps; ++t) {
    switch (pattern) {
      case SyntheticPattern::CyclicDeterministic:
        // A fixed ring: entity e relates to its successor at every timestamp,
        // so the future always repeats the observable past.
        for (std::int64_t e = 0; e < num_entities; ++e)
          facts.push_back({e, e % num_relations, (e + 1) % num_entities, t, false});
        break;
      case SyntheticPattern::UniformRandom: {
        std::uniform_int_distribution<std::int64_t> ent(0, num_entities - 1);
        std::uniform_int_distribution<std::int64_t> rel(0, num_relations - 1);
        for (std::int64_t i = 0; i < num_entities; ++i)
          facts.push_back({ent(rng), rel(rng), ent(rng), t, false});
        break;
      }
      case SyntheticPattern::LeakProbe: {
        // Subjects and objects drawn from disjoint halves, every subject,
        // relation and object distinct within the timestamp. Pairings are
        // re-randomized each timestamp, so history carries no signal about
        // who pairs with whom at query time.
        std::int64_t half = num_entities / 2;
        std::int64_t k = std::min(num_relations, half);
        std::vector<std::int64_t> subs(half), objs(num_entities - half), rels(num_relations);
        for (std::int64_t i = 0; i < half; ++i) subs[i] = i;
        for (std::int64_t i = 0; i < num_entities - half; ++i) objs[i] = half + i;
        for (std::int64_t i = 0; i < num_relations; ++i) rels[i] = i;
        std::shuffle(subs.begin(), subs.end(), rng);
        std::shuffle(objs.begin(), objs.end(), rng);
        std::shuffle(rels.begin(), rels.end(), rng);
        for (std::int64_t i = 0; i < k; ++i)
          facts.push_back({subs[i], rels[i], objs[i], t, false});
        break;
      }
    }
  }

  TkgDataset ds;
  ds.num_entities = num_entities;
  ds.num_base_relations = num_relations;
  ds.snapshot_count = num_timestamps;
  std::int64_t train_end = num_timestamps * 8 / 10;
  std::int64_t valid_end = num_timestamps * 9 / 10;
  for (const auto& q : facts) {
    if (q.timestamp < train_end) ds.train.push_back(q);
    else if (q.timestamp < valid_end) ds.valid.push_back(q);
    else ds.test.push_back(q);
  }
  return ds;
}

void write_dataset(const TkgDataset& ds, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  auto write_split = [&](const char* name, const std::vector<Quadruplet>& facts) {
    std::string path = (fs::path(directory) / name).string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& q : facts) {
      if (q.inverse) continue;  // files store the original facts only
      out << q.subject << '\t' << q.relation << '\t' << q.object << '\t'
          << q.timestamp * ds.raw_interval + ds.raw_origin << '\n';
    }
  };
  write_split("train.txt", ds.train);
  write_split("valid.txt", ds.valid);
  write_split("test.txt", ds.test);
  std::string stat_path = (fs::path(directory) / "stat.txt").string();
  std::ofstream stat(stat_path);
  if (!stat) throw IoError("cannot write " + stat_path);
  stat << ds.num_entities << '\t' << ds.num_base_relations << '\n';
}

}  // namespace tkgc
