#include "tkgc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include "json.hpp"

namespace tkgc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as native little-endian bytes");

namespace {

constexpr char kMagic[4] = {'T', 'K', 'G', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const char* p;
  const char* end;
  std::string path;

  void need(std::size_t n, const char* what) const {
    if (static_cast<std::size_t>(end - p) < n)
      throw IoError("checkpoint " + path + ": truncated while reading " + std::string(what));
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    p += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    p += 8;
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(p, n);
    p += n;
    return s;
  }
};

using Sections = std::map<std::string, std::string>;

Sections read_sections(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint " + path + ": cannot open for reading");
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{blob.data(), blob.data() + blob.size(), path};
  std::string magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw IoError("checkpoint " + path + ": bad magic bytes (not a checkpoint file)");
  std::uint32_t version = r.u32("format version");
  if (version != kVersion)
    throw IoError("checkpoint " + path + ": format version " + std::to_string(version) +
                  ", this build reads version " + std::to_string(kVersion));
  std::uint64_t count = r.u64("section count");
  Sections sections;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t name_len = r.u32("section name length");
    std::string name = r.bytes(name_len, "section name");
    std::uint64_t payload_len = r.u64("section payload length");
    std::string payload = r.bytes(payload_len, ("section " + name).c_str());
    if (!sections.emplace(std::move(name), std::move(payload)).second)
      throw IoError("checkpoint " + path + ": duplicate section");
  }
  if (r.p != r.end)
    throw IoError("checkpoint " + path + ": " + std::to_string(r.end - r.p) +
                  " trailing bytes after the last section");
  return sections;
}

void write_sections(const Sections& sections, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, sections.size());
  for (const auto& [name, payload] : sections) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u64(out, payload.size());
    out += payload;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint " + path + ": cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("checkpoint " + path + ": write failed");
}

template <typename T>
std::string tensor_payload(const Tensor<T>& t) {
  std::string out;
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape) put_u64(out, d);
  std::size_t bytes = t.numel() * sizeof(T);
  std::size_t at = out.size();
  out.resize(at + bytes);
  std::memcpy(out.data() + at, t.data.data(), bytes);
  return out;
}

template <typename T>
void fill_tensor(Tensor<T>& t, const std::string& payload, const std::string& name,
                 const std::string& path) {
  Reader r{payload.data(), payload.data() + payload.size(), path};
  std::uint32_t rank = r.u32("tensor rank");
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(r.u64("tensor dim"));
  if (shape != t.shape)
    throw IoError("checkpoint " + path + ": parameter " + name + " stored as " + shape_str(shape) +
                  ", model expects " + shape_str(t.shape));
  r.need(t.numel() * sizeof(T), "tensor data");
  std::memcpy(t.data.data(), r.p, t.numel() * sizeof(T));
  r.p += t.numel() * sizeof(T);
  if (r.p != r.end) throw IoError("checkpoint " + path + ": parameter " + name + " payload too long");
}

std::string doubles_payload(const std::vector<double>& v) {
  std::string out;
  put_u64(out, v.size());
  std::size_t at = out.size();
  out.resize(at + v.size() * sizeof(double));
  std::memcpy(out.data() + at, v.data(), v.size() * sizeof(double));
  return out;
}

std::vector<double> doubles_from(const std::string& payload, const std::string& name,
                                 const std::string& path) {
  Reader r{payload.data(), payload.data() + payload.size(), path};
  std::uint64_t n = r.u64("vector length");
  r.need(n * sizeof(double), name.c_str());
  std::vector<double> v(n);
  std::memcpy(v.data(), r.p, n * sizeof(double));
  r.p += n * sizeof(double);
  if (r.p != r.end) throw IoError("checkpoint " + path + ": section " + name + " payload too long");
  return v;
}

template <typename T>
constexpr const char* precision_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace

template <typename T>
void save_checkpoint(const Checkpoint<T>& ck, const std::string& path) {
  Sections sections;
  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(config_to_json(ck.params.config));
  meta["num_entities"] = ck.params.num_entities;
  meta["num_base_relations"] = ck.params.num_base_relations;
  meta["num_timestamps"] = ck.params.num_timestamps;
  meta["epoch"] = ck.epoch;
  meta["adam_step"] = ck.adam_step;
  meta["val_mrr_history"] = ck.val_mrr_history;
  sections["meta"] = meta.dump();

  // all() is non-const by signature; the tensors are only read here
  auto& params = const_cast<ModelParameters<T>&>(ck.params);
  for (auto& [name, tensor] : params.all()) sections["param/" + name] = tensor_payload(*tensor);
  for (const auto& [name, moments] : ck.adam_state) {
    sections["adam/m/" + name] = doubles_payload(moments.m);
    sections["adam/v/" + name] = doubles_payload(moments.v);
  }
  write_sections(sections, path);
}

namespace {

CheckpointInfo info_from_sections(const Sections& sections, const std::string& path) {
  auto it = sections.find("meta");
  if (it == sections.end()) throw IoError("checkpoint " + path + ": no metadata section");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(it->second);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path + ": metadata is not valid JSON: " + e.what());
  }
  CheckpointInfo info;
  try {
    apply_config_json(info.config, meta.at("config").dump());
    info.num_entities = meta.at("num_entities").get<std::int64_t>();
    info.num_base_relations = meta.at("num_base_relations").get<std::int64_t>();
    info.num_timestamps = meta.at("num_timestamps").get<std::int64_t>();
    info.epoch = meta.at("epoch").get<std::int64_t>();
    info.adam_step = meta.at("adam_step").get<std::int64_t>();
    info.val_mrr_history = meta.at("val_mrr_history").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path + ": malformed metadata: " + e.what());
  }
  return info;
}

}  // namespace

CheckpointInfo read_checkpoint_info(const std::string& path) {
  return info_from_sections(read_sections(path), path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  Sections sections = read_sections(path);
  CheckpointInfo info = info_from_sections(sections, path);
  if (info.config.precision != precision_name<T>())
    throw ConfigError("checkpoint " + path + ": stored precision " + info.config.precision +
                      ", loader instantiated for " + precision_name<T>());

  Checkpoint<T> ck;
  std::mt19937_64 scratch(0);  // shapes only; every value is overwritten below
  ck.params = ModelParameters<T>::init(info.config, info.num_entities, info.num_base_relations,
                                       info.num_timestamps, scratch);
  ck.epoch = info.epoch;
  ck.adam_step = info.adam_step;
  ck.val_mrr_history = info.val_mrr_history;

  std::size_t used = 1;  // meta
  for (auto& [name, tensor] : ck.params.all()) {
    auto it = sections.find("param/" + name);
    if (it == sections.end())
      throw IoError("checkpoint " + path + ": missing parameter section for " + name);
    fill_tensor(*tensor, it->second, name, path);
    ++used;

    auto m = sections.find("adam/m/" + name);
    auto v = sections.find("adam/v/" + name);
    if ((m == sections.end()) != (v == sections.end()))
      throw IoError("checkpoint " + path + ": optimizer state for " + name + " has m xor v");
    if (m != sections.end()) {
      typename AdamOptimizer<T>::Moments mo;
      mo.m = doubles_from(m->second, "adam/m/" + name, path);
      mo.v = doubles_from(v->second, "adam/v/" + name, path);
      if (mo.m.size() != tensor->numel() || mo.v.size() != tensor->numel())
        throw IoError("checkpoint " + path + ": optimizer state size mismatch for " + name);
      ck.adam_state[name] = std::move(mo);
      used += 2;
    }
  }
  if (used != sections.size())
    throw IoError("checkpoint " + path + ": " + std::to_string(sections.size() - used) +
                  " unrecognized sections");
  return ck;
}

template void save_checkpoint<float>(const Checkpoint<float>&, const std::string&);
template void save_checkpoint<double>(const Checkpoint<double>&, const std::string&);
template Checkpoint<float> load_checkpoint<float>(const std::string&);
template Checkpoint<double> load_checkpoint<double>(const std::string&);

}  // namespace tkgc
