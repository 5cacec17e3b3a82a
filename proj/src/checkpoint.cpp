#include "scogait/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"

#include "scogait/errors.hpp"

namespace scogait {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'O', 'G', 'A', 'I', 'T', '1'};

using nlohmann::json;

template <typename T>
const char* dtype_name();
template <>
const char* dtype_name<float>() { return "float32"; }
template <>
const char* dtype_name<double>() { return "float64"; }

json config_json(const ModelConfig& c) {
  return {{"in_h", c.in_h},
          {"in_w", c.in_w},
          {"channels", c.channels},
          {"strides", c.strides},
          {"blocks_per_stage", c.blocks_per_stage},
          {"parts", c.parts},
          {"embed_dim", c.embed_dim},
          {"n_classes", c.n_classes},
          {"variant", to_string(c.variant)},
          {"temporal_pooling", to_string(c.temporal_pooling)}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.in_h = j.at("in_h");
  c.in_w = j.at("in_w");
  c.channels = j.at("channels").get<std::vector<int>>();
  c.strides = j.at("strides").get<std::vector<int>>();
  c.blocks_per_stage = j.at("blocks_per_stage");
  c.parts = j.at("parts");
  c.embed_dim = j.at("embed_dim");
  c.n_classes = j.at("n_classes");
  c.variant = parse_variant(j.at("variant"));
  c.temporal_pooling = parse_temporal_pooling(j.at("temporal_pooling"));
  return c;
}

struct Parsed {
  json header;
  std::string payload;
};

Parsed read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + file.string());
  char magic[8];
  std::uint64_t len = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw CheckpointError("not a checkpoint file: " + file.string());
  }
  unsigned char lenbuf[8];
  if (!in.read(reinterpret_cast<char*>(lenbuf), 8)) throw CheckpointError("truncated checkpoint");
  for (int i = 7; i >= 0; --i) len = (len << 8) | lenbuf[i];
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len))) {
    throw CheckpointError("truncated checkpoint header");
  }
  Parsed p;
  try {
    p.header = json::parse(header);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  p.payload.assign(std::istreambuf_iterator<char>(in), {});
  return p;
}

CheckpointMeta meta_from(const json& h) {
  try {
    CheckpointMeta m;
    m.config = config_from(h.at("config"));
    m.iteration = h.at("iteration");
    m.dtype = h.at("dtype");
    return m;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
}

}  // namespace

template <typename T>
void save_checkpoint(ScoNet<T>& model, long iteration, const std::filesystem::path& file) {
  std::vector<std::pair<std::string, const Tensor<T>*>> tensors;
  auto refs = model.refs();
  for (auto* p : refs.params) tensors.emplace_back(p->name, &p->value);
  for (auto& b : refs.buffers) tensors.emplace_back(b.name, b.tensor);

  json table = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    table.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
    offset += t->size() * sizeof(T);
  }
  const json header = {{"config", config_json(model.config())},
                       {"iteration", iteration},
                       {"dtype", dtype_name<T>()},
                       {"tensors", table}};
  const std::string text = header.dump();

  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + file.string());
  out.write(kMagic, 8);
  unsigned char lenbuf[8];
  std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<unsigned char>(len >> (8 * i));
  out.write(reinterpret_cast<const char*>(lenbuf), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors) {
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(T)));
  }
  if (!out) throw IoError("failed writing checkpoint " + file.string());
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& file) {
  return meta_from(read_file(file).header);
}

template <typename T>
ScoNet<T> load_checkpoint(const std::filesystem::path& file, long* iteration) {
  const Parsed p = read_file(file);
  const CheckpointMeta meta = meta_from(p.header);
  if (meta.dtype != dtype_name<T>()) {
    throw CheckpointError("checkpoint holds " + meta.dtype + ", expected " + dtype_name<T>());
  }
  meta.config.validate();
  ScoNet<T> model(meta.config);

  std::map<std::string, Tensor<T>*> slots;
  auto refs = model.refs();
  for (auto* prm : refs.params) slots[prm->name] = &prm->value;
  for (auto& b : refs.buffers) slots[b.name] = b.tensor;

  std::size_t filled = 0;
  for (const auto& entry : p.header.at("tensors")) {
    const std::string name = entry.at("name");
    const auto it = slots.find(name);
    if (it == slots.end()) throw CheckpointError("unexpected tensor '" + name + "' in checkpoint");
    Tensor<T>& dst = *it->second;
    if (entry.at("shape").get<std::vector<int>>() != dst.shape()) {
      throw CheckpointError("shape mismatch for '" + name + "'");
    }
    const std::uint64_t off = entry.at("offset");
    const std::size_t bytes = dst.size() * sizeof(T);
    if (off + bytes > p.payload.size()) throw CheckpointError("truncated tensor data for '" + name + "'");
    std::memcpy(dst.data(), p.payload.data() + off, bytes);
    ++filled;
  }
  if (filled != slots.size()) throw CheckpointError("checkpoint is missing tensors");
  if (iteration) *iteration = meta.iteration;
  return model;
}

template void save_checkpoint(ScoNet<float>&, long, const std::filesystem::path&);
template void save_checkpoint(ScoNet<double>&, long, const std::filesystem::path&);
template ScoNet<float> load_checkpoint(const std::filesystem::path&, long*);
template ScoNet<double> load_checkpoint(const std::filesystem::path&, long*);

}  // namespace scogait
