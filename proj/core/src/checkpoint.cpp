#include "amisr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "amisr/errors.hpp"
#include "amisr/network.hpp"

namespace amisr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'M', 'C', 'K'};
constexpr size_t kPreamble = 16;

void put_le(std::vector<uint8_t>& out, uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint64_t get_le(const uint8_t* p, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

struct Parsed {
  nlohmann::json header;
  size_t payload_begin = 0;
};

Parsed parse(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < kPreamble) throw FormatError("checkpoint: file too short for the preamble");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic (expected AMCK)");
  const uint64_t version = get_le(bytes.data() + 4, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const uint64_t len = get_le(bytes.data() + 8, 8);
  if (len > bytes.size() - kPreamble) throw FormatError("checkpoint: header length exceeds file size");
  Parsed p;
  try {
    p.header = nlohmann::json::parse(bytes.begin() + kPreamble, bytes.begin() + static_cast<std::ptrdiff_t>(kPreamble + len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (!p.header.is_object() || !p.header.contains("tensors") || !p.header["tensors"].is_array() ||
      !p.header.contains("config")) {
    throw FormatError("checkpoint: header lacks config or tensor table");
  }
  p.payload_begin = kPreamble + len;
  return p;
}

}  // namespace

template <typename T>
std::vector<uint8_t> encode_store(const ParamStore<T>& store, const nlohmann::json& config) {
  nlohmann::json table = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& e : store.entries()) {
    const Shape& s = e.value.shape();
    const uint64_t len = static_cast<uint64_t>(s.numel()) * sizeof(T);
    table.push_back({{"name", e.name},
                     {"dtype", to_string(dtype_of<T>())},
                     {"shape", {s.n(), s.c(), s.h(), s.w()}},
                     {"offset", offset},
                     {"len", len}});
    offset += len;
  }
  const std::string header = nlohmann::json{{"config", config}, {"tensors", table}}.dump();

  std::vector<uint8_t> out(kMagic, kMagic + 4);
  put_le(out, kCheckpointVersion, 4);
  put_le(out, header.size(), 8);
  out.insert(out.end(), header.begin(), header.end());
  out.reserve(out.size() + offset);
  for (const auto& e : store.entries()) {
    const auto* p = reinterpret_cast<const uint8_t*>(e.value.ptr());
    out.insert(out.end(), p, p + e.value.numel() * static_cast<int64_t>(sizeof(T)));
  }
  return out;
}

template <typename T>
ParamStore<T> decode_store(const std::vector<uint8_t>& bytes, nlohmann::json* config) {
  const Parsed p = parse(bytes);
  const uint64_t payload = bytes.size() - p.payload_begin;
  ParamStore<T> store;
  uint64_t expected_offset = 0;
  try {
    for (const auto& t : p.header["tensors"]) {
      const std::string name = t.at("name").get<std::string>();
      const std::string dtype = t.at("dtype").get<std::string>();
      if (dtype != to_string(dtype_of<T>())) {
        throw FormatError("checkpoint: tensor '" + name + "' is " + dtype + " but " +
                          to_string(dtype_of<T>()) + " was requested");
      }
      const auto dims = t.at("shape").get<std::vector<int64_t>>();
      if (dims.size() != 4) throw FormatError("checkpoint: tensor '" + name + "' is not rank 4");
      for (int64_t d : dims) {
        if (d < 0) throw FormatError("checkpoint: tensor '" + name + "' has a negative extent");
      }
      const Shape shape(dims[0], dims[1], dims[2], dims[3]);
      const uint64_t offset = t.at("offset").get<uint64_t>();
      const uint64_t len = t.at("len").get<uint64_t>();
      if (len != static_cast<uint64_t>(shape.numel()) * sizeof(T)) {
        throw FormatError("checkpoint: tensor '" + name + "' length does not match its shape");
      }
      if (offset != expected_offset) throw FormatError("checkpoint: tensor '" + name + "' offset is out of order");
      if (offset + len > payload) throw FormatError("checkpoint: payload truncated at tensor '" + name + "'");
      Tensor<T> value(shape);
      std::memcpy(value.mutable_ptr(), bytes.data() + p.payload_begin + offset, len);
      store.add(name, std::move(value));
      expected_offset = offset + len;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed tensor table: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  if (expected_offset != payload) throw FormatError("checkpoint: trailing bytes after the last tensor");
  if (config) *config = p.header["config"];
  return store;
}

nlohmann::json decode_header(const std::vector<uint8_t>& bytes) { return parse(bytes).header; }

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& store, const ArchConfig& cfg) {
  if (cfg.dtype != dtype_of<T>()) throw ConfigError("checkpoint: store dtype differs from config dtype");
  write_file_bytes(path, encode_store(store, to_json(cfg)));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const ArchConfig cfg = arch_from_json(decode_header(bytes).at("config"));
  if (cfg.dtype != dtype_of<T>()) {
    throw FormatError("checkpoint '" + path.string() + "' holds " + to_string(cfg.dtype) + " parameters, not " +
                      to_string(dtype_of<T>()));
  }
  Checkpoint<T> ck{cfg, decode_store<T>(bytes)};
  const ParamSpecs specs = declare_network(cfg);
  if (specs.size() != ck.params.size()) throw FormatError("checkpoint: parameter count does not match its config");
  for (size_t i = 0; i < specs.size(); ++i) {
    const auto& e = ck.params.entries()[i];
    if (e.name != specs[i].name || e.value.shape() != specs[i].shape) {
      throw FormatError("checkpoint: parameter '" + e.name + "' does not match the layout of its config");
    }
  }
  return ck;
}

ArchConfig peek_checkpoint_config(const std::filesystem::path& path) {
  return arch_from_json(decode_header(read_file_bytes(path)).at("config"));
}

template std::vector<uint8_t> encode_store(const ParamStore<float>&, const nlohmann::json&);
template std::vector<uint8_t> encode_store(const ParamStore<double>&, const nlohmann::json&);
template ParamStore<float> decode_store(const std::vector<uint8_t>&, nlohmann::json*);
template ParamStore<double> decode_store(const std::vector<uint8_t>&, nlohmann::json*);
template void save_checkpoint(const std::filesystem::path&, const ParamStore<float>&, const ArchConfig&);
template void save_checkpoint(const std::filesystem::path&, const ParamStore<double>&, const ArchConfig&);
template Checkpoint<float> load_checkpoint(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint(const std::filesystem::path&);

}  // namespace amisr
