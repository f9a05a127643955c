#pragma once

// Checkpoint layout (all integers little-endian):
//   bytes 0-3   "AMCK"
//   bytes 4-7   format version, u32
//   bytes 8-15  header length L, u64
//   L bytes     UTF-8 JSON {config, tensors:[{name,dtype,shape,offset,len}]}
//   payload     raw little-endian values; offsets are relative to its start
// Tensors are packed in store order with no gaps.

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "amisr/arch_config.hpp"
#include "amisr/params.hpp"

namespace amisr {

inline constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
std::vector<uint8_t> encode_store(const ParamStore<T>& store, const nlohmann::json& config);

// Throws FormatError on bad magic, version, truncation or an inconsistent
// tensor table, and when the stored dtype is not T.
template <typename T>
ParamStore<T> decode_store(const std::vector<uint8_t>& bytes, nlohmann::json* config = nullptr);

// Parses only the header and returns it.
nlohmann::json decode_header(const std::vector<uint8_t>& bytes);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& store, const ArchConfig& cfg);

template <typename T>
struct Checkpoint {
  ArchConfig config;
  ParamStore<T> params;
};

// The stored config's dtype must be T; the parameter set must match the
// layout the config declares.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

// Config of a checkpoint file without decoding the payload.
ArchConfig peek_checkpoint_config(const std::filesystem::path& path);

}  // namespace amisr
