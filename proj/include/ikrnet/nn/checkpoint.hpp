#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ikrnet/nn/layers.hpp"

namespace ikrnet::nn {

// Checkpoint layout:
//   8 bytes  magic "IKRNCKPT"
//   8 bytes  header length n, little-endian u64
//   n bytes  JSON header {format, dtype, config_hash, config, tensors[{name, kind, shape}]}
//   raw little-endian buffers of every tensor, in header order
// Parameters come first, then buffers, each in store registration order.

template <typename T>
std::string dtype_name();

template <typename T>
std::string checkpoint_bytes(const ParameterStore<T>& store, const std::string& config_hash,
                             const nlohmann::json& config);

// Overwrites the store's values. Throws IntegrityError on magic, dtype,
// config-hash, name or shape mismatch, or truncated data.
template <typename T>
void load_checkpoint_bytes(const std::string& bytes, ParameterStore<T>& store, const std::string& expected_hash);

nlohmann::json checkpoint_header(const std::string& bytes);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterStore<T>& store,
                     const std::string& config_hash, const nlohmann::json& config);

template <typename T>
void load_checkpoint(const std::filesystem::path& path, ParameterStore<T>& store, const std::string& expected_hash);

nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace ikrnet::nn
