#pragma once

#include <filesystem>
#include <string>

#include "scogait/model.hpp"

namespace scogait {

// File layout: 8-byte magic, little-endian uint64 header length, JSON header
// (config, iteration, dtype, tensor table), then raw tensor bytes.
struct CheckpointMeta {
  ModelConfig config;
  long iteration = 0;
  std::string dtype;
};

template <typename T>
void save_checkpoint(ScoNet<T>& model, long iteration, const std::filesystem::path& file);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& file);

// Restores a model (parameters and BN statistics); `iteration` is optional.
template <typename T>
ScoNet<T> load_checkpoint(const std::filesystem::path& file, long* iteration = nullptr);

}  // namespace scogait
