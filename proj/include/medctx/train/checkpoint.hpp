#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <torch/torch.h>

#include "medctx/core/kv_config.hpp"

namespace medctx::train {

/// Single-file checkpoint container.
///
///   bytes 0-7    magic "MEDCTXCK"
///   bytes 8-11   format version (uint32, little endian), currently 1
///   bytes 12-19  manifest length in bytes (uint64, little endian)
///   manifest     UTF-8 JSON object:
///                  "fields":  string -> string (stage, epoch, best dice, seed, ...)
///                  "config":  flat key/value run configuration
///                  "tensors": [{"name", "dtype", "shape", "offset", "nbytes"}]
///                  "blobs":   [{"name", "offset", "nbytes"}]
///   payload      raw little-endian tensor data and opaque blobs, at the
///                listed offsets relative to the end of the manifest
///
/// Tensor dtypes are "float32", "float64", "int64" and "bool".
struct Checkpoint {
  std::map<std::string, std::string> fields;
  KeyValueConfig config;
  std::map<std::string, torch::Tensor> tensors;
  std::map<std::string, std::string> blobs;

  [[nodiscard]] const std::string& field(const std::string& key) const;
  [[nodiscard]] double field_double(const std::string& key) const;
  [[nodiscard]] long long field_int(const std::string& key) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// IoError for unreadable files, IntegrityError for a damaged or foreign file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Named parameters and buffers, keyed with `prefix`.
void store_module(Checkpoint& ckpt, const torch::nn::Module& module, const std::string& prefix = "model/");
/// Copies stored values into the module; IntegrityError on missing names or
/// shape mismatches.
void restore_module(const Checkpoint& ckpt, torch::nn::Module& module, const std::string& prefix = "model/");

std::string serialize_optimizer(const torch::optim::Optimizer& optimizer);
void deserialize_optimizer(const std::string& blob, torch::optim::Optimizer& optimizer);

}  // namespace medctx::train
