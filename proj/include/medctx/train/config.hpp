#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medctx/core/kv_config.hpp"

namespace medctx::train {

struct TrainConfig {
  int stage1_epochs = 10;
  int stage2_epochs = 10;
  int stage3_epochs = 50;

  double lr_stage1 = 1e-4;
  double lr_stage2 = 2e-5;
  double lr_vision = 1e-4;  // stage 3, also used for fusion/decoder heads
  double lr_text = 2e-5;    // stage 3
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double min_lr_ratio = 0.01;  // cosine floor as a fraction of the peak

  int stage1_batch = 32;
  int stage2_batch = 16;
  int batch_size = 8;
  int grad_accum = 2;
  int patience = 10;
  std::uint64_t seed = 42;

  bool augment = true;
  bool fp16 = false;
  int threads = 0;  // 0 keeps the library default

  void validate() const;
  [[nodiscard]] int effective_batch() const { return batch_size * grad_accum; }
  [[nodiscard]] int total_epochs() const { return stage1_epochs + stage2_epochs + stage3_epochs; }

  static TrainConfig from_config(const KeyValueConfig& cfg, TrainConfig base);
  static TrainConfig from_config(const KeyValueConfig& cfg) { return from_config(cfg, TrainConfig{}); }
  void write_to(KeyValueConfig& cfg) const;
};

std::vector<std::string> train_config_keys();

/// Cosine annealing from `peak` at epoch 0 to `peak * min_ratio` at the last
/// epoch of a stage with `epochs` epochs.
double cosine_lr(double peak, int epoch, int epochs, double min_ratio);

}  // namespace medctx::train
