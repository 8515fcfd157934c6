#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medctx/core/kv_config.hpp"

namespace medctx::model {

struct EncoderConfig {
  int image_size = 224;
  int patch_size = 16;
  int depth = 4;
  int embed_dim = 384;
  int heads = 6;
  int window_size = 7;
  double dropout = 0.1;
  double mlp_ratio = 4.0;

  [[nodiscard]] int grid_side() const { return image_size / patch_size; }
  [[nodiscard]] int num_tokens() const { return grid_side() * grid_side(); }
  void validate() const;

  /// depth 12 preset for users with accelerators.
  static EncoderConfig full();
};

struct ModelConfig {
  EncoderConfig encoder;

  int text_dim = 256;
  int text_layers = 2;
  int text_heads = 4;

  int fusion_heads = 6;
  int gate_hidden = 192;
  int decoder_layers = 2;
  int num_histology = 4;
  int shared_embed_dim = 256;  // image/text alignment space
  int ssl_proj_dim = 128;
  double clip_tau_init = 0.07;

  int caption_embed = 128;
  int caption_hidden = 384;
  int caption_max_len = 64;

  // Ablation switches.
  bool use_local_branch = true;
  bool use_structured_tokens = true;
  bool use_uncertainty_gate = true;
  bool use_clinical_text = true;

  void validate() const;

  /// Reads `model.*` keys; unknown `model.*` keys raise InvalidArgument.
  static ModelConfig from_config(const KeyValueConfig& cfg, ModelConfig base);
  static ModelConfig from_config(const KeyValueConfig& cfg) { return from_config(cfg, ModelConfig{}); }
  void write_to(KeyValueConfig& cfg) const;

  /// Small dimensions for unit tests (image 32, patch 8, d 32).
  static ModelConfig tiny();
};

std::vector<std::string> model_config_keys();

}  // namespace medctx::model
