#include "medctx/model/config.hpp"

#include <sstream>
#include <type_traits>

#include "medctx/core/errors.hpp"

namespace medctx::model {
namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

template <typename Visitor>
void visit_fields(ModelConfig& m, Visitor&& v) {
  v("model.image_size", m.encoder.image_size);
  v("model.patch_size", m.encoder.patch_size);
  v("model.depth", m.encoder.depth);
  v("model.embed_dim", m.encoder.embed_dim);
  v("model.heads", m.encoder.heads);
  v("model.window_size", m.encoder.window_size);
  v("model.dropout", m.encoder.dropout);
  v("model.mlp_ratio", m.encoder.mlp_ratio);
  v("model.text_dim", m.text_dim);
  v("model.text_layers", m.text_layers);
  v("model.text_heads", m.text_heads);
  v("model.fusion_heads", m.fusion_heads);
  v("model.gate_hidden", m.gate_hidden);
  v("model.decoder_layers", m.decoder_layers);
  v("model.num_histology", m.num_histology);
  v("model.shared_embed_dim", m.shared_embed_dim);
  v("model.ssl_proj_dim", m.ssl_proj_dim);
  v("model.clip_tau_init", m.clip_tau_init);
  v("model.caption_embed", m.caption_embed);
  v("model.caption_hidden", m.caption_hidden);
  v("model.caption_max_len", m.caption_max_len);
  v("model.use_local_branch", m.use_local_branch);
  v("model.use_structured_tokens", m.use_structured_tokens);
  v("model.use_uncertainty_gate", m.use_uncertainty_gate);
  v("model.use_clinical_text", m.use_clinical_text);
}

}  // namespace

void EncoderConfig::validate() const {
  if (patch_size <= 1 || !is_power_of_two(patch_size)) {
    throw InvalidArgument("patch_size must be a power of two >= 2 (learned upsampling doubles per stage)");
  }
  if (image_size <= 0 || image_size % patch_size != 0) {
    throw InvalidArgument("image_size must be divisible by patch_size");
  }
  if (depth < 1) throw InvalidArgument("encoder depth must be >= 1");
  if (embed_dim % heads != 0) throw InvalidArgument("embed_dim must be divisible by heads");
  if (window_size < 1 || window_size > grid_side()) {
    throw InvalidArgument("window_size " + std::to_string(window_size) + " exceeds grid side " +
                          std::to_string(grid_side()));
  }
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must lie in [0,1)");
}

EncoderConfig EncoderConfig::full() {
  EncoderConfig c;
  c.depth = 12;
  return c;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (text_dim % text_heads != 0) throw InvalidArgument("text_dim must be divisible by text_heads");
  if (encoder.embed_dim % fusion_heads != 0) throw InvalidArgument("embed_dim must be divisible by fusion_heads");
  if (num_histology < 1) throw InvalidArgument("num_histology must be positive");
  if (caption_max_len < 2) throw InvalidArgument("caption_max_len must be >= 2");
  if (!(clip_tau_init > 0.0)) throw InvalidArgument("clip_tau_init must be positive");
  // decoder channel halving must stay >= 1 through all but the last stage
  int stages = 0;
  for (int p = encoder.patch_size; p > 1; p /= 2) ++stages;
  if ((encoder.embed_dim >> (stages - 1)) < 1) throw InvalidArgument("embed_dim too small for patch size");
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& cfg, ModelConfig base) {
  visit_fields(base, [&](const char* key, auto& field) {
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<T, bool>) {
      field = cfg.get_bool(key, field);
    } else if constexpr (std::is_same_v<T, int>) {
      field = static_cast<int>(cfg.get_int(key, field));
    } else {
      field = cfg.get_double(key, field);
    }
  });
  base.validate();
  return base;
}

void ModelConfig::write_to(KeyValueConfig& cfg) const {
  auto copy = *this;
  visit_fields(copy, [&](const char* key, auto& field) {
    using T = std::decay_t<decltype(field)>;
    std::ostringstream os;
    if constexpr (std::is_same_v<T, bool>) {
      os << (field ? "true" : "false");
    } else {
      os.precision(17);
      os << field;
    }
    cfg.set(key, os.str());
  });
}

ModelConfig ModelConfig::tiny() {
  ModelConfig m;
  m.encoder.image_size = 32;
  m.encoder.patch_size = 8;
  m.encoder.depth = 2;
  m.encoder.embed_dim = 32;
  m.encoder.heads = 4;
  m.encoder.window_size = 2;
  m.encoder.dropout = 0.0;
  m.text_dim = 16;
  m.text_layers = 1;
  m.text_heads = 2;
  m.fusion_heads = 4;
  m.gate_hidden = 16;
  m.decoder_layers = 1;
  m.shared_embed_dim = 16;
  m.ssl_proj_dim = 8;
  m.caption_embed = 8;
  m.caption_hidden = 16;
  m.caption_max_len = 40;
  return m;
}

std::vector<std::string> model_config_keys() {
  std::vector<std::string> keys;
  ModelConfig m;
  visit_fields(m, [&](const char* key, auto&) { keys.emplace_back(key); });
  return keys;
}

}  // namespace medctx::model
