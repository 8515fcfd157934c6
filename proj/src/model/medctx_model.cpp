#include "medctx/model/medctx_model.hpp"

#include <cmath>

#include "medctx/core/errors.hpp"

namespace medctx::model {
namespace {

void append(std::vector<torch::Tensor>& dst, const std::vector<torch::Tensor>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

MedCtxImpl::MedCtxImpl(const ModelConfig& cfg, int vocab_size) : cfg_(cfg), vocab_size_(vocab_size) {
  cfg_.validate();
  const int d = cfg_.encoder.embed_dim;
  visual = register_module("visual", VisualEncoder(cfg_.encoder, cfg_.use_local_branch));
  text_encoder = register_module(
      "text_encoder", TextEncoder(vocab_size, cfg_.text_dim, cfg_.text_layers, cfg_.text_heads, d, cfg_.encoder.dropout));
  structured = register_module("structured", StructuredEmbedding(d));
  fusion = register_module("fusion", CrossModalFusion(d, cfg_.fusion_heads, cfg_.gate_hidden));
  decoder = register_module("decoder", MultiTaskDecoder(cfg_));
  caption = register_module("caption", CaptionDecoder(vocab_size, d, cfg_.caption_embed, cfg_.caption_hidden));
  proj_img = register_module("proj_img", torch::nn::Linear(d, cfg_.shared_embed_dim));
  proj_txt = register_module("proj_txt", torch::nn::Linear(d, cfg_.shared_embed_dim));
  ssl_proj = register_module("ssl_proj", torch::nn::Sequential(torch::nn::Linear(d, d), torch::nn::GELU(),
                                                                torch::nn::Linear(d, cfg_.ssl_proj_dim)));
  log_tau = register_parameter("log_tau", torch::full({1}, std::log(cfg_.clip_tau_init)));
  null_text = register_parameter("null_text", torch::zeros({1, kCombinedTokens, d}));
  torch::NoGradGuard guard;
  nn::trunc_normal_(null_text, 0.0, 0.02, -0.04, 0.04);
  if (!cfg_.use_uncertainty_gate) fusion->set_constant_gate(0.0);
}

TextFeatures MedCtxImpl::encode_text(const TokenBatch& tokens, const StructuredBatch& desc) {
  const auto B = tokens.ids.size(0);
  TextFeatures out;
  if (!cfg_.use_clinical_text) {
    const auto m = cfg_.use_structured_tokens ? kCombinedTokens : text::kMaxTokens;
    out.tokens = null_text.narrow(1, 0, m).expand({B, -1, -1});
    out.valid = torch::ones({B, m}, torch::kBool);
    return out;
  }
  auto text_tokens = text_encoder(tokens);
  if (!cfg_.use_structured_tokens) {
    out.tokens = text_tokens;
    out.valid = tokens.flags;
    return out;
  }
  out.tokens = combine(text_tokens, structured(desc));
  out.valid = torch::cat({tokens.flags, torch::ones({B, kStructuredTokens}, torch::kBool)}, 1);
  return out;
}

torch::Tensor MedCtxImpl::image_embedding(const torch::Tensor& visual_tokens) {
  return proj_img(visual_tokens.mean(1));
}

torch::Tensor MedCtxImpl::text_embedding(const TextFeatures& text) {
  return proj_txt(nn::masked_mean(text.tokens, text.valid));
}

torch::Tensor MedCtxImpl::ssl_embedding(const torch::Tensor& images) {
  return ssl_proj->forward(visual(images).tokens.mean(1));
}

ForwardOutputs MedCtxImpl::forward(const ModelInputs& in) {
  ForwardOutputs out;
  out.visual = visual(in.images);
  out.text = encode_text(in.tokens, in.structured);
  torch::Tensor alpha;
  if (!cfg_.use_uncertainty_gate) {
    alpha = torch::full({in.batch_size(), out.visual.tokens.size(1), 1}, 0.5, out.visual.tokens.options());
  }
  out.fused = fusion->cross_modal_fuse(out.visual.tokens, out.text.tokens, alpha, out.text.valid);
  out.bundle = decoder(out.fused.values, out.fused.attention_map);
  out.img_emb = image_embedding(out.visual.tokens);
  out.txt_emb = text_embedding(out.text);
  out.pooled = out.fused.values.mean(1);
  return out;
}

std::vector<torch::Tensor> MedCtxImpl::vision_parameters() const { return visual->parameters(); }

std::vector<torch::Tensor> MedCtxImpl::text_parameters() const {
  auto p = text_encoder->parameters();
  append(p, structured->parameters());
  p.push_back(null_text);
  return p;
}

std::vector<torch::Tensor> MedCtxImpl::alignment_parameters() const {
  auto p = proj_img->parameters();
  append(p, proj_txt->parameters());
  p.push_back(log_tau);
  return p;
}

std::vector<torch::Tensor> MedCtxImpl::ssl_parameters() const { return ssl_proj->parameters(); }

std::vector<torch::Tensor> MedCtxImpl::head_parameters() const {
  auto p = fusion->parameters();
  append(p, decoder->parameters());
  append(p, caption->parameters());
  append(p, alignment_parameters());
  return p;
}

double parameter_checksum(const std::vector<torch::Tensor>& params) {
  double total = 0.0;
  double k = 1.0;
  for (const auto& p : params) {
    auto flat = p.detach().to(torch::kDouble).flatten();
    auto idx = torch::arange(1, flat.numel() + 1, torch::kDouble);
    total += (flat * flat).sum().item<double>() + k * (flat * idx).sum().item<double>() * 1e-3;
    k += 1.0;
  }
  return total;
}

bool parameters_equal(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].sizes().equals(b[i].sizes()) || !torch::equal(a[i].detach(), b[i].detach())) return false;
  }
  return true;
}

std::vector<torch::Tensor> clone_parameters(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.detach().clone());
  return out;
}

}  // namespace medctx::model
