#include "medctx/model/decoder.hpp"

#include "medctx/core/errors.hpp"

namespace medctx::model {

MultiTaskDecoderImpl::MultiTaskDecoderImpl(const ModelConfig& cfg) : enc_(cfg.encoder) {
  const int d = enc_.embed_dim;
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < cfg.decoder_layers; ++i) {
    blocks->push_back(nn::TransformerBlock(d, enc_.heads, enc_.mlp_ratio, enc_.dropout));
  }
  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));

  upsample = register_module("upsample", torch::nn::ModuleList());
  int channels = d;
  int last_hidden = d;
  for (int p = enc_.patch_size; p > 1; p /= 2) {
    const bool final_stage = p == 2;
    const int out = final_stage ? 1 : channels / 2;
    upsample->push_back(torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(channels, out, 4).stride(2).padding(1)));
    if (!final_stage) last_hidden = out;
    channels = out;
  }
  uncertainty_head = register_module(
      "uncertainty_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(last_hidden, 1, 3).padding(1)));
  pathology_head = register_module("pathology_head", torch::nn::Linear(d, 2));
  birads_head = register_module("birads_head", torch::nn::Linear(d, 4));
  histology_head = register_module("histology_head", torch::nn::Linear(d, cfg.num_histology));
  confidence_head = register_module("confidence_head", torch::nn::Linear(d, 1));
  nn::init_transformer_weights(*this);
}

PredictionBundle MultiTaskDecoderImpl::forward(const torch::Tensor& fused, const torch::Tensor& attention_map) {
  const int g = enc_.grid_side();
  if (fused.dim() != 3 || fused.size(1) != enc_.num_tokens() || fused.size(2) != enc_.embed_dim) {
    throw ShapeError("decoder expects B x " + std::to_string(enc_.num_tokens()) + " x " +
                     std::to_string(enc_.embed_dim) + " fused features");
  }
  const auto B = fused.size(0);
  auto x = fused;
  for (const auto& block : *blocks) x = block->as<nn::TransformerBlock>()->forward(x);
  x = norm(x);

  PredictionBundle out;
  out.features = x;
  auto fmap = x.transpose(1, 2).reshape({B, enc_.embed_dim, g, g});
  torch::Tensor hidden = fmap;
  const auto stages = upsample->size();
  for (std::size_t i = 0; i < stages; ++i) {
    fmap = upsample[i]->as<torch::nn::ConvTranspose2d>()->forward(fmap);
    if (i + 1 < stages) {
      fmap = torch::gelu(fmap);
      hidden = fmap;
    }
  }
  out.seg_logits = fmap;
  auto up_hidden = torch::upsample_bilinear2d(hidden, {enc_.image_size, enc_.image_size}, false);
  out.uncertainty = torch::sigmoid(uncertainty_head(up_hidden));

  auto pooled = x.mean(1);
  out.pathology_logits = pathology_head(pooled);
  out.birads_logits = birads_head(pooled);
  out.histology_logits = histology_head(pooled);
  out.confidence = torch::sigmoid(confidence_head(pooled));
  if (attention_map.defined()) out.attention_map = attention_map.reshape({B, g, g});
  return out;
}

void MultiTaskDecoderImpl::zero_heads() {
  torch::NoGradGuard guard;
  auto last = upsample[upsample->size() - 1]->as<torch::nn::ConvTranspose2d>();
  last->weight.zero_();
  last->bias.zero_();
  for (auto* conv : {&uncertainty_head}) {
    (*conv)->weight.zero_();
    (*conv)->bias.zero_();
  }
  for (auto* head : {&pathology_head, &birads_head, &histology_head, &confidence_head}) {
    (*head)->weight.zero_();
    (*head)->bias.zero_();
  }
}

Mask binarize(const torch::Tensor& seg_logits) {
  auto t = seg_logits.detach().to(torch::kCPU).to(torch::kFloat);
  while (t.dim() > 2 && t.size(0) == 1) t = t.squeeze(0);
  if (t.dim() != 2) throw ShapeError("binarize expects a single H x W logit map");
  t = t.contiguous();
  Mask m(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)));
  const float* src = t.data_ptr<float>();
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = src[i] >= 0.0f ? 1 : 0;
  return m;
}

}  // namespace medctx::model
