#pragma once

#include <torch/torch.h>

#include "medctx/core/grid.hpp"
#include "medctx/model/config.hpp"
#include "medctx/nn/layers.hpp"

namespace medctx::model {

struct PredictionBundle {
  torch::Tensor seg_logits;        // B x 1 x S x S
  torch::Tensor uncertainty;       // B x 1 x S x S, (0,1)
  torch::Tensor pathology_logits;  // B x 2
  torch::Tensor birads_logits;     // B x 4
  torch::Tensor histology_logits;  // B x K
  torch::Tensor confidence;        // B x 1, (0,1)
  torch::Tensor attention_map;     // B x G x G
  torch::Tensor features;          // S_features, B x N x d (decoder output tokens)
};

/// Refines fused tokens with self-attention blocks, then:
///  - segmentation: log2(patch) stride-2 transposed convolutions (k4, halving
///    channels) ending in one logit channel at full resolution;
///  - uncertainty: 3x3 convolution + sigmoid on the last hidden upsampling
///    stage, bilinearly resized to full resolution;
///  - clinical heads: global average pool -> pathology / BI-RADS / histology
///    linear classifiers and a sigmoid confidence scalar.
class MultiTaskDecoderImpl : public torch::nn::Module {
 public:
  explicit MultiTaskDecoderImpl(const ModelConfig& cfg);

  /// fused: B x N x d on the encoder grid. attention_map: B x N (optional).
  PredictionBundle forward(const torch::Tensor& fused, const torch::Tensor& attention_map = {});

  /// Zeroes the final layer of every head (tests: logits 0, U = c = 0.5).
  void zero_heads();

  torch::nn::ModuleList blocks{nullptr};
  torch::nn::LayerNorm norm{nullptr};
  torch::nn::ModuleList upsample{nullptr};
  torch::nn::Conv2d uncertainty_head{nullptr};
  torch::nn::Linear pathology_head{nullptr}, birads_head{nullptr}, histology_head{nullptr},
      confidence_head{nullptr};

 private:
  EncoderConfig enc_;
};
TORCH_MODULE(MultiTaskDecoder);

/// 1 where logit >= 0 (sigmoid >= 0.5). seg_logits: H x W or 1 x H x W.
Mask binarize(const torch::Tensor& seg_logits);

}  // namespace medctx::model
