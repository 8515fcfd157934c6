#pragma once

#include <vector>

#include <torch/torch.h>

#include "medctx/model/caption_decoder.hpp"
#include "medctx/model/config.hpp"
#include "medctx/model/decoder.hpp"
#include "medctx/model/fusion.hpp"
#include "medctx/model/text_encoder.hpp"
#include "medctx/model/visual_encoder.hpp"

namespace medctx::model {

struct ModelInputs {
  torch::Tensor images;  // B x 1 x S x S
  TokenBatch tokens;
  StructuredBatch structured;

  [[nodiscard]] std::int64_t batch_size() const { return images.size(0); }
};

struct TextFeatures {
  torch::Tensor tokens;  // B x M x d, M = 131 (128 without structured tokens)
  torch::Tensor valid;   // B x M bool
};

struct ForwardOutputs {
  VisualFeatures visual;
  TextFeatures text;
  FusedFeatures fused;
  PredictionBundle bundle;
  torch::Tensor img_emb;  // B x shared, not normalized
  torch::Tensor txt_emb;  // B x shared, not normalized
  torch::Tensor pooled;   // B x d, mean of fused tokens (caption decoder input)
};

class MedCtxImpl : public torch::nn::Module {
 public:
  MedCtxImpl(const ModelConfig& cfg, int vocab_size);

  ForwardOutputs forward(const ModelInputs& in);

  TextFeatures encode_text(const TokenBatch& tokens, const StructuredBatch& structured);
  /// Projected image / text embeddings used by the alignment loss.
  torch::Tensor image_embedding(const torch::Tensor& visual_tokens);
  torch::Tensor text_embedding(const TextFeatures& text);
  /// Self-supervised projection of the visual tokens (stage 1).
  torch::Tensor ssl_embedding(const torch::Tensor& images);
  /// CLIP temperature, exp(log_tau).
  torch::Tensor temperature() const { return log_tau.exp(); }

  std::vector<torch::Tensor> vision_parameters() const;
  std::vector<torch::Tensor> text_parameters() const;
  /// Projection heads of the shared alignment space, including log_tau.
  std::vector<torch::Tensor> alignment_parameters() const;
  std::vector<torch::Tensor> ssl_parameters() const;
  /// Everything that is neither vision nor text: fusion, decoder, caption
  /// generator, alignment heads.
  std::vector<torch::Tensor> head_parameters() const;

  [[nodiscard]] const ModelConfig& config() const { return cfg_; }
  [[nodiscard]] int vocab_size() const { return vocab_size_; }

  VisualEncoder visual{nullptr};
  TextEncoder text_encoder{nullptr};
  StructuredEmbedding structured{nullptr};
  CrossModalFusion fusion{nullptr};
  MultiTaskDecoder decoder{nullptr};
  CaptionDecoder caption{nullptr};
  torch::nn::Linear proj_img{nullptr}, proj_txt{nullptr};
  torch::nn::Sequential ssl_proj{nullptr};
  torch::Tensor log_tau;
  torch::Tensor null_text;  // learned replacement tokens when clinical text is disabled

 private:
  ModelConfig cfg_;
  int vocab_size_;
};
TORCH_MODULE(MedCtx);

/// Flat float64 checksum-style digest of a parameter list (sum of squares and
/// a position-weighted sum), used to assert freezing.
double parameter_checksum(const std::vector<torch::Tensor>& params);

/// True when every tensor of `a` equals `b` bitwise.
bool parameters_equal(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b);

std::vector<torch::Tensor> clone_parameters(const std::vector<torch::Tensor>& params);

}  // namespace medctx::model
