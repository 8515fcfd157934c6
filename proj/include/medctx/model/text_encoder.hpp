#pragma once

#include <vector>

#include <torch/torch.h>

#include "medctx/model/config.hpp"
#include "medctx/nn/layers.hpp"
#include "medctx/text/tokenizer.hpp"

namespace medctx::model {

inline constexpr int kStructuredTokens = 3;
inline constexpr int kCombinedTokens = text::kMaxTokens + kStructuredTokens;

/// Token ids (B x 128, int64) and attention flags (B x 128, bool).
struct TokenBatch {
  torch::Tensor ids;
  torch::Tensor flags;
};

TokenBatch to_token_batch(const std::vector<text::TextTokens>& tokens);

/// Small trainable report encoder: embedding + learned positions + pre-norm
/// blocks with padded keys masked out + final projection to the visual width.
/// Outputs B x 128 x out_dim.
class TextEncoderImpl : public torch::nn::Module {
 public:
  TextEncoderImpl(int vocab_size, int model_dim, int layers, int heads, int out_dim, double dropout);

  torch::Tensor forward(const TokenBatch& tokens);

  torch::nn::Embedding token_embed{nullptr};
  torch::Tensor pos_embed;
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::LayerNorm norm{nullptr};
  torch::nn::Linear proj{nullptr};

 private:
  int vocab_size_;
};
TORCH_MODULE(TextEncoder);

/// Category codes (B, int64 each): BI-RADS index, pathology, laterality.
struct StructuredBatch {
  torch::Tensor birads;
  torch::Tensor pathology;
  torch::Tensor laterality;
};

/// Three independent category embeddings, output B x 3 x out_dim in the order
/// (birads, pathology, laterality).
class StructuredEmbeddingImpl : public torch::nn::Module {
 public:
  explicit StructuredEmbeddingImpl(int out_dim);

  torch::Tensor forward(const StructuredBatch& desc);

  torch::nn::Embedding birads{nullptr}, pathology{nullptr}, laterality{nullptr};
};
TORCH_MODULE(StructuredEmbedding);

/// Concatenates text (B x 128 x d) and structured (B x 3 x d) along tokens.
torch::Tensor combine(const torch::Tensor& text_emb, const torch::Tensor& struct_emb);

}  // namespace medctx::model
