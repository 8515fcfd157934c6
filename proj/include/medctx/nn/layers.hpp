#pragma once

#include <torch/torch.h>

namespace medctx::nn {

/// Truncated-normal(0, 0.02) weights and zero biases for every Linear in `module`;
/// LayerNorm to (1, 0).
void init_transformer_weights(torch::nn::Module& module);

/// In-place normal(mean, std) truncated to [lo, hi] by resampling.
void trunc_normal_(torch::Tensor& t, double mean, double std, double lo, double hi);

/// Multi-head scaled dot-product attention with separate query and key/value
/// inputs. `key_valid` (B x Nk, bool) and `allowed` (broadcastable to
/// B x H x Nq x Nk, bool) both mark permitted keys. Masked keys receive exactly
/// zero weight; a query with no permitted key yields only the output bias.
class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(std::int64_t dim, std::int64_t heads, double dropout = 0.0);

  struct Result {
    torch::Tensor output;  // B x Nq x dim
    torch::Tensor logits;  // unmasked B x H x Nq x Nk scores, only when requested
  };

  Result forward(const torch::Tensor& query, const torch::Tensor& key_value,
                 const torch::Tensor& key_valid = {}, const torch::Tensor& allowed = {},
                 bool return_logits = false);

  [[nodiscard]] std::int64_t heads() const { return heads_; }

  torch::nn::Linear q_proj{nullptr}, k_proj{nullptr}, v_proj{nullptr}, out_proj{nullptr};

 private:
  std::int64_t dim_;
  std::int64_t heads_;
  torch::nn::Dropout attn_drop{nullptr};
};
TORCH_MODULE(MultiHeadAttention);

class FeedForwardImpl : public torch::nn::Module {
 public:
  FeedForwardImpl(std::int64_t dim, std::int64_t hidden, double dropout);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};

 private:
  torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(FeedForward);

/// Pre-norm transformer block: x + Attn(LN(x)), then x + FFN(LN(x)).
class TransformerBlockImpl : public torch::nn::Module {
 public:
  TransformerBlockImpl(std::int64_t dim, std::int64_t heads, double mlp_ratio, double dropout);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& key_valid = {});

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  MultiHeadAttention attn{nullptr};
  FeedForward ffn{nullptr};

 private:
  torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(TransformerBlock);

/// Shifted-window block on a fixed square token grid. Windows of
/// window x window tokens attend internally; a non-zero shift cyclically rolls
/// the grid first and masks attention between regions that were not adjacent.
/// Grids not divisible by the window are zero-padded and padded keys masked.
class WindowBlockImpl : public torch::nn::Module {
 public:
  WindowBlockImpl(std::int64_t dim, std::int64_t heads, std::int64_t grid, std::int64_t window,
                  std::int64_t shift, double mlp_ratio, double dropout);

  torch::Tensor forward(const torch::Tensor& x);

  [[nodiscard]] std::int64_t window() const { return window_; }
  [[nodiscard]] std::int64_t shift() const { return shift_; }

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  MultiHeadAttention attn{nullptr};
  FeedForward ffn{nullptr};

 private:
  torch::Tensor window_attention(const torch::Tensor& x);

  std::int64_t grid_, window_, shift_, padded_;
  torch::Tensor allowed_;  // nW x Nw x Nw bool, or undefined when unmasked
  torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(WindowBlock);

/// Tensor helpers shared by the model and loss code.
torch::Tensor masked_mean(const torch::Tensor& x, const torch::Tensor& valid);

}  // namespace medctx::nn
