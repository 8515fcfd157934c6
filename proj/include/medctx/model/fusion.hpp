#pragma once

#include <optional>

#include <torch/torch.h>

#include "medctx/nn/layers.hpp"

namespace medctx::model {

struct FusedFeatures {
  torch::Tensor values;         // B x N x d
  torch::Tensor unc_gate;       // B x N x 1, in (0,1)
  torch::Tensor attention_map;  // B x N, detached; sums to 1 over tokens
};

/// Uncertainty-modulated cross-attention:
///   F = a * V + (1 - a) * Attention(V, T),  a = sigmoid(MLP([V; pool(T)]))
/// The text tokens are mean-pooled (over valid tokens) and broadcast to every
/// visual token before the 2d -> hidden -> 1 perceptron, giving one scalar gate
/// per visual token.
class CrossModalFusionImpl : public torch::nn::Module {
 public:
  CrossModalFusionImpl(int dim, int heads, int gate_hidden);

  /// V: B x N x d, T: B x M x d, text_valid: B x M bool (optional).
  torch::Tensor compute_unc_gate(const torch::Tensor& V, const torch::Tensor& T,
                                 const torch::Tensor& text_valid = {});

  /// With `alpha` undefined the gate is computed from (V, T); otherwise the
  /// given B x N x 1 gate is used as-is.
  FusedFeatures cross_modal_fuse(const torch::Tensor& V, const torch::Tensor& T,
                                 const torch::Tensor& alpha = {}, const torch::Tensor& text_valid = {});

  /// Pure attention term Attention(V, T).
  torch::Tensor attend(const torch::Tensor& V, const torch::Tensor& T, const torch::Tensor& text_valid = {});

  /// Zeroes the gate perceptron so the gate is exactly 0.5, then sets the
  /// final bias (used by tests and by the "w/o uncertainty fusion" ablation).
  void set_constant_gate(double bias);

  torch::nn::Linear gate_fc1{nullptr}, gate_fc2{nullptr};
  nn::MultiHeadAttention cross_attn{nullptr};

 private:
  void check(const torch::Tensor& V, const torch::Tensor& T) const;
  int dim_;
};
TORCH_MODULE(CrossModalFusion);

/// Per-visual-token attention saliency from unmasked attention scores
/// (B x H x N x M): scores are normalised over the visual axis for every head
/// and valid text token, then averaged over both.
torch::Tensor attention_saliency(const torch::Tensor& logits, const torch::Tensor& text_valid);

}  // namespace medctx::model
