#pragma once

#include <vector>

#include <torch/torch.h>

#include "medctx/model/config.hpp"
#include "medctx/nn/layers.hpp"

namespace medctx::model {

/// Per-token adaptive gate between the global and local branch of one layer.
struct GateParams {
  torch::Tensor weight;  // 2d x d, applied as [z_g; z_l] @ weight
  torch::Tensor bias;    // d
};

/// z = a * z_g + (1 - a) * z_l,  a = sigmoid([z_g; z_l] W + b), elementwise per
/// token and channel. Inputs are B x N x d.
torch::Tensor fuse_branches(const torch::Tensor& z_global, const torch::Tensor& z_local,
                            const GateParams& params);

/// Gate values alone (B x N x d), for inspection.
torch::Tensor fusion_gate(const torch::Tensor& z_global, const torch::Tensor& z_local,
                          const GateParams& params);

/// Patch embedding + learned positions + a stack of blocks at fixed token
/// resolution. Global branches use full attention, local branches use windows
/// shifted by half a window on every odd layer.
class BranchEncoderImpl : public torch::nn::Module {
 public:
  BranchEncoderImpl(const EncoderConfig& cfg, bool windowed);

  /// image: B x 1 x S x S. Returns one B x N x d grid per layer.
  std::vector<torch::Tensor> forward(const torch::Tensor& image);
  /// Patch + position embedding only (the input of layer 0).
  torch::Tensor embed(const torch::Tensor& image);

  [[nodiscard]] bool windowed() const { return windowed_; }

  torch::nn::Conv2d patch_embed{nullptr};
  torch::Tensor pos_embed;
  torch::nn::ModuleList blocks{nullptr};

 private:
  EncoderConfig cfg_;
  bool windowed_;
  torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(BranchEncoder);

struct VisualFeatures {
  std::vector<torch::Tensor> global_layers;
  std::vector<torch::Tensor> local_layers;  // empty when the local branch is disabled
  std::vector<torch::Tensor> fused_layers;
  torch::Tensor tokens;  // V: mean of the fused layers, B x N x d
};

/// Dual-branch encoder with one fusion gate per layer.
class VisualEncoderImpl : public torch::nn::Module {
 public:
  VisualEncoderImpl(const EncoderConfig& cfg, bool use_local_branch);

  VisualFeatures forward(const torch::Tensor& image);

  [[nodiscard]] GateParams gate(std::size_t layer) const;
  [[nodiscard]] const EncoderConfig& config() const { return cfg_; }
  [[nodiscard]] bool uses_local_branch() const { return use_local_; }

  BranchEncoder global_branch{nullptr};
  BranchEncoder local_branch{nullptr};
  std::vector<torch::Tensor> gate_weights;
  std::vector<torch::Tensor> gate_biases;

 private:
  EncoderConfig cfg_;
  bool use_local_;
};
TORCH_MODULE(VisualEncoder);

/// Convenience wrappers matching the branch-level operations.
std::vector<torch::Tensor> encode_global(BranchEncoder& branch, const torch::Tensor& image);
std::vector<torch::Tensor> encode_local(BranchEncoder& branch, const torch::Tensor& image);

}  // namespace medctx::model
