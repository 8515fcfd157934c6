#include "medctx/model/visual_encoder.hpp"

#include <sstream>

#include "medctx/core/errors.hpp"

namespace medctx::model {
namespace {

void check_image(const torch::Tensor& image, const EncoderConfig& cfg) {
  if (image.dim() != 4 || image.size(1) != 1 || image.size(2) != cfg.image_size ||
      image.size(3) != cfg.image_size) {
    std::ostringstream os;
    os << "encoder expects B x 1 x " << cfg.image_size << " x " << cfg.image_size << " input, got "
       << image.sizes();
    throw ShapeError(os.str());
  }
}

}  // namespace

torch::Tensor fusion_gate(const torch::Tensor& z_global, const torch::Tensor& z_local,
                          const GateParams& params) {
  if (z_global.sizes() != z_local.sizes() || z_global.dim() != 3) {
    throw ShapeError("fuse_branches: branch token grids must have identical B x N x d shapes");
  }
  const auto d = z_global.size(2);
  if (params.weight.dim() != 2 || params.weight.size(0) != 2 * d || params.weight.size(1) != d ||
      params.bias.dim() != 1 || params.bias.size(0) != d) {
    throw ShapeError("fuse_branches: gate parameters must be 2d x d and d");
  }
  auto both = torch::cat({z_global, z_local}, -1);
  return torch::sigmoid(torch::matmul(both, params.weight) + params.bias);
}

torch::Tensor fuse_branches(const torch::Tensor& z_global, const torch::Tensor& z_local,
                            const GateParams& params) {
  auto alpha = fusion_gate(z_global, z_local, params);
  return alpha * z_global + (1 - alpha) * z_local;
}

BranchEncoderImpl::BranchEncoderImpl(const EncoderConfig& cfg, bool windowed)
    : cfg_(cfg), windowed_(windowed) {
  cfg_.validate();
  const auto d = cfg_.embed_dim;
  const auto grid = cfg_.grid_side();
  patch_embed = register_module(
      "patch_embed",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(1, d, cfg_.patch_size).stride(cfg_.patch_size)));
  pos_embed = register_parameter("pos_embed", torch::zeros({1, cfg_.num_tokens(), d}));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < cfg_.depth; ++i) {
    if (windowed_) {
      const std::int64_t shift = (i % 2 == 1) ? cfg_.window_size / 2 : 0;
      blocks->push_back(nn::WindowBlock(d, cfg_.heads, grid, cfg_.window_size, shift, cfg_.mlp_ratio,
                                        cfg_.dropout));
    } else {
      blocks->push_back(nn::TransformerBlock(d, cfg_.heads, cfg_.mlp_ratio, cfg_.dropout));
    }
  }
  drop = register_module("drop", torch::nn::Dropout(cfg_.dropout));
  nn::init_transformer_weights(*this);
  torch::NoGradGuard guard;
  nn::trunc_normal_(pos_embed, 0.0, 0.02, -0.04, 0.04);
}

torch::Tensor BranchEncoderImpl::embed(const torch::Tensor& image) {
  check_image(image, cfg_);
  auto x = patch_embed(image).flatten(2).transpose(1, 2);  // B x N x d
  return drop(x + pos_embed);
}

std::vector<torch::Tensor> BranchEncoderImpl::forward(const torch::Tensor& image) {
  auto x = embed(image);
  std::vector<torch::Tensor> layers;
  layers.reserve(blocks->size());
  for (const auto& block : *blocks) {
    if (windowed_) {
      x = block->as<nn::WindowBlock>()->forward(x);
    } else {
      x = block->as<nn::TransformerBlock>()->forward(x);
    }
    layers.push_back(x);
  }
  return layers;
}

VisualEncoderImpl::VisualEncoderImpl(const EncoderConfig& cfg, bool use_local_branch)
    : cfg_(cfg), use_local_(use_local_branch) {
  cfg_.validate();
  global_branch = register_module("global_branch", BranchEncoder(cfg_, false));
  if (use_local_) {
    local_branch = register_module("local_branch", BranchEncoder(cfg_, true));
    const auto d = cfg_.embed_dim;
    for (int i = 0; i < cfg_.depth; ++i) {
      auto w = torch::empty({2 * d, d});
      nn::trunc_normal_(w, 0.0, 0.02, -0.04, 0.04);
      gate_weights.push_back(register_parameter("gate_weight_" + std::to_string(i), w));
      gate_biases.push_back(register_parameter("gate_bias_" + std::to_string(i), torch::zeros({d})));
    }
  }
}

GateParams VisualEncoderImpl::gate(std::size_t layer) const {
  if (!use_local_) throw StateError("local branch disabled; no fusion gates");
  return {gate_weights.at(layer), gate_biases.at(layer)};
}

VisualFeatures VisualEncoderImpl::forward(const torch::Tensor& image) {
  VisualFeatures f;
  f.global_layers = global_branch->forward(image);
  if (use_local_) {
    f.local_layers = local_branch->forward(image);
    for (std::size_t l = 0; l < f.global_layers.size(); ++l) {
      f.fused_layers.push_back(fuse_branches(f.global_layers[l], f.local_layers[l], gate(l)));
    }
  } else {
    // Gate bypassed at a = 1: the fused stream is the global branch.
    f.fused_layers = f.global_layers;
  }
  f.tokens = torch::stack(f.fused_layers, 0).mean(0);
  return f;
}

std::vector<torch::Tensor> encode_global(BranchEncoder& branch, const torch::Tensor& image) {
  if (branch->windowed()) throw InvalidArgument("encode_global needs a full-attention branch");
  return branch->forward(image);
}

std::vector<torch::Tensor> encode_local(BranchEncoder& branch, const torch::Tensor& image) {
  if (!branch->windowed()) throw InvalidArgument("encode_local needs a windowed branch");
  return branch->forward(image);
}

}  // namespace medctx::model
