#include "medctx/model/fusion.hpp"

#include "medctx/core/errors.hpp"

namespace medctx::model {

CrossModalFusionImpl::CrossModalFusionImpl(int dim, int heads, int gate_hidden) : dim_(dim) {
  gate_fc1 = register_module("gate_fc1", torch::nn::Linear(2 * dim, gate_hidden));
  gate_fc2 = register_module("gate_fc2", torch::nn::Linear(gate_hidden, 1));
  cross_attn = register_module("cross_attn", nn::MultiHeadAttention(dim, heads, 0.0));
  nn::init_transformer_weights(*this);
  // The attended text is mixed with the visual tokens without a normalization
  // step, so it needs unit-gain projections to start on a comparable scale.
  torch::NoGradGuard guard;
  for (auto* proj : {&cross_attn->q_proj, &cross_attn->k_proj, &cross_attn->v_proj, &cross_attn->out_proj}) {
    torch::nn::init::xavier_uniform_((*proj)->weight);
  }
}

void CrossModalFusionImpl::check(const torch::Tensor& V, const torch::Tensor& T) const {
  if (V.dim() != 3 || T.dim() != 3 || V.size(2) != dim_ || T.size(2) != dim_ || V.size(0) != T.size(0)) {
    throw ShapeError("fusion expects B x N x " + std::to_string(dim_) + " visual and B x M x " +
                     std::to_string(dim_) + " text tokens");
  }
}

torch::Tensor CrossModalFusionImpl::compute_unc_gate(const torch::Tensor& V, const torch::Tensor& T,
                                                     const torch::Tensor& text_valid) {
  check(V, T);
  auto pooled = nn::masked_mean(T, text_valid);                 // B x d
  auto broadcast = pooled.unsqueeze(1).expand({-1, V.size(1), -1});
  auto h = torch::gelu(gate_fc1(torch::cat({V, broadcast}, -1)));
  return torch::sigmoid(gate_fc2(h));                           // B x N x 1
}

torch::Tensor CrossModalFusionImpl::attend(const torch::Tensor& V, const torch::Tensor& T,
                                           const torch::Tensor& text_valid) {
  check(V, T);
  return cross_attn(V, T, text_valid).output;
}

FusedFeatures CrossModalFusionImpl::cross_modal_fuse(const torch::Tensor& V, const torch::Tensor& T,
                                                     const torch::Tensor& alpha,
                                                     const torch::Tensor& text_valid) {
  check(V, T);
  FusedFeatures out;
  out.unc_gate = alpha.defined() ? alpha : compute_unc_gate(V, T, text_valid);
  if (out.unc_gate.dim() != 3 || out.unc_gate.size(0) != V.size(0) || out.unc_gate.size(1) != V.size(1) ||
      out.unc_gate.size(2) != 1) {
    throw ShapeError("uncertainty gate must be B x N x 1");
  }
  auto attn = cross_attn->forward(V, T, text_valid, {}, /*return_logits=*/true);
  out.values = out.unc_gate * V + (1 - out.unc_gate) * attn.output;
  {
    torch::NoGradGuard guard;
    out.attention_map = attention_saliency(attn.logits.detach(), text_valid);
  }
  return out;
}

void CrossModalFusionImpl::set_constant_gate(double bias) {
  torch::NoGradGuard guard;
  gate_fc1->weight.zero_();
  gate_fc1->bias.zero_();
  gate_fc2->weight.zero_();
  gate_fc2->bias.fill_(bias);
}

torch::Tensor attention_saliency(const torch::Tensor& logits, const torch::Tensor& text_valid) {
  auto per_key = torch::softmax(logits, 2);  // normalise over visual tokens
  if (!text_valid.defined()) return per_key.mean({1, 3});
  auto w = text_valid.to(per_key.dtype()).view({logits.size(0), 1, 1, logits.size(3)});
  auto denom = (w.sum(3) * logits.size(1)).clamp_min(1.0);  // B x 1 x 1
  return (per_key * w).sum({1, 3}) / denom.view({-1, 1});
}

}  // namespace medctx::model
