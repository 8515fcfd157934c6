#include "medctx/nn/layers.hpp"

#include <cmath>

#include "medctx/core/errors.hpp"

namespace medctx::nn {

void trunc_normal_(torch::Tensor& t, double mean, double std, double lo, double hi) {
  torch::NoGradGuard guard;
  t.normal_(mean, std);
  for (int pass = 0; pass < 64; ++pass) {
    auto bad = (t < lo) | (t > hi);
    if (!bad.any().item<bool>()) return;
    t.masked_scatter_(bad, torch::empty_like(t).normal_(mean, std).masked_select(bad));
  }
  t.clamp_(lo, hi);
}

void init_transformer_weights(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  for (auto& child : module.modules(/*include_self=*/false)) {
    if (auto* linear = child->as<torch::nn::Linear>()) {
      trunc_normal_(linear->weight, 0.0, 0.02, -0.04, 0.04);
      if (linear->bias.defined()) linear->bias.zero_();
    } else if (auto* ln = child->as<torch::nn::LayerNorm>()) {
      ln->weight.fill_(1.0);
      ln->bias.zero_();
    }
  }
}

MultiHeadAttentionImpl::MultiHeadAttentionImpl(std::int64_t dim, std::int64_t heads, double dropout)
    : dim_(dim), heads_(heads) {
  if (heads <= 0 || dim % heads != 0) {
    throw InvalidArgument("attention dim " + std::to_string(dim) + " not divisible by heads " +
                          std::to_string(heads));
  }
  q_proj = register_module("q_proj", torch::nn::Linear(dim, dim));
  k_proj = register_module("k_proj", torch::nn::Linear(dim, dim));
  v_proj = register_module("v_proj", torch::nn::Linear(dim, dim));
  out_proj = register_module("out_proj", torch::nn::Linear(dim, dim));
  attn_drop = register_module("attn_drop", torch::nn::Dropout(dropout));
}

MultiHeadAttentionImpl::Result MultiHeadAttentionImpl::forward(const torch::Tensor& query,
                                                               const torch::Tensor& key_value,
                                                               const torch::Tensor& key_valid,
                                                               const torch::Tensor& allowed,
                                                               bool return_logits) {
  if (query.dim() != 3 || key_value.dim() != 3 || query.size(2) != dim_ || key_value.size(2) != dim_ ||
      query.size(0) != key_value.size(0)) {
    throw ShapeError("attention expects B x N x " + std::to_string(dim_) + " query and key/value");
  }
  const auto B = query.size(0), Nq = query.size(1), Nk = key_value.size(1);
  const auto hd = dim_ / heads_;
  auto split = [&](const torch::Tensor& t, std::int64_t n) {
    return t.view({B, n, heads_, hd}).transpose(1, 2);  // B x H x n x hd
  };
  auto q = split(q_proj(query), Nq);
  auto k = split(k_proj(key_value), Nk);
  auto v = split(v_proj(key_value), Nk);

  auto logits = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd));

  torch::Tensor permitted;
  if (key_valid.defined()) {
    if (key_valid.sizes() != torch::IntArrayRef{B, Nk}) throw ShapeError("key_valid must be B x Nk");
    permitted = key_valid.to(torch::kBool).view({B, 1, 1, Nk});
  }
  if (allowed.defined()) {
    auto a = allowed.to(torch::kBool);
    permitted = permitted.defined() ? permitted.logical_and(a) : a;
  }

  torch::Tensor weights;
  if (permitted.defined()) {
    const double neg = -1e9;
    auto masked_logits = logits.masked_fill(permitted.logical_not(), neg);
    weights = torch::softmax(masked_logits, -1) * permitted.to(logits.dtype());
  } else {
    weights = torch::softmax(logits, -1);
  }
  auto mixed = torch::matmul(attn_drop(weights), v);  // B x H x Nq x hd
  auto out = out_proj(mixed.transpose(1, 2).reshape({B, Nq, dim_}));
  Result r{out, {}};
  if (return_logits) r.logits = logits;
  return r;
}

FeedForwardImpl::FeedForwardImpl(std::int64_t dim, std::int64_t hidden, double dropout) {
  fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
  drop = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor FeedForwardImpl::forward(const torch::Tensor& x) {
  return fc2(drop(torch::gelu(fc1(x))));
}

TransformerBlockImpl::TransformerBlockImpl(std::int64_t dim, std::int64_t heads, double mlp_ratio,
                                           double dropout) {
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  attn = register_module("attn", MultiHeadAttention(dim, heads, dropout));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  ffn = register_module("ffn", FeedForward(dim, static_cast<std::int64_t>(dim * mlp_ratio), dropout));
  drop = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& key_valid) {
  auto h = norm1(x);
  auto y = x + drop(attn(h, h, key_valid).output);
  return y + drop(ffn(norm2(y)));
}

WindowBlockImpl::WindowBlockImpl(std::int64_t dim, std::int64_t heads, std::int64_t grid,
                                 std::int64_t window, std::int64_t shift, double mlp_ratio,
                                 double dropout)
    : grid_(grid), window_(window), shift_(shift) {
  if (window <= 0 || window > grid) {
    throw InvalidArgument("window size " + std::to_string(window) + " must lie in [1, grid side " +
                          std::to_string(grid) + "]");
  }
  if (window == grid) shift_ = 0;  // a single window sees everything; shifting is meaningless
  if (shift_ < 0 || shift_ >= window_) throw InvalidArgument("shift must lie in [0, window)");
  padded_ = (grid + window - 1) / window * window;

  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  attn = register_module("attn", MultiHeadAttention(dim, heads, dropout));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  ffn = register_module("ffn", FeedForward(dim, static_cast<std::int64_t>(dim * mlp_ratio), dropout));
  drop = register_module("drop", torch::nn::Dropout(dropout));

  if (shift_ == 0 && padded_ == grid_) return;

  // Region labels on the shifted layout plus validity of padded cells.
  auto region = torch::zeros({padded_, padded_}, torch::kLong);
  auto valid = torch::zeros({padded_, padded_}, torch::kBool);
  valid.slice(0, 0, grid_).slice(1, 0, grid_).fill_(true);
  if (shift_ > 0) {
    valid = torch::roll(valid, {-shift_, -shift_}, {0, 1});
    const std::int64_t bounds[] = {0, padded_ - window_, padded_ - shift_, padded_};
    std::int64_t label = 0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        region.slice(0, bounds[i], bounds[i + 1]).slice(1, bounds[j], bounds[j + 1]).fill_(label++);
      }
    }
  }
  const auto nw = padded_ / window_;
  auto part = [&](const torch::Tensor& t) {
    return t.view({nw, window_, nw, window_}).permute({0, 2, 1, 3}).reshape({nw * nw, window_ * window_});
  };
  auto r = part(region);
  auto v = part(valid);
  allowed_ = r.unsqueeze(2).eq(r.unsqueeze(1)).logical_and(v.unsqueeze(1));  // nW x q x k
}

torch::Tensor WindowBlockImpl::window_attention(const torch::Tensor& x) {
  const auto B = x.size(0), d = x.size(2);
  auto g = x.view({B, grid_, grid_, d});
  if (padded_ != grid_) {
    g = torch::constant_pad_nd(g, {0, 0, 0, padded_ - grid_, 0, padded_ - grid_});
  }
  if (shift_ > 0) g = torch::roll(g, {-shift_, -shift_}, {1, 2});
  const auto nw = padded_ / window_;
  const auto nt = window_ * window_;
  auto windows = g.view({B, nw, window_, nw, window_, d})
                     .permute({0, 1, 3, 2, 4, 5})
                     .reshape({B * nw * nw, nt, d});
  torch::Tensor allowed;
  if (allowed_.defined()) {
    allowed = allowed_.unsqueeze(0).expand({B, nw * nw, nt, nt}).reshape({B * nw * nw, 1, nt, nt});
  }
  auto out = attn->forward(windows, windows, {}, allowed).output;
  out = out.view({B, nw, nw, window_, window_, d}).permute({0, 1, 3, 2, 4, 5}).reshape({B, padded_, padded_, d});
  if (shift_ > 0) out = torch::roll(out, {shift_, shift_}, {1, 2});
  if (padded_ != grid_) out = out.slice(1, 0, grid_).slice(2, 0, grid_);
  return out.reshape({B, grid_ * grid_, d});
}

torch::Tensor WindowBlockImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 3 || x.size(1) != grid_ * grid_) {
    throw ShapeError("window block expects B x " + std::to_string(grid_ * grid_) + " x d tokens");
  }
  auto y = x + drop(window_attention(norm1(x)));
  return y + drop(ffn(norm2(y)));
}

torch::Tensor masked_mean(const torch::Tensor& x, const torch::Tensor& valid) {
  if (!valid.defined()) return x.mean(1);
  auto w = valid.to(x.dtype()).unsqueeze(-1);  // B x N x 1
  auto denom = w.sum(1).clamp_min(1.0);
  return (x * w).sum(1) / denom;
}

}  // namespace medctx::nn
