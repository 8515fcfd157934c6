#include "medctx/model/caption_decoder.hpp"

#include <algorithm>

#include "medctx/core/errors.hpp"
#include "medctx/nn/layers.hpp"
#include "medctx/text/tokenizer.hpp"

namespace medctx::model {

CaptionDecoderImpl::CaptionDecoderImpl(int vocab_size, int feature_dim, int embed_dim, int hidden_dim)
    : vocab_size_(vocab_size) {
  init = register_module("init", torch::nn::Linear(feature_dim, hidden_dim));
  context = register_module("context", torch::nn::Linear(feature_dim, embed_dim));
  embed = register_module("embed", torch::nn::Embedding(vocab_size, embed_dim));
  gru = register_module("gru", torch::nn::GRU(torch::nn::GRUOptions(2 * embed_dim, hidden_dim).batch_first(true)));
  out = register_module("out", torch::nn::Linear(hidden_dim, vocab_size));
}

torch::Tensor CaptionDecoderImpl::forward(const torch::Tensor& pooled, const torch::Tensor& inputs) {
  if (pooled.dim() != 2 || inputs.dim() != 2 || pooled.size(0) != inputs.size(0)) {
    throw ShapeError("caption decoder expects B x d features and B x L ids");
  }
  auto h0 = torch::tanh(init(pooled)).unsqueeze(0);
  auto ctx = context(pooled).unsqueeze(1).expand({-1, inputs.size(1), -1});
  auto x = torch::cat({embed(inputs), ctx}, -1);
  auto [seq, h] = gru(x, h0);
  return out(seq);
}

std::vector<std::vector<int>> CaptionDecoderImpl::greedy(const torch::Tensor& pooled, int max_len) {
  torch::NoGradGuard guard;
  const auto B = pooled.size(0);
  auto h = torch::tanh(init(pooled)).unsqueeze(0);
  auto ctx = context(pooled).unsqueeze(1);
  auto token = torch::full({B, 1}, text::kBosId, torch::kLong);
  std::vector<std::vector<int>> result(static_cast<std::size_t>(B));
  std::vector<bool> done(static_cast<std::size_t>(B), false);
  for (int step = 0; step < max_len; ++step) {
    auto x = torch::cat({embed(token), ctx}, -1);
    auto [seq, h_next] = gru(x, h);
    h = h_next;
    // argmax returns the first maximum, i.e. ties go to the lower id
    auto next = out(seq.squeeze(1)).argmax(-1);
    auto acc = next.accessor<std::int64_t, 1>();
    bool all_done = true;
    for (std::int64_t b = 0; b < B; ++b) {
      if (done[b]) continue;
      const int id = static_cast<int>(acc[b]);
      if (id == text::kEosId) {
        done[b] = true;
      } else {
        result[b].push_back(id);
        all_done = false;
      }
    }
    if (all_done) break;
    token = next.unsqueeze(1);
  }
  return result;
}

CaptionBatch make_caption_batch(const std::vector<std::vector<int>>& captions, int max_len) {
  if (max_len < 2) throw InvalidArgument("caption length must be >= 2");
  const auto B = static_cast<std::int64_t>(captions.size());
  auto inputs = torch::full({B, max_len}, text::kPadId, torch::kLong);
  auto targets = torch::full({B, max_len}, -100, torch::kLong);
  auto ia = inputs.accessor<std::int64_t, 2>();
  auto ta = targets.accessor<std::int64_t, 2>();
  for (std::int64_t b = 0; b < B; ++b) {
    const auto& ids = captions[b];
    const int n = std::min<int>(static_cast<int>(ids.size()), max_len - 1);
    ia[b][0] = text::kBosId;
    for (int i = 0; i < n; ++i) {
      ia[b][i + 1] = ids[i];
      ta[b][i] = ids[i];
    }
    ta[b][n] = text::kEosId;
  }
  return {inputs, targets};
}

}  // namespace medctx::model
