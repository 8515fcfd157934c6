#include "medctx/model/text_encoder.hpp"

#include "medctx/core/errors.hpp"
#include "medctx/data/clinical.hpp"

namespace medctx::model {
namespace {

void check_ids(const torch::Tensor& ids, std::int64_t upper, const char* what) {
  if (ids.numel() == 0) return;
  const auto lo = ids.min().item<std::int64_t>();
  const auto hi = ids.max().item<std::int64_t>();
  if (lo < 0 || hi >= upper) {
    throw InvalidArgument(std::string(what) + " id out of vocabulary (range [0," +
                          std::to_string(upper) + "))");
  }
}

}  // namespace

TokenBatch to_token_batch(const std::vector<text::TextTokens>& tokens) {
  const auto B = static_cast<std::int64_t>(tokens.size());
  auto ids = torch::empty({B, text::kMaxTokens}, torch::kLong);
  auto flags = torch::empty({B, text::kMaxTokens}, torch::kBool);
  auto ia = ids.accessor<std::int64_t, 2>();
  auto fa = flags.accessor<bool, 2>();
  for (std::int64_t b = 0; b < B; ++b) {
    for (int i = 0; i < text::kMaxTokens; ++i) {
      ia[b][i] = tokens[b].ids[i];
      fa[b][i] = tokens[b].attention_flags[i] != 0;
    }
  }
  return {ids, flags};
}

TextEncoderImpl::TextEncoderImpl(int vocab_size, int model_dim, int layers, int heads, int out_dim,
                                 double dropout)
    : vocab_size_(vocab_size) {
  token_embed = register_module("token_embed", torch::nn::Embedding(vocab_size, model_dim));
  pos_embed = register_parameter("pos_embed", torch::zeros({1, text::kMaxTokens, model_dim}));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < layers; ++i) blocks->push_back(nn::TransformerBlock(model_dim, heads, 4.0, dropout));
  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({model_dim})));
  proj = register_module("proj", torch::nn::Linear(model_dim, out_dim));
  nn::init_transformer_weights(*this);
  torch::NoGradGuard guard;
  nn::trunc_normal_(token_embed->weight, 0.0, 0.02, -0.04, 0.04);
  nn::trunc_normal_(pos_embed, 0.0, 0.02, -0.04, 0.04);
}

torch::Tensor TextEncoderImpl::forward(const TokenBatch& tokens) {
  if (tokens.ids.dim() != 2 || tokens.ids.size(1) != text::kMaxTokens ||
      tokens.flags.sizes() != tokens.ids.sizes()) {
    throw ShapeError("text encoder expects B x 128 ids and flags");
  }
  check_ids(tokens.ids, vocab_size_, "token");
  auto x = token_embed(tokens.ids) + pos_embed;
  for (const auto& block : *blocks) x = block->as<nn::TransformerBlock>()->forward(x, tokens.flags);
  return proj(norm(x));
}

StructuredEmbeddingImpl::StructuredEmbeddingImpl(int out_dim) {
  birads = register_module("birads", torch::nn::Embedding(data::kBiradsVocab, out_dim));
  pathology = register_module("pathology", torch::nn::Embedding(data::kPathologyVocab, out_dim));
  laterality = register_module("laterality", torch::nn::Embedding(data::kLateralityVocab, out_dim));
  // torch::nn::Embedding's default N(0, 1) initialization is kept
}

torch::Tensor StructuredEmbeddingImpl::forward(const StructuredBatch& desc) {
  check_ids(desc.birads, data::kBiradsVocab, "birads");
  check_ids(desc.pathology, data::kPathologyVocab, "pathology");
  check_ids(desc.laterality, data::kLateralityVocab, "laterality");
  return torch::stack({birads(desc.birads), pathology(desc.pathology), laterality(desc.laterality)}, 1);
}

torch::Tensor combine(const torch::Tensor& text_emb, const torch::Tensor& struct_emb) {
  if (text_emb.dim() != 3 || struct_emb.dim() != 3 || text_emb.size(0) != struct_emb.size(0) ||
      text_emb.size(2) != struct_emb.size(2) || text_emb.size(1) != text::kMaxTokens ||
      struct_emb.size(1) != kStructuredTokens) {
    throw ShapeError("combine expects B x 128 x d text and B x 3 x d structured embeddings");
  }
  return torch::cat({text_emb, struct_emb}, 1);
}

}  // namespace medctx::model
