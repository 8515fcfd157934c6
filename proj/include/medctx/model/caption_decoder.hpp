#pragma once

#include <vector>

#include <torch/torch.h>

namespace medctx::model {

/// GRU report generator. The initial hidden state is tanh(W * mean(F) + b) and
/// the same pooled context is concatenated to every input embedding.
class CaptionDecoderImpl : public torch::nn::Module {
 public:
  CaptionDecoderImpl(int vocab_size, int feature_dim, int embed_dim, int hidden_dim);

  /// Teacher-forced logits. pooled: B x d. inputs: B x L token ids starting
  /// with BOS. Returns B x L x vocab.
  torch::Tensor forward(const torch::Tensor& pooled, const torch::Tensor& inputs);

  /// Greedy decoding, one id sequence per batch row (without BOS/EOS).
  std::vector<std::vector<int>> greedy(const torch::Tensor& pooled, int max_len);

  torch::nn::Linear init{nullptr}, context{nullptr}, out{nullptr};
  torch::nn::Embedding embed{nullptr};
  torch::nn::GRU gru{nullptr};

 private:
  int vocab_size_;
};
TORCH_MODULE(CaptionDecoder);

/// Builds teacher-forcing pairs from tokenized captions: inputs = BOS + ids,
/// targets = ids + EOS, both padded with pad id (targets pad = -100 ignore).
struct CaptionBatch {
  torch::Tensor inputs;   // B x L int64
  torch::Tensor targets;  // B x L int64
};
CaptionBatch make_caption_batch(const std::vector<std::vector<int>>& captions, int max_len);

}  // namespace medctx::model
