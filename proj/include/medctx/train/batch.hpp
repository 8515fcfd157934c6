#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "medctx/data/preprocess.hpp"
#include "medctx/losses/losses.hpp"
#include "medctx/model/caption_decoder.hpp"
#include "medctx/model/medctx_model.hpp"
#include "medctx/text/tokenizer.hpp"

namespace medctx::train {

/// One corpus entry with everything that does not depend on augmentation
/// computed once: tokens, caption ids, category codes and the val-mode view.
struct Example {
  const data::UltrasoundSample* sample = nullptr;
  text::TextTokens tokens;
  std::vector<int> caption;
  std::int64_t birads_index = 0;
  std::int64_t pathology = 0;
  std::int64_t histology = 0;
  std::int64_t laterality = 0;
  data::Preprocessed val_view;
};

/// Keeps a pointer into `samples`; the samples must outlive the examples.
std::vector<Example> prepare_examples(const std::vector<data::UltrasoundSample>& samples, int image_size,
                                      const text::Vocabulary& vocab = text::Vocabulary::builtin());

struct Batch {
  model::ModelInputs inputs;
  torch::Tensor masks;  // B x 1 x S x S float
  losses::ClinicalTargets clinical;
  model::CaptionBatch caption;
  std::vector<std::string> case_ids;

  [[nodiscard]] std::int64_t size() const { return masks.size(0); }
};

struct BatchOptions {
  bool augment = false;
  int caption_len = 64;
  data::AugmentOptions augment_options;
};

/// Builds a batch from examples[indices]. With augment set, each sample draws
/// its augmentation from `rng` in index order.
Batch make_batch(const std::vector<Example>& examples, const std::vector<std::size_t>& indices, Rng& rng,
                 const BatchOptions& options);

/// Images only, one augmented view per index (for self-supervised pairs).
torch::Tensor make_views(const std::vector<Example>& examples, const std::vector<std::size_t>& indices, Rng& rng,
                         const data::AugmentOptions& options);

torch::Tensor image_to_tensor(const Image& image);
torch::Tensor mask_to_tensor(const Mask& mask);

/// Consecutive chunks of `order` of length `size`; the final chunk may be shorter.
std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& order, int size);

}  // namespace medctx::train
