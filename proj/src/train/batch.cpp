#include "medctx/train/batch.hpp"

#include <algorithm>
#include <cstring>

#include "medctx/core/errors.hpp"

namespace medctx::train {

torch::Tensor image_to_tensor(const Image& image) {
  auto t = torch::empty({1, image.height(), image.width()}, torch::kFloat);
  std::memcpy(t.data_ptr<float>(), image.data(), image.size() * sizeof(float));
  return t;
}

torch::Tensor mask_to_tensor(const Mask& mask) {
  auto t = torch::empty({1, mask.height(), mask.width()}, torch::kUInt8);
  std::memcpy(t.data_ptr<std::uint8_t>(), mask.data(), mask.size());
  return t.to(torch::kFloat);
}

std::vector<Example> prepare_examples(const std::vector<data::UltrasoundSample>& samples, int image_size,
                                      const text::Vocabulary& vocab) {
  std::vector<Example> out;
  out.reserve(samples.size());
  data::AugmentOptions opts;
  opts.output_size = image_size;
  Rng unused(0);
  for (const auto& s : samples) {
    Example e;
    e.sample = &s;
    e.tokens = text::tokenize_report(s.record.report_text, vocab);
    e.caption = text::tokenize(s.record.report_text, vocab);
    e.birads_index = data::birads_to_index(s.record.birads);
    e.pathology = static_cast<std::int64_t>(s.record.pathology);
    e.histology = static_cast<std::int64_t>(s.record.histology);
    e.laterality = static_cast<std::int64_t>(s.record.laterality);
    e.val_view = data::preprocess(s, data::Mode::val, unused, opts);
    out.push_back(std::move(e));
  }
  return out;
}

Batch make_batch(const std::vector<Example>& examples, const std::vector<std::size_t>& indices, Rng& rng,
                 const BatchOptions& options) {
  if (indices.empty()) throw InvalidArgument("empty batch");
  const auto B = static_cast<std::int64_t>(indices.size());
  std::vector<torch::Tensor> images, masks;
  std::vector<text::TextTokens> tokens;
  std::vector<std::vector<int>> captions;
  Batch batch;
  auto birads = torch::empty({B}, torch::kLong);
  auto pathology = torch::empty({B}, torch::kLong);
  auto histology = torch::empty({B}, torch::kLong);
  auto laterality = torch::empty({B}, torch::kLong);
  for (std::int64_t b = 0; b < B; ++b) {
    const auto& e = examples.at(indices[b]);
    if (options.augment) {
      auto view = data::preprocess(*e.sample, data::Mode::train, rng, options.augment_options);
      images.push_back(image_to_tensor(view.image));
      masks.push_back(mask_to_tensor(view.mask));
    } else {
      images.push_back(image_to_tensor(e.val_view.image));
      masks.push_back(mask_to_tensor(e.val_view.mask));
    }
    tokens.push_back(e.tokens);
    captions.push_back(e.caption);
    birads[b] = e.birads_index;
    pathology[b] = e.pathology;
    histology[b] = e.histology;
    laterality[b] = e.laterality;
    batch.case_ids.push_back(e.sample->record.case_id);
  }
  batch.inputs.images = torch::stack(images);
  batch.inputs.tokens = model::to_token_batch(tokens);
  batch.inputs.structured = {birads, pathology, laterality};
  batch.masks = torch::stack(masks);
  batch.clinical = {pathology, birads, histology};
  batch.caption = model::make_caption_batch(captions, options.caption_len);
  return batch;
}

torch::Tensor make_views(const std::vector<Example>& examples, const std::vector<std::size_t>& indices, Rng& rng,
                         const data::AugmentOptions& options) {
  std::vector<torch::Tensor> images;
  for (auto i : indices) {
    images.push_back(image_to_tensor(data::preprocess(*examples.at(i).sample, data::Mode::train, rng, options).image));
  }
  return torch::stack(images);
}

std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& order, int size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(size)) {
    const auto end = std::min(order.size(), i + static_cast<std::size_t>(size));
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace medctx::train
