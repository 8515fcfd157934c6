#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "medctx/data/clinical.hpp"
#include "medctx/model/medctx_model.hpp"
#include "medctx/text/tokenizer.hpp"

namespace medctx::explain {

struct Explanation {
  std::string neural_text;
  std::string structured_text;
  std::string composed;
  std::string confidence_phrase;
};

/// Head decisions for one case. Ties in any argmax go to the lower class index.
struct StructuredPrediction {
  int birads = 2;
  data::Pathology pathology = data::Pathology::benign;
  data::Histology histology = data::Histology::not_available;
  data::Laterality laterality = data::Laterality::right;
  double confidence = 0.5;
};

/// Values that replace predicted fields, e.g. a laterality known from the
/// request metadata.
struct RecordOverrides {
  std::optional<data::Laterality> laterality;
  std::optional<double> confidence;
};

/// Index of the first maximum.
int argmax_lower(const torch::Tensor& row);

/// Reads row `index` of the bundle. Laterality is the side of the predicted
/// mask's centroid (left half of the image = left); with an empty mask it falls
/// back to the attention map centroid.
StructuredPrediction read_prediction(const model::PredictionBundle& bundle, std::int64_t index,
                                     const RecordOverrides& overrides = {});

/// "Low model confidence; recommend expert review." below 0.5,
/// "Moderate confidence." up to 0.8, "High confidence." above.
std::string_view confidence_phrase(double confidence);

/// Template report for the prediction followed by the confidence sentence.
std::string generate_structured(const StructuredPrediction& prediction);
std::string generate_structured(const model::PredictionBundle& bundle, std::int64_t index,
                                const RecordOverrides& overrides = {});

struct NeuralText {
  std::string text;
  bool untrained = false;  // the generator had not been fine-tuned when decoding
};

/// Greedy GRU decoding from mean-pooled fused features (B x d), one string per row.
std::vector<NeuralText> generate_neural(model::MedCtx& model, const torch::Tensor& pooled, int max_len,
                                        bool trained, const text::Vocabulary& vocab = text::Vocabulary::builtin());

/// Structured text first, then "Narrative: " and the neural text.
std::string compose(std::string_view neural, std::string_view structured);

Explanation explain_case(const model::PredictionBundle& bundle, std::int64_t index, const NeuralText& neural,
                         const RecordOverrides& overrides = {});

/// One newline-delimited JSON record.
std::string to_ndjson(const std::string& case_id, const Explanation& e, double confidence, bool untrained);

}  // namespace medctx::explain
