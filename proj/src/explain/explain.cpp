#include "medctx/explain/explain.hpp"

#include <nlohmann/json.hpp>

#include "medctx/core/errors.hpp"

namespace medctx::explain {
namespace {

/// x coordinate of the weight centroid of a H x W map, or -1 when empty.
double centroid_x(const torch::Tensor& map) {
  auto w = map.to(torch::kDouble);
  const double total = w.sum().item<double>();
  if (!(total > 0.0)) return -1.0;
  auto xs = torch::arange(map.size(1), torch::kDouble).view({1, -1});
  return (w * xs).sum().item<double>() / total;
}

}  // namespace

int argmax_lower(const torch::Tensor& row) {
  auto r = row.detach().to(torch::kDouble).flatten().contiguous();
  if (r.numel() == 0) throw InvalidArgument("argmax of an empty row");
  const double* v = r.data_ptr<double>();
  int best = 0;
  for (int i = 1; i < r.numel(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

StructuredPrediction read_prediction(const model::PredictionBundle& b, std::int64_t i,
                                     const RecordOverrides& overrides) {
  StructuredPrediction p;
  p.birads = data::index_to_birads(argmax_lower(b.birads_logits[i]));
  p.pathology = static_cast<data::Pathology>(argmax_lower(b.pathology_logits[i]));
  p.histology = static_cast<data::Histology>(std::min(argmax_lower(b.histology_logits[i]), data::kNumHistology - 1));
  p.confidence = overrides.confidence.value_or(b.confidence[i].item<double>());
  if (overrides.laterality) {
    p.laterality = *overrides.laterality;
  } else {
    auto mask = (b.seg_logits[i].detach().squeeze(0) >= 0);
    double cx = centroid_x(mask);
    double width = static_cast<double>(mask.size(1));
    if (cx < 0.0 && b.attention_map.defined()) {
      auto att = b.attention_map[i].detach();
      cx = centroid_x(att);
      width = static_cast<double>(att.size(1));
    }
    p.laterality = (cx >= 0.0 && cx < 0.5 * (width - 1.0)) ? data::Laterality::left : data::Laterality::right;
  }
  return p;
}

std::string_view confidence_phrase(double c) {
  if (c < 0.5) return "Low model confidence; recommend expert review.";
  if (c <= 0.8) return "Moderate confidence.";
  return "High confidence.";
}

std::string generate_structured(const StructuredPrediction& p) {
  data::ClinicalRecord record;
  record.birads = p.birads;
  record.pathology = p.pathology;
  record.histology = p.histology;
  record.laterality = p.laterality;
  return data::synthesize_birads_text(record) + " " + std::string(confidence_phrase(p.confidence));
}

std::string generate_structured(const model::PredictionBundle& bundle, std::int64_t index,
                                const RecordOverrides& overrides) {
  return generate_structured(read_prediction(bundle, index, overrides));
}

std::vector<NeuralText> generate_neural(model::MedCtx& m, const torch::Tensor& pooled, int max_len, bool trained,
                                        const text::Vocabulary& vocab) {
  std::vector<NeuralText> out;
  for (const auto& ids : m->caption->greedy(pooled, max_len)) {
    out.push_back({text::detokenize(ids, vocab), !trained});
  }
  return out;
}

std::string compose(std::string_view neural, std::string_view structured) {
  if (neural.empty()) return std::string(structured);
  return std::string(structured) + " Narrative: " + std::string(neural);
}

Explanation explain_case(const model::PredictionBundle& bundle, std::int64_t index, const NeuralText& neural,
                         const RecordOverrides& overrides) {
  const auto p = read_prediction(bundle, index, overrides);
  Explanation e;
  e.neural_text = neural.text;
  e.structured_text = generate_structured(p);
  e.confidence_phrase = std::string(confidence_phrase(p.confidence));
  e.composed = compose(e.neural_text, e.structured_text);
  return e;
}

std::string to_ndjson(const std::string& case_id, const Explanation& e, double confidence, bool untrained) {
  nlohmann::json j;
  j["case_id"] = case_id;
  j["structured"] = e.structured_text;
  j["neural"] = e.neural_text;
  j["composed"] = e.composed;
  j["confidence"] = confidence;
  if (untrained) j["untrained"] = true;
  return j.dump();
}

}  // namespace medctx::explain
