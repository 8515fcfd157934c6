#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "medctx/explain/explain.hpp"
#include "test_paths.hpp"

using namespace medctx;
using namespace medctx::explain;

namespace {

model::PredictionBundle bundle_with(const std::vector<float>& birads, const std::vector<float>& path,
                                    const std::vector<float>& hist, double confidence, const Mask& mask) {
  model::PredictionBundle b;
  b.birads_logits = torch::tensor(birads).view({1, -1});
  b.pathology_logits = torch::tensor(path).view({1, -1});
  b.histology_logits = torch::tensor(hist).view({1, -1});
  b.confidence = torch::full({1, 1}, confidence);
  auto seg = torch::full({1, 1, mask.height(), mask.width()}, -5.0f);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(y, x)) seg[0][0][y][x] = 5.0f;
    }
  }
  b.seg_logits = seg;
  return b;
}

Mask blob(int size, int x0, int x1) {
  Mask m(size, size, 0);
  for (int y = 2; y < 5; ++y) {
    for (int x = x0; x < x1; ++x) m(y, x) = 1;
  }
  return m;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ConfidencePhrase, Bands) {
  EXPECT_EQ(confidence_phrase(0.0), "Low model confidence; recommend expert review.");
  EXPECT_EQ(confidence_phrase(0.4999), "Low model confidence; recommend expert review.");
  EXPECT_EQ(confidence_phrase(0.5), "Moderate confidence.");
  EXPECT_EQ(confidence_phrase(0.8), "Moderate confidence.");
  EXPECT_EQ(confidence_phrase(0.8001), "High confidence.");
  EXPECT_EQ(confidence_phrase(1.0), "High confidence.");
}

TEST(ArgmaxLower, TiesGoToTheLowerIndex) {
  EXPECT_EQ(argmax_lower(torch::tensor({0.0, 0.0, 0.0, 0.0})), 0);
  EXPECT_EQ(argmax_lower(torch::tensor({0.1, 0.7, 0.7, 0.2})), 1);
  EXPECT_EQ(argmax_lower(torch::tensor({-1.0, -2.0, 3.0})), 2);
  EXPECT_THROW(argmax_lower(torch::zeros({0})), InvalidArgument);
}

TEST(ReadPrediction, HeadsAndMaskSide) {
  const auto left = bundle_with({0, 0, 3, 1}, {0, 2}, {0, 4, 0, 0}, 0.9, blob(16, 1, 5));
  const auto p = read_prediction(left, 0);
  EXPECT_EQ(p.birads, 4);
  EXPECT_EQ(p.pathology, data::Pathology::malignant);
  EXPECT_EQ(p.histology, static_cast<data::Histology>(1));
  EXPECT_EQ(p.laterality, data::Laterality::left);
  EXPECT_NEAR(p.confidence, 0.9, 1e-6);
  const auto right = bundle_with({0, 0, 3, 1}, {0, 2}, {0, 4, 0, 0}, 0.9, blob(16, 10, 15));
  EXPECT_EQ(read_prediction(right, 0).laterality, data::Laterality::right);
  RecordOverrides o;
  o.laterality = data::Laterality::right;
  o.confidence = 0.3;
  const auto overridden = read_prediction(left, 0, o);
  EXPECT_EQ(overridden.laterality, data::Laterality::right);
  EXPECT_EQ(overridden.confidence, 0.3);
}

TEST(ReadPrediction, EmptyMaskFallsBackToAttention) {
  auto b = bundle_with({1, 0, 0, 0}, {1, 0}, {0, 0, 0, 1}, 0.5, Mask(16, 16, 0));
  auto att = torch::zeros({1, 4, 4});
  att[0][1][0] = 1.0;  // weight in the left column
  b.attention_map = att;
  EXPECT_EQ(read_prediction(b, 0).laterality, data::Laterality::left);
  att.zero_();
  att[0][1][3] = 1.0;
  b.attention_map = att;
  EXPECT_EQ(read_prediction(b, 0).laterality, data::Laterality::right);
}

TEST(Structured, TemplateThenConfidence) {
  StructuredPrediction p;
  p.birads = 3;
  p.pathology = data::Pathology::benign;
  p.histology = data::Histology::cyst;
  p.laterality = data::Laterality::left;
  p.confidence = 0.95;
  data::ClinicalRecord r;
  r.birads = 3;
  r.pathology = data::Pathology::benign;
  r.histology = data::Histology::cyst;
  r.laterality = data::Laterality::left;
  EXPECT_EQ(generate_structured(p), data::synthesize_birads_text(r) + " High confidence.");
}

TEST(Compose, StructuredFirstThenNarrative) {
  EXPECT_EQ(compose("round mass", "BI-RADS 3: x."), "BI-RADS 3: x. Narrative: round mass");
  EXPECT_EQ(compose("", "BI-RADS 3: x."), "BI-RADS 3: x.");
}

TEST(ExplainCase, FieldsAgree) {
  const auto b = bundle_with({0, 0, 0, 2}, {0, 1}, {2, 0, 0, 0}, 0.2, blob(16, 10, 15));
  const auto e = explain_case(b, 0, {"irregular mass", false});
  EXPECT_EQ(e.neural_text, "irregular mass");
  EXPECT_EQ(e.confidence_phrase, "Low model confidence; recommend expert review.");
  EXPECT_EQ(e.composed, compose(e.neural_text, e.structured_text));
  EXPECT_EQ(data::parse_birads_category(e.structured_text), 5);
  const auto j = nlohmann::json::parse(to_ndjson("case_7", e, 0.2, true));
  EXPECT_EQ(j.at("case_id"), "case_7");
  EXPECT_EQ(j.at("composed"), e.composed);
  EXPECT_EQ(j.at("untrained"), true);
}

// Snapshot of every structured report the generator can emit. Regenerate with
// MEDCTX_UPDATE_GOLDEN=1 after an intended wording change.
TEST(Structured, GoldenReports) {
  std::string all;
  for (int b = data::kMinBirads; b <= data::kMaxBirads; ++b) {
    for (int path = 0; path < 2; ++path) {
      for (int h = 0; h < data::kNumHistology; ++h) {
        for (auto side : {data::Laterality::left, data::Laterality::right}) {
          for (double c : {0.3, 0.6, 0.9}) {
            StructuredPrediction p;
            p.birads = b;
            p.pathology = static_cast<data::Pathology>(path);
            p.histology = static_cast<data::Histology>(h);
            p.laterality = side;
            p.confidence = c;
            all += generate_structured(p) + "\n";
          }
        }
      }
    }
  }
  const std::filesystem::path golden = std::filesystem::path(MEDCTX_GOLDEN_DIR) / "structured_reports.txt";
  if (std::getenv("MEDCTX_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(golden) << all;
    GTEST_SKIP() << "golden file rewritten";
  }
  ASSERT_TRUE(std::filesystem::exists(golden)) << golden;
  EXPECT_EQ(all, read_file(golden));
}
