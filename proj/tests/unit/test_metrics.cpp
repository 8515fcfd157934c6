#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "medctx/core/errors.hpp"
#include "medctx/eval/calibration.hpp"
#include "medctx/eval/nlg_metrics.hpp"
#include "medctx/eval/seg_metrics.hpp"
#include "support.hpp"

using namespace medctx;
using namespace medctx::eval;

namespace {

// Equal-width-bin ECE by direct bin membership tests.
double ece_oracle(const std::vector<double>& c, const std::vector<double>& a, int bins) {
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins, hi = static_cast<double>(b + 1) / bins;
    double sc = 0.0, sa = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const bool in = (c[i] >= lo && c[i] < hi) || (b == bins - 1 && c[i] == 1.0);
      if (!in) continue;
      sc += c[i];
      sa += a[i];
      ++n;
    }
    if (n > 0) total += std::abs(sc - sa) / static_cast<double>(c.size());
  }
  return total;
}

}  // namespace

TEST(SegMetrics, MatchPixelSetOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const double dp = trial % 5 == 0 ? 0.0 : 0.3, dg = trial % 7 == 0 ? 0.0 : 0.4;
    const auto p = support::random_mask(rng, 12, 9, dp), g = support::random_mask(rng, 12, 9, dg);
    const auto m = seg_metrics(p, g);
    const auto o = support::brute_mask_metrics(p, g);
    EXPECT_NEAR(m.dice, o.dice, 1e-12);
    EXPECT_NEAR(m.iou, o.iou, 1e-12);
    EXPECT_NEAR(m.pixel_acc, o.pixel_acc, 1e-12);
    EXPECT_NEAR(m.hausdorff, o.hausdorff, 1e-9);
  }
}

TEST(SegMetrics, HandExamples) {
  Mask a(4, 4, 0), b(4, 4, 0);
  a(0, 0) = a(0, 1) = 1;
  b(0, 1) = b(0, 2) = 1;
  const auto m = seg_metrics(a, b);
  EXPECT_DOUBLE_EQ(m.dice, 0.5);
  EXPECT_DOUBLE_EQ(m.iou, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.pixel_acc, 14.0 / 16.0);
  EXPECT_DOUBLE_EQ(m.hausdorff, 1.0);
  const auto empty = seg_metrics(Mask(4, 4, 0), Mask(4, 4, 0));
  EXPECT_EQ(empty.dice, 1.0);
  EXPECT_EQ(empty.iou, 1.0);
  EXPECT_EQ(empty.hausdorff, 0.0);
  EXPECT_DOUBLE_EQ(seg_metrics(a, Mask(4, 4, 0)).hausdorff, std::hypot(4.0, 4.0));
  EXPECT_THROW(seg_metrics(Mask(4, 4), Mask(4, 5)), ShapeError);
}

TEST(SegMetrics, BoundaryMatchesNeighbourOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = support::random_mask(rng, 10, 13, 0.6);
    const auto b = boundary(m);
    Mask expected(10, 13, 0);
    for (auto [y, x] : support::brute_boundary(m)) expected(y, x) = 1;
    EXPECT_EQ(b, expected);
  }
}

TEST(SegMetrics, DistanceTransformMatchesBruteForce) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sites = support::random_mask(rng, 9, 14, 0.08);
    const auto d = squared_distance_transform(sites);
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 14; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (int v = 0; v < 9; ++v) {
          for (int u = 0; u < 14; ++u) {
            if (sites(v, u)) best = std::min(best, static_cast<double>((y - v) * (y - v) + (x - u) * (x - u)));
          }
        }
        EXPECT_EQ(d(y, x), best);
      }
    }
  }
}

TEST(Calibration, EceAndBrierMatchOracle) {
  Rng rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> c(300), a(300);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = u(rng);
    a[i] = u(rng);
  }
  c[0] = 1.0;
  c[1] = 0.0;
  c[2] = 1.0 / 15.0;
  for (int bins : {1, 10, 15}) {
    const auto m = calibration_metrics(c, a, bins);
    EXPECT_NEAR(m.ece, ece_oracle(c, a, bins), 1e-12) << bins;
    double brier = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) brier += (c[i] - a[i]) * (c[i] - a[i]);
    EXPECT_NEAR(m.brier, brier / c.size(), 1e-12);
  }
}

TEST(Calibration, HandExample) {
  // two bins: {0.2 -> 0.0} and {0.9, 0.7 -> 1.0, 0.6}
  const auto m = calibration_metrics({0.2, 0.9, 0.7}, {0.0, 1.0, 0.6}, 2);
  EXPECT_NEAR(m.ece, (0.2 + 0.0) / 3.0, 1e-12);
  EXPECT_NEAR(m.brier, (0.04 + 0.01 + 0.01) / 3.0, 1e-12);
  EXPECT_THROW(calibration_metrics({0.5}, {0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(calibration_metrics({}, {}), InvalidArgument);
}

TEST(Calibration, TemperatureMapping) {
  for (double c : {0.1, 0.5, 0.73, 0.99}) EXPECT_NEAR(apply_temperature(c, 1.0), c, 1e-12);
  const double t = 0.4, c = 0.9;
  EXPECT_NEAR(apply_temperature(c, t), 1.0 / (1.0 + std::pow((1.0 - c) / c, t)), 1e-12);
  EXPECT_NEAR(apply_temperature(0.5, 3.0), 0.5, 1e-12);
  EXPECT_TRUE(std::isfinite(apply_temperature(1.0, 0.5)));
  EXPECT_LT(apply_temperature(1.0, 0.5), 1.0);
}

TEST(Calibration, CalibratedScoresKeepTemperatureNearOne) {
  Rng rng(15);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<double> c(500), a(500);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = u(rng);
    a[i] = std::clamp(c[i] + noise(rng), 0.0, 1.0);
  }
  const auto fit = fit_temperature(c, a);
  EXPECT_GE(fit.temperature, 0.9);
  EXPECT_LE(fit.temperature, 1.1);
  EXPECT_LE(fit.ece_after, fit.ece_before);
}

TEST(Calibration, RecoversASharpeningTemperature) {
  Rng rng(16);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<double> c(400), a(400);
  for (std::size_t i = 0; i < c.size(); ++i) {
    a[i] = u(rng);
    c[i] = 1.0 / (1.0 + std::exp(-std::log(a[i] / (1.0 - a[i])) / 0.5));  // overconfident by a factor 2
  }
  const auto fit = fit_temperature(c, a);
  EXPECT_NEAR(fit.temperature, 0.5, 0.03);
  EXPECT_LT(fit.ece_after, 0.01);
  EXPECT_NEAR(fit.ece_before, ece_oracle(c, a, 15), 1e-12);
}

TEST(Nlg, MetricTokens) {
  EXPECT_EQ(metric_tokens("BI-RADS 4: Suspicious."),
            (std::vector<std::string>{"bi", "-", "rads", "4", ":", "suspicious", "."}));
  EXPECT_TRUE(metric_tokens("   ").empty());
}

TEST(Nlg, BleuHandExamples) {
  const double p = 5.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0;
  EXPECT_NEAR(bleu4({"the cat sat on the mat"}, {"the cat sat on a mat"}), std::pow(p, 0.25), 1e-12);
  EXPECT_NEAR(bleu4({"the cat sat on"}, {"the cat sat on the mat"}), std::exp(1.0 - 6.0 / 4.0), 1e-12);
  EXPECT_NEAR(bleu4({"a b c d e"}, {"a b c d e"}), 1.0, 1e-12);
  EXPECT_EQ(bleu4({"a b c"}, {"x y z w"}), 0.0);
}

TEST(Nlg, BleuPoolsCountsOverTheCorpus) {
  // pooled: 1-gram 9/10, 2-gram 7/8, 3-gram 5/6, 4-gram 3/4, lengths equal
  const std::vector<std::string> c = {"a b c d e", "p q r s t"}, r = {"a b c d e", "p q r s x"};
  const double expected = std::pow(9.0 / 10.0 * 7.0 / 8.0 * 5.0 / 6.0 * 3.0 / 4.0, 0.25);
  EXPECT_NEAR(bleu4(c, r), expected, 1e-12);
}

TEST(Nlg, CorpusOrderInvariance) {
  const std::vector<std::string> c = {"mass in the left breast", "benign cyst seen here today", "no finding at all in this study"};
  const std::vector<std::string> r = {"mass in the right breast", "simple benign cyst seen here", "no suspicious finding in this study"};
  const std::vector<std::string> c2 = {c[2], c[0], c[1]}, r2 = {r[2], r[0], r[1]};
  EXPECT_NEAR(bleu4(c, r), bleu4(c2, r2), 1e-12);
  EXPECT_NEAR(cider(c, r), cider(c2, r2), 1e-12);
  EXPECT_NEAR(meteor(c, r), meteor(c2, r2), 1e-12);
}

TEST(Nlg, CiderIdentityAndDisjoint) {
  const std::vector<std::string> refs = {"alpha beta gamma delta epsilon", "one two three four five",
                                         "red green blue cyan magenta"};
  EXPECT_NEAR(cider(refs, refs), 1.0, 1e-12);
  EXPECT_EQ(cider({"zz yy xx ww vv", "zz yy xx ww vv", "zz yy xx ww vv"}, refs), 0.0);
}

TEST(Nlg, MeteorHandExamples) {
  EXPECT_NEAR(meteor({"benign mass"}, {"benign mass"}), 1.0, 1e-12);
  // P = 1, R = 1/2
  EXPECT_NEAR(meteor({"benign mass"}, {"benign mass is round"}), 10.0 * 0.5 / (0.5 + 9.0), 1e-12);
  // stem match: masses ~ mass
  EXPECT_NEAR(meteor({"masses"}, {"mass"}), 1.0, 1e-12);
  EXPECT_EQ(meteor({"cyst"}, {"mass"}), 0.0);
  EXPECT_EQ(stem("calcifications"), "calcific");
  EXPECT_EQ(stem("studies"), "study");
  EXPECT_EQ(stem("mass"), stem("masses"));
  EXPECT_EQ(stem("case"), stem("cases"));
  EXPECT_EQ(stem("margin"), stem("margins"));
}

TEST(Nlg, ClipAlignment) {
  const auto a = torch::tensor({{1.0, 0.0}, {0.0, 2.0}}, torch::kDouble);
  EXPECT_NEAR(clip_alignment(a, a), 1.0, 1e-12);
  EXPECT_NEAR(clip_alignment(a, -a), 0.0, 1e-12);
  const auto b = torch::tensor({{0.0, 1.0}, {0.0, 0.0}}, torch::kDouble);
  // orthogonal pair and zero pair both contribute 0.5
  EXPECT_NEAR(clip_alignment(a, b), 0.5, 1e-12);
  EXPECT_THROW(clip_alignment(a, torch::zeros({3, 2})), ShapeError);
}

TEST(Nlg, BiradsAccuracy) {
  const std::vector<std::string> texts = {"BI-RADS 2: Benign finding.", "BI-RADS 3: Probably benign.",
                                          "BI-RADS 5: Highly suggestive of malignancy.", "no category"};
  EXPECT_DOUBLE_EQ(birads_accuracy(texts, {2, 3, 5, 4}), 3.0 / 4.0);
  const auto logits = torch::tensor({{1.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 2.0, 2.0}, {0.0, 0.0, 0.0, 0.0}});
  // argmax with ties to the lower category: 2, 4, 2
  EXPECT_DOUBLE_EQ(birads_accuracy(logits, {2, 4, 3}), 2.0 / 3.0);
}
