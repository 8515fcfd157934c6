#include <cmath>

#include <gtest/gtest.h>

#include "medctx/core/errors.hpp"
#include "medctx/losses/losses.hpp"
#include "support.hpp"

using namespace medctx;
using namespace medctx::losses;

namespace {

model::PredictionBundle uniform_bundle(int batch, int histology_classes = 4) {
  model::PredictionBundle b;
  b.pathology_logits = torch::zeros({batch, 2}, torch::kDouble);
  b.birads_logits = torch::zeros({batch, 4}, torch::kDouble);
  b.histology_logits = torch::zeros({batch, histology_classes}, torch::kDouble);
  return b;
}

ClinicalTargets targets(std::vector<std::int64_t> path, std::vector<std::int64_t> birads,
                        std::vector<std::int64_t> hist) {
  return {torch::tensor(path), torch::tensor(birads), torch::tensor(hist)};
}

}  // namespace

TEST(SegLoss, HandExample) {
  // p = 0.5 everywhere, half the pixels foreground: BCE = ln 2, soft Dice = 1/2
  const auto logits = torch::zeros({1, 1, 2, 2}, torch::kDouble);
  const auto gt = torch::tensor({1.0, 1.0, 0.0, 0.0}, torch::kDouble).view({1, 1, 2, 2});
  EXPECT_NEAR(seg_loss(logits, gt, 0.0).item<double>(), std::log(2.0) + 0.5, 1e-12);
  EXPECT_NEAR(soft_dice(logits, gt, 0.0).item<double>(), 0.5, 1e-12);
}

TEST(SegLoss, ConfidentCorrectPredictionIsNearZero) {
  const auto gt = torch::tensor({1.0, 0.0, 1.0, 0.0}, torch::kDouble).view({1, 1, 2, 2});
  EXPECT_LT(seg_loss((gt * 2 - 1) * 40, gt).item<double>(), 1e-9);
}

TEST(SegLoss, DiceIsPerSampleThenAveraged) {
  auto logits = torch::zeros({2, 1, 2, 2}, torch::kDouble);
  logits[0].fill_(40.0);
  logits[1].fill_(-40.0);
  auto gt = torch::zeros({2, 1, 2, 2}, torch::kDouble);
  gt[0][0][0][0] = 1.0;
  gt[1][0][0][0] = 1.0;
  // sample 0: dice 2/(4+1); sample 1: dice ~0
  const auto d = soft_dice(logits, gt, 0.0);
  EXPECT_NEAR(d[0].item<double>(), 0.4, 1e-12);
  EXPECT_NEAR(d[1].item<double>(), 0.0, 1e-12);
}

TEST(UncLoss, HandExample) {
  const auto U = torch::ones({1, 1, 1, 1}, torch::kDouble);
  const auto logits = torch::zeros({1, 1, 1, 1}, torch::kDouble);
  const auto gt = torch::ones({1, 1, 1, 1}, torch::kDouble);
  EXPECT_NEAR(unc_loss(U, logits, gt, 0.1, 1e-6).item<double>(), 0.5 - 0.1 * std::log(1.0 + 1e-6), 1e-12);
  const auto half = torch::full({1, 1, 1, 1}, 0.25, torch::kDouble);
  EXPECT_NEAR(unc_loss(half, logits, gt, 0.2, 0.0).item<double>(), 0.125 - 0.2 * std::log(0.25), 1e-12);
}

TEST(ClipLoss, OrthonormalPairs) {
  const auto e = torch::eye(2, torch::kDouble);
  EXPECT_NEAR(clip_contrastive_loss(e, e, 1.0).item<double>(), std::log(1.0 + std::exp(-1.0)), 1e-12);
  // rows are normalized internally
  EXPECT_NEAR(clip_contrastive_loss(e * 3, e * 0.5, 1.0).item<double>(), std::log(1.0 + std::exp(-1.0)), 1e-12);
}

TEST(ClipLoss, SymmetricInTheTwoModalities) {
  torch::manual_seed(1);
  const auto a = torch::randn({5, 6}, torch::kDouble), b = torch::randn({5, 6}, torch::kDouble);
  EXPECT_NEAR(clip_contrastive_loss(a, b, 0.07).item<double>(), clip_contrastive_loss(b, a, 0.07).item<double>(),
              1e-12);
}

TEST(ClipLoss, BatchOrderDoesNotMatter) {
  torch::manual_seed(2);
  const auto a = torch::randn({6, 4}, torch::kDouble), b = torch::randn({6, 4}, torch::kDouble);
  const auto perm = torch::randperm(6);
  EXPECT_NEAR(clip_contrastive_loss(a, b, 0.2).item<double>(),
              clip_contrastive_loss(a.index_select(0, perm), b.index_select(0, perm), 0.2).item<double>(), 1e-12);
}

TEST(ClinicalLoss, UniformLogits) {
  const auto b = uniform_bundle(3);
  const auto t = targets({0, 1, 1}, {0, 2, 3}, {1, 0, 3});
  const double expected = 0.4 * std::log(2.0) + 0.2 * std::log(4.0) + 0.1 * std::log(4.0);
  EXPECT_NEAR(clinical_loss(b, t).item<double>(), expected, 1e-12);
}

TEST(ClinicalLoss, WeightsScaleTheirOwnTerm) {
  auto b = uniform_bundle(1);
  b.pathology_logits = torch::tensor({{2.0, 0.0}}, torch::kDouble);
  const auto t = targets({0}, {1}, {2});
  const double path_ce = std::log(1.0 + std::exp(-2.0));
  EXPECT_NEAR(clinical_loss(b, t, 1.0, 0.0, 0.0).item<double>(), path_ce, 1e-12);
  EXPECT_NEAR(clinical_loss(b, t, 0.0, 1.0, 0.0).item<double>(), std::log(4.0), 1e-12);
}

TEST(ConfidenceLoss, ZeroAtTheSoftDiceAndDetached) {
  const auto logits = torch::zeros({1, 1, 2, 2}, torch::kDouble).requires_grad_();
  const auto gt = torch::tensor({1.0, 1.0, 0.0, 0.0}, torch::kDouble).view({1, 1, 2, 2});
  // soft Dice with the default smoothing term
  const double dice = (2.0 + 1e-6) / (4.0 + 1e-6);
  const auto exact = torch::full({1, 1}, dice, torch::kDouble);
  EXPECT_NEAR(confidence_loss(exact, logits, gt).item<double>(), 0.0, 1e-12);
  const auto c = torch::full({1, 1}, 0.8, torch::kDouble).requires_grad_();
  const auto loss = confidence_loss(c, logits, gt);
  EXPECT_NEAR(loss.item<double>(), (0.8 - dice) * (0.8 - dice), 1e-12);
  loss.backward();
  EXPECT_NEAR(c.grad().item<double>(), 2.0 * (0.8 - dice), 1e-12);
  EXPECT_FALSE(logits.grad().defined() && logits.grad().abs().max().item<double>() > 0.0);
}

TEST(NtXent, MatchesLoopOracle) {
  torch::manual_seed(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto v1 = torch::randn({4, 8}, torch::kDouble), v2 = torch::randn({4, 8}, torch::kDouble);
    for (double tau : {0.1, 0.5, 1.0}) {
      EXPECT_NEAR(ntxent_loss(v1, v2, tau).item<double>(), support::brute_ntxent(v1, v2, tau), 1e-10);
    }
  }
}

TEST(NtXent, ViewSwapInvariant) {
  torch::manual_seed(4);
  const auto v1 = torch::randn({3, 5}, torch::kDouble), v2 = torch::randn({3, 5}, torch::kDouble);
  EXPECT_NEAR(ntxent_loss(v1, v2).item<double>(), ntxent_loss(v2, v1).item<double>(), 1e-12);
}

TEST(CaptionLoss, UniformLogitsAndIgnoredTargets) {
  const int vocab = 7;
  const auto logits = torch::zeros({2, 3, vocab}, torch::kDouble);
  const auto targets = torch::tensor({{1, 2, -100}, {4, -100, -100}});
  EXPECT_NEAR(caption_loss(logits, targets).item<double>(), std::log(7.0), 1e-12);
}

TEST(CaptionLoss, AveragedPerCaptionFirst) {
  auto logits = torch::zeros({2, 2, 2}, torch::kDouble);
  logits[0][0][0] = 3.0;  // caption 0, token 0: confident and correct
  const auto targets = torch::tensor({{0, 1}, {1, -100}});
  const double t00 = std::log(1.0 + std::exp(-3.0)), ln2 = std::log(2.0);
  const double expected = 0.5 * ((t00 + ln2) / 2.0 + ln2);
  EXPECT_NEAR(caption_loss(logits, targets).item<double>(), expected, 1e-12);
}

TEST(TotalLoss, WeightedSumOfReportedTerms) {
  torch::manual_seed(5);
  auto bundle = uniform_bundle(2);
  bundle.seg_logits = torch::randn({2, 1, 4, 4}, torch::kDouble);
  bundle.uncertainty = torch::rand({2, 1, 4, 4}, torch::kDouble) * 0.9 + 0.05;
  bundle.confidence = torch::rand({2, 1}, torch::kDouble);
  LossInputs in;
  in.bundle = &bundle;
  in.gt_mask = (torch::rand({2, 1, 4, 4}, torch::kDouble) > 0.5).to(torch::kDouble);
  in.clinical = targets({0, 1}, {1, 3}, {0, 2});
  in.img_emb = torch::randn({2, 6}, torch::kDouble);
  in.txt_emb = torch::randn({2, 6}, torch::kDouble);
  in.tau = torch::tensor(0.07, torch::kDouble);
  LossWeights w;
  const auto out = total_loss(in, w);
  const auto v = out.values();
  const double expected = w.seg * v.at("seg") + w.unc * v.at("unc") + w.con * v.at("con") +
                          w.clin * v.at("clin") + w.conf * v.at("conf");
  EXPECT_NEAR(out.total.item<double>(), expected, 1e-10);
  EXPECT_EQ(v.at("caption"), 0.0);

  w.con = 0.0;
  const auto without = total_loss(in, w);
  EXPECT_NEAR(without.total.item<double>(), expected - 0.1 * v.at("con"), 1e-10);
  EXPECT_NEAR(without.values().at("con"), v.at("con"), 1e-12);
}

TEST(LossWeights, ConfigRoundTripAndValidation) {
  LossWeights w;
  w.unc = 0.3;
  w.beta = 0.25;
  KeyValueConfig cfg;
  w.write_to(cfg);
  const auto back = LossWeights::from_config(cfg);
  EXPECT_EQ(back.unc, 0.3);
  EXPECT_EQ(back.beta, 0.25);
  w.tau_ntx = 0.0;
  EXPECT_THROW(w.validate(), InvalidArgument);
}
