#pragma once

#include <map>
#include <string>

#include <torch/torch.h>

#include "medctx/core/kv_config.hpp"
#include "medctx/model/decoder.hpp"

namespace medctx::losses {

struct LossWeights {
  double seg = 1.0;
  double unc = 0.05;
  double con = 0.1;
  double clin = 0.6;
  double conf = 0.05;
  double caption = 0.5;  // report generator cross-entropy

  double path = 0.4;
  double birads = 0.2;
  double hist = 0.1;

  double beta = 0.1;
  double eps = 1e-6;
  double tau_ntx = 0.5;
  double tau_clip_init = 0.07;

  void validate() const;
  static LossWeights from_config(const KeyValueConfig& cfg, LossWeights base);
  static LossWeights from_config(const KeyValueConfig& cfg) { return from_config(cfg, LossWeights{}); }
  void write_to(KeyValueConfig& cfg) const;
};

/// Mean BCE-with-logits + (1 - soft Dice), Dice computed per sample and
/// averaged over the batch. Inputs B x 1 x H x W (or any matching shape with
/// the batch on dim 0).
torch::Tensor seg_loss(const torch::Tensor& seg_logits, const torch::Tensor& gt, double smooth = 1e-6);

/// Per-sample soft Dice, B values.
torch::Tensor soft_dice(const torch::Tensor& seg_logits, const torch::Tensor& gt, double smooth = 1e-6);

/// mean(u * |y - sigmoid(s)| - beta * log(u + eps)). U must lie in (0, 1].
torch::Tensor unc_loss(const torch::Tensor& U, const torch::Tensor& seg_logits, const torch::Tensor& gt,
                       double beta = 0.1, double eps = 1e-6);

/// Symmetric InfoNCE over in-batch similarities / tau. Rows are normalized here.
torch::Tensor clip_contrastive_loss(const torch::Tensor& img_emb, const torch::Tensor& txt_emb,
                                    const torch::Tensor& tau);
torch::Tensor clip_contrastive_loss(const torch::Tensor& img_emb, const torch::Tensor& txt_emb, double tau);

struct ClinicalTargets {
  torch::Tensor pathology;  // B int64
  torch::Tensor birads;     // B int64, index 0..3
  torch::Tensor histology;  // B int64
};

torch::Tensor clinical_loss(const model::PredictionBundle& bundle, const ClinicalTargets& targets,
                            double w_path = 0.4, double w_birads = 0.2, double w_hist = 0.1);

/// mean over the batch of (soft Dice (detached) - c)^2.
torch::Tensor confidence_loss(const torch::Tensor& confidence, const torch::Tensor& seg_logits,
                              const torch::Tensor& gt);

/// NT-Xent over 2B views; the positive of view i is the other view of the same image.
torch::Tensor ntxent_loss(const torch::Tensor& view1, const torch::Tensor& view2, double tau = 0.5);

/// Token cross-entropy ignoring targets equal to -100, averaged per caption
/// and then over the batch.
torch::Tensor caption_loss(const torch::Tensor& logits, const torch::Tensor& targets);

struct LossInputs {
  const model::PredictionBundle* bundle = nullptr;
  torch::Tensor gt_mask;  // B x 1 x H x W float
  ClinicalTargets clinical;
  torch::Tensor img_emb, txt_emb, tau;  // alignment term; skipped when img_emb undefined
  torch::Tensor caption_logits, caption_targets;  // skipped when undefined
};

struct LossBreakdown {
  torch::Tensor total;
  /// Unweighted terms: seg, unc, con, clin, conf, caption.
  std::map<std::string, torch::Tensor> terms;

  [[nodiscard]] std::map<std::string, double> values() const;
};

/// Weighted sum of all terms. Terms whose inputs are missing or whose weight
/// is zero are still reported (as zero when missing) but do not contribute.
LossBreakdown total_loss(const LossInputs& in, const LossWeights& w);

}  // namespace medctx::losses
