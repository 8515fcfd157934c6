#include "medctx/losses/losses.hpp"

#include <cmath>
#include <sstream>
#include <type_traits>

#include "medctx/core/errors.hpp"

namespace medctx::losses {
namespace {

template <typename Visitor>
void visit_fields(LossWeights& w, Visitor&& v) {
  v("loss.lambda_seg", w.seg);
  v("loss.lambda_unc", w.unc);
  v("loss.lambda_con", w.con);
  v("loss.lambda_clin", w.clin);
  v("loss.lambda_conf", w.conf);
  v("loss.lambda_caption", w.caption);
  v("loss.lambda_path", w.path);
  v("loss.lambda_birads", w.birads);
  v("loss.lambda_hist", w.hist);
  v("loss.beta", w.beta);
  v("loss.eps", w.eps);
  v("loss.tau_ntx", w.tau_ntx);
  v("loss.tau_clip_init", w.tau_clip_init);
}

void check_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (!a.sizes().equals(b.sizes())) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.sizes() << " vs " << b.sizes();
    throw ShapeError(os.str());
  }
}

void check_targets(const torch::Tensor& logits, const torch::Tensor& target, const char* what) {
  if (target.dim() != 1 || logits.dim() != 2 || target.size(0) != logits.size(0)) {
    throw ShapeError(std::string(what) + ": expected B x C logits and B targets");
  }
  if (target.numel() == 0) return;
  const auto lo = target.min().item<std::int64_t>();
  const auto hi = target.max().item<std::int64_t>();
  if (lo < 0 || hi >= logits.size(1)) {
    throw InvalidArgument(std::string(what) + ": target outside [0," + std::to_string(logits.size(1)) + ")");
  }
}

torch::Tensor ce(const torch::Tensor& logits, const torch::Tensor& labels) {
  return torch::nn::functional::cross_entropy(logits, labels);
}

torch::Tensor normalize_rows(const torch::Tensor& x) {
  return x / x.norm(2, -1, true).clamp_min(1e-12);
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {seg, unc, con, clin, conf, caption, path, birads, hist, beta}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("loss weights must be finite and non-negative");
  }
  if (!(eps > 0.0) || !(tau_ntx > 0.0) || !(tau_clip_init > 0.0)) {
    throw InvalidArgument("eps and temperatures must be positive");
  }
}

LossWeights LossWeights::from_config(const KeyValueConfig& cfg, LossWeights base) {
  visit_fields(base, [&](const char* key, double& field) { field = cfg.get_double(key, field); });
  base.validate();
  return base;
}

void LossWeights::write_to(KeyValueConfig& cfg) const {
  auto copy = *this;
  visit_fields(copy, [&](const char* key, double& field) {
    std::ostringstream os;
    os.precision(17);
    os << field;
    cfg.set(key, os.str());
  });
}

torch::Tensor soft_dice(const torch::Tensor& seg_logits, const torch::Tensor& gt, double smooth) {
  check_same(seg_logits, gt, "soft_dice");
  const auto B = seg_logits.size(0);
  auto p = torch::sigmoid(seg_logits).reshape({B, -1});
  auto g = gt.to(p.dtype()).reshape({B, -1});
  return (2.0 * (p * g).sum(1) + smooth) / (p.sum(1) + g.sum(1) + smooth);
}

torch::Tensor seg_loss(const torch::Tensor& seg_logits, const torch::Tensor& gt, double smooth) {
  check_same(seg_logits, gt, "seg_loss");
  auto g = gt.to(seg_logits.dtype());
  auto bce = torch::binary_cross_entropy_with_logits(seg_logits, g);
  return bce + (1.0 - soft_dice(seg_logits, g, smooth)).mean();
}

torch::Tensor unc_loss(const torch::Tensor& U, const torch::Tensor& seg_logits, const torch::Tensor& gt,
                       double beta, double eps) {
  check_same(U, seg_logits, "unc_loss");
  check_same(U, gt, "unc_loss");
  {
    torch::NoGradGuard guard;
    if (U.numel() > 0 && (U.min().item<double>() <= 0.0 || U.max().item<double>() > 1.0)) {
      throw InvalidArgument("unc_loss: uncertainty values must lie in (0,1]");
    }
  }
  auto err = (gt.to(seg_logits.dtype()) - torch::sigmoid(seg_logits)).abs();
  return (U * err - beta * torch::log(U + eps)).mean();
}

torch::Tensor clip_contrastive_loss(const torch::Tensor& img_emb, const torch::Tensor& txt_emb,
                                    const torch::Tensor& tau) {
  check_same(img_emb, txt_emb, "clip_contrastive_loss");
  if (img_emb.dim() != 2) throw ShapeError("clip_contrastive_loss expects B x D embeddings");
  if (img_emb.size(0) < 2) throw InvalidArgument("clip_contrastive_loss needs a batch of at least 2");
  auto logits = torch::matmul(normalize_rows(img_emb), normalize_rows(txt_emb).t()) / tau;
  auto labels = torch::arange(img_emb.size(0), torch::kLong);
  return 0.5 * (ce(logits, labels) + ce(logits.t(), labels));
}

torch::Tensor clip_contrastive_loss(const torch::Tensor& img_emb, const torch::Tensor& txt_emb, double tau) {
  return clip_contrastive_loss(img_emb, txt_emb, torch::tensor(tau, img_emb.options()));
}

torch::Tensor clinical_loss(const model::PredictionBundle& b, const ClinicalTargets& t, double w_path,
                            double w_birads, double w_hist) {
  check_targets(b.pathology_logits, t.pathology, "pathology");
  check_targets(b.birads_logits, t.birads, "birads");
  check_targets(b.histology_logits, t.histology, "histology");
  return w_path * ce(b.pathology_logits, t.pathology) +
         w_birads * ce(b.birads_logits, t.birads) +
         w_hist * ce(b.histology_logits, t.histology);
}

torch::Tensor confidence_loss(const torch::Tensor& confidence, const torch::Tensor& seg_logits,
                              const torch::Tensor& gt) {
  auto target = soft_dice(seg_logits.detach(), gt).detach();
  return (target - confidence.reshape({-1})).pow(2).mean();
}

torch::Tensor ntxent_loss(const torch::Tensor& view1, const torch::Tensor& view2, double tau) {
  check_same(view1, view2, "ntxent_loss");
  if (view1.dim() != 2) throw ShapeError("ntxent_loss expects B x D embeddings");
  const auto B = view1.size(0);
  if (B < 2) throw InvalidArgument("ntxent_loss needs a batch of at least 2");
  auto z = normalize_rows(torch::cat({view1, view2}, 0));
  auto sim = torch::matmul(z, z.t()) / tau;
  auto self = torch::eye(2 * B, torch::kBool);
  sim = sim.masked_fill(self, -std::numeric_limits<double>::infinity());
  auto idx = torch::arange(2 * B, torch::kLong);
  auto positives = torch::cat({idx.narrow(0, B, B), idx.narrow(0, 0, B)});
  return ce(sim, positives);
}

torch::Tensor caption_loss(const torch::Tensor& logits, const torch::Tensor& targets) {
  if (logits.dim() != 3 || targets.dim() != 2 || logits.size(0) != targets.size(0) ||
      logits.size(1) != targets.size(1)) {
    throw ShapeError("caption_loss expects B x L x V logits and B x L targets");
  }
  // Averaged per caption first so the batch mean splits cleanly over micro-batches.
  auto valid = targets.ne(-100);
  auto safe = targets.masked_fill(~valid, 0);
  auto nll = -torch::log_softmax(logits, -1).gather(-1, safe.unsqueeze(-1)).squeeze(-1);
  auto w = valid.to(nll.dtype());
  return ((nll * w).sum(1) / w.sum(1).clamp_min(1.0)).mean();
}

std::map<std::string, double> LossBreakdown::values() const {
  std::map<std::string, double> out;
  for (const auto& [k, v] : terms) out[k] = v.defined() ? v.item<double>() : 0.0;
  out["total"] = total.item<double>();
  return out;
}

LossBreakdown total_loss(const LossInputs& in, const LossWeights& w) {
  if (in.bundle == nullptr) throw InvalidArgument("total_loss: missing prediction bundle");
  const auto& b = *in.bundle;
  LossBreakdown out;
  auto zero = torch::zeros({}, b.seg_logits.options());
  auto& t = out.terms;
  t["seg"] = seg_loss(b.seg_logits, in.gt_mask);
  t["unc"] = unc_loss(b.uncertainty, b.seg_logits, in.gt_mask, w.beta, w.eps);
  t["con"] = in.img_emb.defined() ? clip_contrastive_loss(in.img_emb, in.txt_emb, in.tau) : zero;
  t["clin"] = clinical_loss(b, in.clinical, w.path, w.birads, w.hist);
  t["conf"] = confidence_loss(b.confidence, b.seg_logits, in.gt_mask);
  t["caption"] = in.caption_logits.defined() ? caption_loss(in.caption_logits, in.caption_targets) : zero;

  const std::pair<const char*, double> weighted[] = {{"seg", w.seg},   {"unc", w.unc},   {"con", w.con},
                                                     {"clin", w.clin}, {"conf", w.conf}, {"caption", w.caption}};
  out.total = zero;
  for (const auto& [name, lambda] : weighted) {
    if (lambda != 0.0) out.total = out.total + lambda * t[name];
  }
  return out;
}

}  // namespace medctx::losses
