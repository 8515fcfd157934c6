#include "medctx/eval/evaluate.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "medctx/core/csv.hpp"
#include "medctx/core/errors.hpp"
#include "medctx/core/log.hpp"
#include "medctx/core/png_io.hpp"
#include "medctx/data/preprocess.hpp"
#include "medctx/eval/calibration.hpp"
#include "medctx/eval/figures.hpp"
#include "medctx/eval/nlg_metrics.hpp"
#include "medctx/eval/seg_metrics.hpp"
#include "medctx/losses/losses.hpp"

namespace medctx::eval {
namespace {

Image tensor_to_image(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat).contiguous();
  Image out(static_cast<int>(c.size(0)), static_cast<int>(c.size(1)));
  std::memcpy(out.data(), c.data_ptr<float>(), out.size() * sizeof(float));
  return out;
}

Grid<std::uint8_t> mask_to_gray(const Mask& m) {
  Grid<std::uint8_t> out(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = m.data()[i] ? 255 : 0;
  return out;
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ? c : '_');
  return out;
}

}  // namespace

EvalResult evaluate(model::MedCtx& m, const std::vector<train::Example>& examples, const EvalOptions& opt) {
  if (examples.empty()) throw InvalidArgument("evaluate: no cases");
  torch::NoGradGuard guard;
  const bool was_training = m->is_training();
  m->eval();
  if (!opt.artifact_dir.empty()) std::filesystem::create_directories(opt.artifact_dir / "cases");

  EvalResult result;
  auto& report = result.report;
  std::vector<std::string> candidates, references, composed;
  std::vector<int> truth;
  std::vector<torch::Tensor> img_embs, txt_embs;
  Rng unused(0);
  train::BatchOptions bopt;
  bopt.caption_len = m->config().caption_max_len;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (const auto& idx : train::chunk(order, opt.batch_size)) {
    auto batch = train::make_batch(examples, idx, unused, bopt);
    auto out = m->forward(batch.inputs);
    const auto& b = out.bundle;
    img_embs.push_back(out.img_emb);
    txt_embs.push_back(out.txt_emb);
    auto soft = losses::soft_dice(b.seg_logits, batch.masks);
    auto neural = explain::generate_neural(m, out.pooled, m->config().caption_max_len, opt.trained);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto i = static_cast<std::int64_t>(k);
      const auto& ex = examples[idx[k]];
      const auto& record = ex.sample->record;
      CaseRecord c;
      c.case_id = record.case_id;
      const auto pred = model::binarize(b.seg_logits[i]);
      const auto metrics = seg_metrics(pred, ex.val_view.mask);
      c.dice = metrics.dice;
      c.iou = metrics.iou;
      c.pixel_acc = metrics.pixel_acc;
      c.hausdorff = metrics.hausdorff;
      c.soft_dice = soft[i].item<double>();
      c.confidence = b.confidence[i].item<double>();
      c.birads_true = record.birads;
      c.reference = record.report_text;
      c.neural = neural[k].text;
      result.explanations.push_back(explain::explain_case(b, i, neural[k]));
      result.untrained.push_back(neural[k].untrained);
      c.birads_pred = data::index_to_birads(explain::argmax_lower(b.birads_logits[i]));

      if (!opt.artifact_dir.empty()) {
        const auto stem = "cases/" + safe_name(c.case_id);
        const auto& gray = ex.val_view.image;
        const auto heat = render_heatmap(gray, tensor_to_image(b.attention_map[i]),
                                         tensor_to_image(b.uncertainty[i][0]));
        png::write_gray8(opt.artifact_dir / (stem + "_input.png"), png::stretch_to_gray8(gray));
        png::write_gray8(opt.artifact_dir / (stem + "_truth.png"), mask_to_gray(ex.val_view.mask));
        png::write_gray8(opt.artifact_dir / (stem + "_pred.png"), mask_to_gray(pred));
        png::write_rgb8(opt.artifact_dir / (stem + "_heatmap.png"), heat);
        c.input_png = stem + "_input.png";
        c.truth_png = stem + "_truth.png";
        c.pred_png = stem + "_pred.png";
        c.heatmap_png = stem + "_heatmap.png";
      }
      candidates.push_back(c.neural);
      references.push_back(c.reference);
      truth.push_back(record.birads);
      report.cases.push_back(std::move(c));
    }
  }

  std::vector<double> conf, acc;
  for (const auto& c : report.cases) {
    conf.push_back(c.confidence);
    acc.push_back(c.soft_dice);
  }
  const auto before = calibration_metrics(conf, acc, opt.bins);
  report.ece = before.ece;
  report.brier = before.brier;
  if (opt.temperature) {
    report.temperature = *opt.temperature;
  } else if (conf.size() >= 10) {
    report.temperature = fit_temperature(conf, acc, opt.bins).temperature;
  } else {
    log::warn("evaluate: fewer than 10 cases, confidence temperature left at 1");
    report.temperature = 1.0;
  }
  const auto calibrated = apply_temperature(conf, report.temperature);
  const auto after = calibration_metrics(calibrated, acc, opt.bins);
  report.ece_calibrated = after.ece;
  report.brier_calibrated = after.brier;

  const double n = static_cast<double>(report.cases.size());
  for (std::size_t i = 0; i < report.cases.size(); ++i) {
    auto& c = report.cases[i];
    c.calibrated = calibrated[i];
    // the structured pathway picks its band from the calibrated confidence
    auto& e = result.explanations[i];
    const auto structured_prefix = e.structured_text.substr(0, e.structured_text.rfind(e.confidence_phrase));
    e.confidence_phrase = std::string(explain::confidence_phrase(calibrated[i]));
    e.structured_text = structured_prefix + e.confidence_phrase;
    e.composed = explain::compose(e.neural_text, e.structured_text);
    c.explanation = e.composed;
    composed.push_back(e.composed);
    report.dice += c.dice / n;
    report.iou += c.iou / n;
    report.pixel_acc += c.pixel_acc / n;
    report.hausdorff += c.hausdorff / n;
  }
  const auto nlg = nlg_metrics(candidates, references);
  report.bleu4 = nlg.bleu4;
  report.cider = nlg.cider;
  report.meteor = nlg.meteor;
  report.birads_acc = birads_accuracy(composed, truth);
  report.clip_score = clip_alignment(torch::cat(img_embs), torch::cat(txt_embs));
  m->train(was_training);
  return result;
}

std::vector<AblationSetup> ablation_setups(const model::ModelConfig& model, const train::TrainConfig& train,
                                           const losses::LossWeights& weights) {
  std::vector<AblationSetup> out;
  out.push_back({"Med-CTX (full)", model, train, weights});

  auto s = out.front();
  s.name = "w/o local branch";
  s.model.use_local_branch = false;
  out.push_back(s);

  s = out.front();
  s.name = "w/o BI-RADS tokens";
  s.model.use_structured_tokens = false;
  out.push_back(s);

  s = out.front();
  s.name = "w/o uncertainty fusion";
  s.model.use_uncertainty_gate = false;
  out.push_back(s);

  s = out.front();
  s.name = "w/o CLIP stage";
  s.train.stage2_epochs = 0;
  s.weights.con = 0.0;
  out.push_back(s);

  s = out.front();
  s.name = "w/o clinical text";
  s.model.use_clinical_text = false;
  s.train.stage2_epochs = 0;  // nothing to align
  s.weights.con = 0.0;
  out.push_back(s);
  return out;
}

std::vector<AblationRow> run_ablation(const std::vector<train::Example>& train_set,
                                      const std::vector<train::Example>& val_set, const model::ModelConfig& model,
                                      const train::TrainConfig& train, const losses::LossWeights& weights,
                                      const std::function<void(const AblationRow&)>& on_row) {
  std::vector<AblationRow> rows;
  for (const auto& setup : ablation_setups(model, train, weights)) {
    log::info("ablation: training '", setup.name, "'");
    train::Session session(setup.model, setup.train, setup.weights);
    train::run_full_schedule(session, train_set, val_set);
    EvalOptions opt;
    opt.batch_size = setup.train.batch_size;
    auto result = evaluate(session.model, val_set, opt);
    AblationRow row{setup.name, result.report.dice, result.report.cider, 100.0 * result.report.ece,
                    result.report.clip_score};
    if (on_row) on_row(row);
    rows.push_back(row);
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::size_t width = 13;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %8s  %8s\n", static_cast<int>(width), "Configuration", "Dice",
                "CIDEr", "ECE (%)", "CLIP Scr");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %8.4f  %8.2f  %8.4f\n", static_cast<int>(width), r.name.c_str(),
                  r.dice, r.cider, r.ece_percent, r.clip_score);
    os << buf;
  }
  return os.str();
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << csv::format_row({"configuration", "dice", "cider", "ece_percent", "clip_score"}) << "\n";
  for (const auto& r : rows) {
    os << csv::format_row({r.name, std::to_string(r.dice), std::to_string(r.cider), std::to_string(r.ece_percent),
                           std::to_string(r.clip_score)})
       << "\n";
  }
  return os.str();
}

}  // namespace medctx::eval
