#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "medctx/eval/report.hpp"
#include "medctx/explain/explain.hpp"
#include "medctx/model/medctx_model.hpp"
#include "medctx/train/batch.hpp"
#include "medctx/train/trainer.hpp"

namespace medctx::eval {

struct EvalOptions {
  int batch_size = 8;
  int bins = 15;
  /// Confidence temperature; fitted on the evaluated cases when unset (needs
  /// at least 10 cases, otherwise 1).
  std::optional<double> temperature;
  /// When set, per-case PNGs are written to `artifact_dir / "cases"` and the
  /// report lists them relative to artifact_dir.
  std::filesystem::path artifact_dir;
  bool trained = true;
};

struct EvalResult {
  MetricsReport report;
  std::vector<explain::Explanation> explanations;
  std::vector<bool> untrained;
};

EvalResult evaluate(model::MedCtx& model, const std::vector<train::Example>& examples, const EvalOptions& options);

struct AblationRow {
  std::string name;
  double dice = 0.0;
  double cider = 0.0;
  double ece_percent = 0.0;
  double clip_score = 0.0;
};

struct AblationSetup {
  std::string name;
  model::ModelConfig model;
  train::TrainConfig train;
  losses::LossWeights weights;
};

/// The six configurations, in table order: full; w/o local branch; w/o BI-RADS
/// tokens; w/o uncertainty fusion; w/o CLIP stage; w/o clinical text.
std::vector<AblationSetup> ablation_setups(const model::ModelConfig& model, const train::TrainConfig& train,
                                           const losses::LossWeights& weights);

/// Trains and evaluates each configuration on the same split and seed.
std::vector<AblationRow> run_ablation(const std::vector<train::Example>& train_set,
                                      const std::vector<train::Example>& val_set, const model::ModelConfig& model,
                                      const train::TrainConfig& train, const losses::LossWeights& weights,
                                      const std::function<void(const AblationRow&)>& on_row = {});

/// Aligned plain-text table with the columns Dice, CIDEr, ECE (%), CLIP Scr.
std::string format_ablation_table(const std::vector<AblationRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace medctx::eval
