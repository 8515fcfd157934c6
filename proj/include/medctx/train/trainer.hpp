#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "medctx/losses/losses.hpp"
#include "medctx/model/medctx_model.hpp"
#include "medctx/train/batch.hpp"
#include "medctx/train/checkpoint.hpp"
#include "medctx/train/config.hpp"

namespace medctx::train {

struct LogRow {
  int stage = 0;
  int epoch = 0;
  std::map<std::string, double> terms;  // epoch means of the loss terms
  std::optional<double> val_dice;
  std::optional<double> alignment;  // stage 2: mean paired cosine after the epoch
  double lr = 0.0;
  double wall_time = 0.0;  // seconds spent in the epoch

  [[nodiscard]] std::string to_ndjson() const;
  static LogRow from_ndjson(const std::string& line);
};

/// Model plus all optimization state that survives between epochs and stages.
/// Persisted as a Checkpoint so a run can be interrupted and resumed.
class Session {
 public:
  Session(const model::ModelConfig& model_cfg, const TrainConfig& cfg, const losses::LossWeights& weights,
          int vocab_size = text::Vocabulary::builtin().size());

  static Session from_checkpoint(const Checkpoint& ckpt);
  static Session load(const std::filesystem::path& path) { return from_checkpoint(load_checkpoint(path)); }
  [[nodiscard]] Checkpoint to_checkpoint(const torch::optim::Optimizer* optimizer = nullptr) const;

  model::MedCtx model{nullptr};
  model::ModelConfig model_cfg;
  TrainConfig cfg;
  losses::LossWeights weights;
  int vocab_size;

  int completed_stage = 0;
  int stage_epochs_done = 0;  // progress inside stage completed_stage + 1
  double best_val_dice = -1.0;
  int epochs_since_best = 0;
  std::map<std::string, torch::Tensor> best_state;
  std::string pending_optimizer;  // restored optimizer state for a resumed stage
  std::vector<LogRow> log;

  /// Called after each epoch, once the epoch's checkpoint has been written.
  std::function<void(const LogRow&)> on_row;
  /// When set, last.ckpt is rewritten here after every epoch.
  std::filesystem::path checkpoint_dir;
};

/// Stage 1: NT-Xent between two augmented views; updates the visual encoder
/// and the self-supervised projector only.
void stage1_contrastive_pretrain(Session& session, const std::vector<Example>& examples);

/// Stage 2: CLIP alignment with the visual encoder frozen. StateError unless
/// stage 1 has completed.
void stage2_align_modalities(Session& session, const std::vector<Example>& examples);

/// Stage 3: supervised fine-tuning of everything with early stopping on
/// validation Dice; the best weights are restored at the end.
void stage3_finetune(Session& session, const std::vector<Example>& train, const std::vector<Example>& val);

/// Runs whichever stages have not completed yet, in order. Stages configured
/// with zero epochs complete immediately.
void run_full_schedule(Session& session, const std::vector<Example>& train, const std::vector<Example>& val);

/// Mean per-sample hard Dice (logit >= 0) in eval mode.
double evaluate_dice(model::MedCtx& model, const std::vector<Example>& examples, int batch_size = 8);

/// Mean cosine similarity of paired image/text embeddings in eval mode.
double mean_alignment(model::MedCtx& model, const std::vector<Example>& examples, int batch_size = 8);

/// One stage-3 optimizer step over `micro_batches` (gradients accumulated,
/// each micro-batch weighted by its share of samples). Returns the weighted
/// loss breakdown. Exposed for the accumulation equivalence check.
std::map<std::string, double> accumulate_and_step(model::MedCtx& model, torch::optim::Optimizer& optimizer,
                                                  const std::vector<Batch>& micro_batches,
                                                  const losses::LossWeights& weights);

/// AdamW over (vision, text, heads) parameter groups with the stage-3 peak rates.
std::unique_ptr<torch::optim::AdamW> make_stage3_optimizer(model::MedCtx& model, const TrainConfig& cfg);

}  // namespace medctx::train
