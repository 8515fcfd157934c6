#include "medctx/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "medctx/core/errors.hpp"
#include "medctx/core/log.hpp"
#include "medctx/core/rng.hpp"

namespace medctx::train {
namespace {

using Clock = std::chrono::steady_clock;

torch::optim::AdamWOptions adamw(double lr, const TrainConfig& cfg) {
  return torch::optim::AdamWOptions(lr)
      .betas({cfg.beta1, cfg.beta2})
      .eps(cfg.adam_eps)
      .weight_decay(cfg.weight_decay);
}

void set_group_lrs(torch::optim::Optimizer& opt, const std::vector<double>& peaks, int epoch, int epochs,
                   double min_ratio) {
  auto& groups = opt.param_groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    static_cast<torch::optim::AdamWOptions&>(groups[g].options()).lr(cosine_lr(peaks[g], epoch, epochs, min_ratio));
  }
}

double group_lr(torch::optim::Optimizer& opt, std::size_t g) {
  return static_cast<torch::optim::AdamWOptions&>(opt.param_groups()[g].options()).lr();
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Chunks of `size`; a trailing singleton joins the previous chunk so every
/// contrastive batch has a negative.
std::vector<std::vector<std::size_t>> contrastive_chunks(const std::vector<std::size_t>& order, int size) {
  auto chunks = chunk(order, size);
  if (chunks.size() > 1 && chunks.back().size() == 1) {
    chunks[chunks.size() - 2].push_back(chunks.back().front());
    chunks.pop_back();
  }
  return chunks;
}

std::map<std::string, torch::Tensor> snapshot(const torch::nn::Module& module) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& item : module.named_parameters(true)) out[item.key()] = item.value().detach().clone();
  return out;
}

void load_snapshot(torch::nn::Module& module, const std::map<std::string, torch::Tensor>& state) {
  torch::NoGradGuard guard;
  for (auto& item : module.named_parameters(true)) {
    auto it = state.find(item.key());
    if (it == state.end()) throw IntegrityError("missing weights for " + item.key());
    item.value().copy_(it->second);
  }
}

struct StageSpec {
  int stage;
  int epochs;
  std::vector<double> peaks;
};

using EpochFn = std::function<LogRow(int epoch, torch::optim::Optimizer& opt, Rng& rng)>;

/// Shared epoch loop: schedule, seeding, logging, checkpoints, early stopping
/// (stage 3), resume.
void run_stage(Session& s, const StageSpec& spec, torch::optim::Optimizer& opt, const EpochFn& epoch_fn) {
  if (s.completed_stage >= spec.stage) return;
  if (s.completed_stage < spec.stage - 1) {
    throw StateError("stage " + std::to_string(spec.stage) + " requires a completed stage " +
                     std::to_string(spec.stage - 1) + " checkpoint");
  }
  if (s.cfg.threads > 0) torch::set_num_threads(s.cfg.threads);
  int start = 0;
  if (s.stage_epochs_done > 0) {
    start = s.stage_epochs_done;
    if (!s.pending_optimizer.empty()) deserialize_optimizer(s.pending_optimizer, opt);
  }
  s.pending_optimizer.clear();
  if (start == 0 && spec.stage == 3) {
    s.best_val_dice = -1.0;
    s.epochs_since_best = 0;
    s.best_state.clear();
  }
  bool stop = s.epochs_since_best >= s.cfg.patience;
  for (int epoch = start; epoch < spec.epochs && !stop; ++epoch) {
    set_group_lrs(opt, spec.peaks, epoch, spec.epochs, s.cfg.min_lr_ratio);
    torch::manual_seed(derive_seed(s.cfg.seed, {static_cast<std::uint64_t>(spec.stage),
                                                static_cast<std::uint64_t>(epoch), 0}));
    auto rng = make_rng(s.cfg.seed, {static_cast<std::uint64_t>(spec.stage), static_cast<std::uint64_t>(epoch), 1});
    const auto t0 = Clock::now();
    LogRow row = epoch_fn(epoch, opt, rng);
    row.stage = spec.stage;
    row.epoch = epoch;
    row.lr = group_lr(opt, 0);
    row.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();

    if (spec.stage == 3 && row.val_dice) {
      if (*row.val_dice > s.best_val_dice) {
        s.best_val_dice = *row.val_dice;
        s.epochs_since_best = 0;
        s.best_state = snapshot(*s.model);
      } else {
        ++s.epochs_since_best;
      }
      stop = s.epochs_since_best >= s.cfg.patience;
      if (stop) log::info("early stopping after epoch ", epoch, " (best val Dice ", s.best_val_dice, ")");
    }
    s.log.push_back(row);
    s.stage_epochs_done = epoch + 1;
    if (!s.checkpoint_dir.empty()) save_checkpoint(s.checkpoint_dir / "last.ckpt", s.to_checkpoint(&opt));
    if (s.on_row) s.on_row(row);
  }
  if (spec.stage == 3 && !s.best_state.empty()) load_snapshot(*s.model, s.best_state);
  s.completed_stage = spec.stage;
  s.stage_epochs_done = 0;
  s.epochs_since_best = 0;
  if (!s.checkpoint_dir.empty()) save_checkpoint(s.checkpoint_dir / "last.ckpt", s.to_checkpoint());
}

model::PredictionBundle forward_bundle(model::MedCtx& m, const Batch& b) {
  return m->forward(b.inputs).bundle;
}

}  // namespace

std::string LogRow::to_ndjson() const {
  nlohmann::json j;
  j["stage"] = stage;
  j["epoch"] = epoch;
  for (const auto& [k, v] : terms) j["loss_" + k] = v;
  j["val_dice"] = val_dice ? nlohmann::json(*val_dice) : nlohmann::json(nullptr);
  if (alignment) j["alignment"] = *alignment;
  j["lr"] = lr;
  j["wall_time"] = wall_time;
  return j.dump();
}

LogRow LogRow::from_ndjson(const std::string& line) {
  auto j = nlohmann::json::parse(line);
  LogRow row;
  row.stage = j.at("stage").get<int>();
  row.epoch = j.at("epoch").get<int>();
  for (const auto& [k, v] : j.items()) {
    if (k.rfind("loss_", 0) == 0) row.terms[k.substr(5)] = v.get<double>();
  }
  if (!j.at("val_dice").is_null()) row.val_dice = j.at("val_dice").get<double>();
  if (j.contains("alignment")) row.alignment = j.at("alignment").get<double>();
  row.lr = j.at("lr").get<double>();
  row.wall_time = j.value("wall_time", 0.0);
  return row;
}

Session::Session(const model::ModelConfig& model_cfg_in, const TrainConfig& cfg_in,
                 const losses::LossWeights& weights_in, int vocab)
    : model_cfg(model_cfg_in), cfg(cfg_in), weights(weights_in), vocab_size(vocab) {
  cfg.validate();
  weights.validate();
  model_cfg.clip_tau_init = weights.tau_clip_init;
  torch::manual_seed(derive_seed(cfg.seed, {0xC0FFEE}));
  model = model::MedCtx(model_cfg, vocab_size);
}

Checkpoint Session::to_checkpoint(const torch::optim::Optimizer* optimizer) const {
  Checkpoint c;
  c.fields["kind"] = "medctx-session";
  c.fields["completed_stage"] = std::to_string(completed_stage);
  c.fields["stage_epochs_done"] = std::to_string(stage_epochs_done);
  std::ostringstream best;
  best.precision(17);
  best << best_val_dice;
  c.fields["best_val_dice"] = best.str();
  c.fields["epochs_since_best"] = std::to_string(epochs_since_best);
  c.fields["vocab_size"] = std::to_string(vocab_size);
  c.fields["seed"] = std::to_string(cfg.seed);
  model_cfg.write_to(c.config);
  cfg.write_to(c.config);
  weights.write_to(c.config);
  store_module(c, *model);
  for (const auto& [k, v] : best_state) c.tensors["best/" + k] = v;
  if (optimizer != nullptr) c.blobs["optimizer"] = serialize_optimizer(*optimizer);
  std::string rows;
  for (const auto& r : log) rows += r.to_ndjson() + "\n";
  c.blobs["log"] = rows;
  return c;
}

Session Session::from_checkpoint(const Checkpoint& c) {
  if (c.fields.count("kind") == 0 || c.field("kind") != "medctx-session") {
    throw IntegrityError("checkpoint does not hold a training session");
  }
  Session s(model::ModelConfig::from_config(c.config), TrainConfig::from_config(c.config),
            losses::LossWeights::from_config(c.config), static_cast<int>(c.field_int("vocab_size")));
  restore_module(c, *s.model);
  s.completed_stage = static_cast<int>(c.field_int("completed_stage"));
  s.stage_epochs_done = static_cast<int>(c.field_int("stage_epochs_done"));
  s.best_val_dice = c.field_double("best_val_dice");
  s.epochs_since_best = static_cast<int>(c.field_int("epochs_since_best"));
  for (const auto& [k, v] : c.tensors) {
    if (k.rfind("best/", 0) == 0) s.best_state[k.substr(5)] = v;
  }
  if (auto it = c.blobs.find("optimizer"); it != c.blobs.end()) s.pending_optimizer = it->second;
  if (auto it = c.blobs.find("log"); it != c.blobs.end()) {
    std::istringstream in(it->second);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) s.log.push_back(LogRow::from_ndjson(line));
    }
  }
  return s;
}

void stage1_contrastive_pretrain(Session& s, const std::vector<Example>& examples) {
  if (s.completed_stage >= 1) return;
  if (s.cfg.stage1_epochs > 0 && examples.size() < 2) {
    throw InvalidArgument("stage 1 needs at least two images (NT-Xent uses in-batch negatives)");
  }
  auto& m = s.model;
  std::vector<torch::Tensor> params = m->vision_parameters();
  for (auto& p : m->ssl_parameters()) params.push_back(p);
  torch::optim::AdamW opt(params, adamw(s.cfg.lr_stage1, s.cfg));
  data::AugmentOptions aug;
  aug.output_size = s.model_cfg.encoder.image_size;
  run_stage(s, {1, s.cfg.stage1_epochs, {s.cfg.lr_stage1}}, opt, [&](int, torch::optim::Optimizer& o, Rng& rng) {
    m->train();
    double total = 0.0;
    std::size_t seen = 0;
    for (const auto& idx : contrastive_chunks(shuffled_order(examples.size(), rng), s.cfg.stage1_batch)) {
      auto v1 = make_views(examples, idx, rng, aug);
      auto v2 = make_views(examples, idx, rng, aug);
      auto z = m->ssl_embedding(torch::cat({v1, v2}, 0));
      const auto B = static_cast<std::int64_t>(idx.size());
      auto loss = losses::ntxent_loss(z.narrow(0, 0, B), z.narrow(0, B, B), s.weights.tau_ntx);
      o.zero_grad();
      loss.backward();
      o.step();
      total += loss.item<double>() * static_cast<double>(B);
      seen += idx.size();
    }
    LogRow row;
    row.terms["ntxent"] = total / static_cast<double>(seen);
    return row;
  });
}

void stage2_align_modalities(Session& s, const std::vector<Example>& examples) {
  if (s.completed_stage >= 2) return;
  if (s.completed_stage < 1) throw StateError("stage 2 requires a completed stage 1 checkpoint");
  if (s.cfg.stage2_epochs > 0 && examples.size() < 2) {
    throw InvalidArgument("stage 2 needs at least two image/report pairs");
  }
  auto& m = s.model;
  std::vector<torch::Tensor> params = m->text_parameters();
  for (auto& p : m->alignment_parameters()) params.push_back(p);
  torch::optim::AdamW opt(params, adamw(s.cfg.lr_stage2, s.cfg));
  BatchOptions bopt;
  bopt.augment = s.cfg.augment;
  bopt.caption_len = s.model_cfg.caption_max_len;
  bopt.augment_options.output_size = s.model_cfg.encoder.image_size;
  run_stage(s, {2, s.cfg.stage2_epochs, {s.cfg.lr_stage2}}, opt, [&](int, torch::optim::Optimizer& o, Rng& rng) {
    m->train();
    m->visual->eval();
    double total = 0.0;
    std::size_t seen = 0;
    for (const auto& idx : contrastive_chunks(shuffled_order(examples.size(), rng), s.cfg.stage2_batch)) {
      auto batch = make_batch(examples, idx, rng, bopt);
      torch::Tensor tokens;
      {
        torch::NoGradGuard guard;
        tokens = m->visual(batch.inputs.images).tokens;
      }
      auto text = m->encode_text(batch.inputs.tokens, batch.inputs.structured);
      auto loss = losses::clip_contrastive_loss(m->image_embedding(tokens), m->text_embedding(text),
                                                m->temperature());
      o.zero_grad();
      loss.backward();
      o.step();
      total += loss.item<double>() * static_cast<double>(idx.size());
      seen += idx.size();
    }
    LogRow row;
    row.terms["con"] = total / static_cast<double>(seen);
    row.alignment = mean_alignment(m, examples, s.cfg.batch_size);
    return row;
  });
}

std::unique_ptr<torch::optim::AdamW> make_stage3_optimizer(model::MedCtx& m, const TrainConfig& cfg) {
  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(m->vision_parameters(), std::make_unique<torch::optim::AdamWOptions>(adamw(cfg.lr_vision, cfg)));
  groups.emplace_back(m->text_parameters(), std::make_unique<torch::optim::AdamWOptions>(adamw(cfg.lr_text, cfg)));
  groups.emplace_back(m->head_parameters(), std::make_unique<torch::optim::AdamWOptions>(adamw(cfg.lr_vision, cfg)));
  return std::make_unique<torch::optim::AdamW>(std::move(groups), adamw(cfg.lr_vision, cfg));
}

std::map<std::string, double> accumulate_and_step(model::MedCtx& m, torch::optim::Optimizer& opt,
                                                  const std::vector<Batch>& micro_batches,
                                                  const losses::LossWeights& w) {
  double group_size = 0.0;
  for (const auto& b : micro_batches) group_size += static_cast<double>(b.size());
  opt.zero_grad();
  std::map<std::string, double> terms;
  for (const auto& b : micro_batches) {
    auto out = m->forward(b.inputs);
    losses::LossInputs in;
    in.bundle = &out.bundle;
    in.gt_mask = b.masks;
    in.clinical = b.clinical;
    if (w.con > 0.0 && b.size() >= 2) {
      in.img_emb = out.img_emb;
      in.txt_emb = out.txt_emb;
      in.tau = m->temperature();
    }
    if (w.caption > 0.0) {
      in.caption_logits = m->caption(out.pooled, b.caption.inputs);
      in.caption_targets = b.caption.targets;
    }
    auto breakdown = losses::total_loss(in, w);
    const double share = static_cast<double>(b.size()) / group_size;
    (breakdown.total * share).backward();
    for (const auto& [k, v] : breakdown.values()) terms[k] += v * share;
  }
  opt.step();
  return terms;
}

void stage3_finetune(Session& s, const std::vector<Example>& train, const std::vector<Example>& val) {
  if (s.completed_stage >= 3) return;
  if (s.completed_stage < 2) throw StateError("stage 3 requires a completed stage 2 checkpoint");
  if (s.cfg.stage3_epochs > 0 && train.empty()) throw InvalidArgument("stage 3: empty training split");
  if (s.cfg.stage3_epochs > 0 && val.empty()) throw InvalidArgument("stage 3: empty validation split");
  auto& m = s.model;
  auto opt = make_stage3_optimizer(m, s.cfg);
  BatchOptions bopt;
  bopt.augment = s.cfg.augment;
  bopt.caption_len = s.model_cfg.caption_max_len;
  bopt.augment_options.output_size = s.model_cfg.encoder.image_size;
  const StageSpec spec{3, s.cfg.stage3_epochs, {s.cfg.lr_vision, s.cfg.lr_text, s.cfg.lr_vision}};
  run_stage(s, spec, *opt, [&](int, torch::optim::Optimizer& o, Rng& rng) {
    m->train();
    std::map<std::string, double> sums;
    double seen = 0.0;
    auto micro = chunk(shuffled_order(train.size(), rng), s.cfg.batch_size);
    for (std::size_t i = 0; i < micro.size(); i += static_cast<std::size_t>(s.cfg.grad_accum)) {
      std::vector<Batch> group;
      double n = 0.0;
      for (std::size_t j = i; j < std::min(micro.size(), i + static_cast<std::size_t>(s.cfg.grad_accum)); ++j) {
        group.push_back(make_batch(train, micro[j], rng, bopt));
        n += static_cast<double>(micro[j].size());
      }
      for (const auto& [k, v] : accumulate_and_step(m, o, group, s.weights)) sums[k] += v * n;
      seen += n;
    }
    LogRow row;
    for (const auto& [k, v] : sums) row.terms[k] = v / seen;
    row.val_dice = evaluate_dice(m, val, s.cfg.batch_size);
    return row;
  });
}

void run_full_schedule(Session& s, const std::vector<Example>& train, const std::vector<Example>& val) {
  stage1_contrastive_pretrain(s, train);
  stage2_align_modalities(s, train);
  stage3_finetune(s, train, val);
}

double evaluate_dice(model::MedCtx& m, const std::vector<Example>& examples, int batch_size) {
  if (examples.empty()) throw InvalidArgument("evaluate_dice: no examples");
  torch::NoGradGuard guard;
  const bool was_training = m->is_training();
  m->eval();
  Rng unused(0);
  BatchOptions bopt;
  bopt.caption_len = m->config().caption_max_len;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double total = 0.0;
  for (const auto& idx : chunk(order, batch_size)) {
    auto b = make_batch(examples, idx, unused, bopt);
    auto logits = forward_bundle(m, b).seg_logits;
    auto pred = (logits >= 0).to(torch::kFloat).flatten(1);
    auto gt = b.masks.flatten(1);
    auto inter = (pred * gt).sum(1);
    auto denom = pred.sum(1) + gt.sum(1);
    auto dice = torch::where(denom > 0, 2.0 * inter / denom.clamp_min(1.0), torch::ones_like(denom));
    total += dice.to(torch::kDouble).sum().item<double>();
  }
  m->train(was_training);
  return total / static_cast<double>(examples.size());
}

double mean_alignment(model::MedCtx& m, const std::vector<Example>& examples, int batch_size) {
  torch::NoGradGuard guard;
  const bool was_training = m->is_training();
  m->eval();
  Rng unused(0);
  BatchOptions bopt;
  bopt.caption_len = m->config().caption_max_len;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double total = 0.0;
  for (const auto& idx : chunk(order, batch_size)) {
    auto b = make_batch(examples, idx, unused, bopt);
    auto tokens = m->visual(b.inputs.images).tokens;
    auto text = m->encode_text(b.inputs.tokens, b.inputs.structured);
    auto cos = torch::cosine_similarity(m->image_embedding(tokens), m->text_embedding(text), 1);
    total += cos.to(torch::kDouble).sum().item<double>();
  }
  m->train(was_training);
  return total / static_cast<double>(examples.size());
}

}  // namespace medctx::train
