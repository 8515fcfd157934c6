#include "medctx/train/config.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <type_traits>

#include "medctx/core/errors.hpp"

namespace medctx::train {
namespace {

template <typename Visitor>
void visit_fields(TrainConfig& c, Visitor&& v) {
  v("train.stage1_epochs", c.stage1_epochs);
  v("train.stage2_epochs", c.stage2_epochs);
  v("train.stage3_epochs", c.stage3_epochs);
  v("train.lr_stage1", c.lr_stage1);
  v("train.lr_stage2", c.lr_stage2);
  v("train.lr_vision", c.lr_vision);
  v("train.lr_text", c.lr_text);
  v("train.weight_decay", c.weight_decay);
  v("train.beta1", c.beta1);
  v("train.beta2", c.beta2);
  v("train.adam_eps", c.adam_eps);
  v("train.min_lr_ratio", c.min_lr_ratio);
  v("train.stage1_batch", c.stage1_batch);
  v("train.stage2_batch", c.stage2_batch);
  v("train.batch_size", c.batch_size);
  v("train.grad_accum", c.grad_accum);
  v("train.patience", c.patience);
  v("train.seed", c.seed);
  v("train.augment", c.augment);
  v("train.fp16", c.fp16);
  v("train.threads", c.threads);
}

}  // namespace

void TrainConfig::validate() const {
  if (stage1_epochs < 0 || stage2_epochs < 0 || stage3_epochs < 0) {
    throw InvalidArgument("epoch counts must be non-negative");
  }
  if (stage1_batch < 2 || stage2_batch < 2) {
    throw InvalidArgument("contrastive stages need batches of at least 2");
  }
  if (batch_size < 1 || grad_accum < 1) throw InvalidArgument("batch_size and grad_accum must be positive");
  if (patience < 1) throw InvalidArgument("patience must be positive");
  for (double lr : {lr_stage1, lr_stage2, lr_vision, lr_text, weight_decay}) {
    if (!(lr >= 0.0)) throw InvalidArgument("learning rates and weight decay must be non-negative");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must lie in [0,1)");
  }
  if (!(min_lr_ratio >= 0.0 && min_lr_ratio <= 1.0)) throw InvalidArgument("min_lr_ratio must lie in [0,1]");
  if (fp16) throw InvalidArgument("train.fp16 is not supported by the CPU build");
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg, TrainConfig base) {
  visit_fields(base, [&](const char* key, auto& field) {
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<T, bool>) {
      field = cfg.get_bool(key, field);
    } else if constexpr (std::is_integral_v<T>) {
      field = static_cast<T>(cfg.get_int(key, static_cast<long long>(field)));
    } else {
      field = cfg.get_double(key, field);
    }
  });
  base.validate();
  return base;
}

void TrainConfig::write_to(KeyValueConfig& cfg) const {
  auto copy = *this;
  visit_fields(copy, [&](const char* key, auto& field) {
    using T = std::decay_t<decltype(field)>;
    std::ostringstream os;
    if constexpr (std::is_same_v<T, bool>) {
      os << (field ? "true" : "false");
    } else {
      os.precision(17);
      os << field;
    }
    cfg.set(key, os.str());
  });
}

std::vector<std::string> train_config_keys() {
  std::vector<std::string> keys;
  TrainConfig c;
  visit_fields(c, [&](const char* key, auto&) { keys.emplace_back(key); });
  return keys;
}

double cosine_lr(double peak, int epoch, int epochs, double min_ratio) {
  if (epochs <= 1) return peak;
  const double floor = peak * min_ratio;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return floor + 0.5 * (peak - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace medctx::train
