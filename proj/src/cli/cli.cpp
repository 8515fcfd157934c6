#include "medctx/cli/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "medctx/core/errors.hpp"
#include "medctx/core/kv_config.hpp"
#include "medctx/core/log.hpp"
#include "medctx/core/png_io.hpp"
#include "medctx/data/corpus_io.hpp"
#include "medctx/data/split.hpp"
#include "medctx/data/synthetic.hpp"
#include "medctx/eval/calibration.hpp"
#include "medctx/eval/evaluate.hpp"
#include "medctx/eval/figures.hpp"
#include "medctx/explain/explain.hpp"
#include "medctx/train/trainer.hpp"

namespace medctx::cli {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by the commands that build a run configuration.
struct RunFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  long long seed = 0;
  CLI::Option* seed_option = nullptr;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "Run-config file (flat key = value)")->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "Override a config key, KEY=VALUE (repeatable)");
    app.add_option("--out", out, "Output directory")->required();
    seed_option = app.add_option("--seed", seed, "Seed for every random stream (beats config and MEDCTX_SEED)");
  }
};

struct ResolvedConfig {
  KeyValueConfig raw;
  model::ModelConfig model;
  train::TrainConfig train;
  losses::LossWeights weights;
  data::SplitSpec split;
};

const std::vector<std::string> kSplitKeys = {"split.train_fraction", "split.seed", "split.stratify"};

std::vector<std::string> known_keys() {
  auto keys = model::model_config_keys();
  const auto train_keys = train::train_config_keys();
  keys.insert(keys.end(), train_keys.begin(), train_keys.end());
  KeyValueConfig loss;
  losses::LossWeights{}.write_to(loss);
  for (const auto& [k, v] : loss.entries()) keys.push_back(k);
  keys.insert(keys.end(), kSplitKeys.begin(), kSplitKeys.end());
  return keys;
}

std::optional<long long> env_seed() {
  const char* env = std::getenv("MEDCTX_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("MEDCTX_SEED is not an integer: '") + env + "'");
  }
}

data::SplitSpec split_from(const KeyValueConfig& cfg, std::uint64_t seed) {
  data::SplitSpec s;
  s.train_fraction = cfg.get_double("split.train_fraction", s.train_fraction);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("split.seed", static_cast<long long>(seed)));
  s.stratify_key = cfg.get_string("split.stratify", s.stratify_key);
  return s;
}

void write_split(KeyValueConfig& cfg, const data::SplitSpec& s) {
  std::ostringstream fraction;
  fraction.precision(17);
  fraction << s.train_fraction;
  cfg.set("split.train_fraction", fraction.str());
  cfg.set("split.seed", std::to_string(s.seed));
  cfg.set("split.stratify", s.stratify_key);
}

// Seed priority, highest first: --seed, --set, config file, MEDCTX_SEED.
ResolvedConfig resolve(const RunFlags& flags) {
  ResolvedConfig rc;
  if (auto s = env_seed()) rc.raw.set("train.seed", std::to_string(*s));
  if (!flags.config_path.empty()) rc.raw.merge(KeyValueConfig::load(flags.config_path));
  try {
    rc.raw.apply_overrides(flags.overrides);
    if (flags.seed_option != nullptr && flags.seed_option->count() > 0) {
      rc.raw.set("train.seed", std::to_string(flags.seed));
    }
    if (auto unknown = rc.raw.unknown_keys(known_keys()); !unknown.empty()) {
      throw UsageError("unknown config key '" + unknown.front() + "'");
    }
    rc.model = model::ModelConfig::from_config(rc.raw);
    rc.train = train::TrainConfig::from_config(rc.raw);
    rc.weights = losses::LossWeights::from_config(rc.raw);
    rc.split = split_from(rc.raw, rc.train.seed);
    if (!(rc.split.train_fraction > 0.0 && rc.split.train_fraction < 1.0)) {
      throw UsageError("split.train_fraction must lie in (0, 1)");
    }
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return rc;
}

KeyValueConfig resolved_to_config(const ResolvedConfig& rc) {
  KeyValueConfig cfg;
  rc.model.write_to(cfg);
  rc.train.write_to(cfg);
  rc.weights.write_to(cfg);
  write_split(cfg, rc.split);
  return cfg;
}

void set_threads(int threads) {
  if (threads > 0) torch::set_num_threads(threads);
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ? c : '_');
  return out;
}

std::vector<data::UltrasoundSample> select_split(const std::vector<data::UltrasoundSample>& corpus,
                                                 const data::SplitSpec& spec, const std::string& which) {
  if (which == "all") return corpus;
  auto [train_part, val_part] = data::stratified_split(corpus, spec);
  return which == "train" ? train_part : val_part;
}

// ---------------------------------------------------------------- gen-data

struct GenDataFlags {
  int n = 1875;
  long long seed = 42;
  CLI::Option* seed_option = nullptr;
  std::string out;
  int image_size = 224;
  std::string params;
  bool decoy = false;
};

int cmd_gen_data(const GenDataFlags& f, std::ostream& out) {
  std::uint64_t seed = 42;
  if (f.seed_option->count() > 0) {
    seed = static_cast<std::uint64_t>(f.seed);
  } else if (auto s = env_seed()) {
    seed = static_cast<std::uint64_t>(*s);
  }
  if (f.n < static_cast<int>(data::kNumBirads)) throw UsageError("--n must be at least 4 (one case per category)");
  if (f.image_size < 16) throw UsageError("--image-size must be at least 16");
  data::SyntheticParams params;
  if (!f.params.empty()) params = data::SyntheticParams::load(f.params);
  if (f.decoy) params.decoy_lesion = true;
  const auto corpus = data::generate_synthetic_corpus(f.n, seed, f.image_size, params);
  data::write_corpus(f.out, corpus);
  params.to_config().save(fs::path(f.out) / "synthetic.cfg");
  out << "wrote " << corpus.size() << " cases to " << f.out << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainFlags {
  RunFlags run;
  std::string data;
  bool resume = false;
};

void make_run_layout(const fs::path& root) {
  for (const char* sub : {"checkpoints", "logs", "reports", "figures"}) fs::create_directories(root / sub);
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  const auto rc = resolve(f.run);
  const fs::path root(f.run.out);
  make_run_layout(root);
  resolved_to_config(rc).save(root / "logs" / "run.cfg");

  const auto corpus = data::load_corpus(f.data);
  const auto [train_part, val_part] = data::stratified_split(corpus, rc.split);
  const auto last = root / "checkpoints" / "last.ckpt";
  auto session = f.resume && fs::exists(last) ? train::Session::load(last)
                                               : train::Session(rc.model, rc.train, rc.weights);
  if (f.resume && fs::exists(last)) {
    out << "resuming after stage " << session.completed_stage << ", epoch " << session.stage_epochs_done << "\n";
  }
  set_threads(session.cfg.threads);
  const int size = session.model_cfg.encoder.image_size;
  const auto train_ex = train::prepare_examples(train_part, size);
  const auto val_ex = train::prepare_examples(val_part, size);
  out << "train " << train_ex.size() << " / val " << val_ex.size() << " cases\n";

  std::ofstream log_file(root / "logs" / "train.ndjson", std::ios::trunc);
  for (const auto& row : session.log) log_file << row.to_ndjson() << "\n";
  session.checkpoint_dir = root / "checkpoints";
  session.on_row = [&](const train::LogRow& row) {
    log_file << row.to_ndjson() << "\n";
    log_file.flush();
    out << "stage " << row.stage << " epoch " << row.epoch;
    for (const auto& [k, v] : row.terms) out << " " << k << "=" << v;
    if (row.val_dice) out << " val_dice=" << *row.val_dice;
    if (row.alignment) out << " alignment=" << *row.alignment;
    out << "\n";
  };
  train::run_full_schedule(session, train_ex, val_ex);

  auto ckpt = session.to_checkpoint();
  write_split(ckpt.config, rc.split);
  train::save_checkpoint(root / "checkpoints" / "best.ckpt", ckpt);
  const double dice = train::evaluate_dice(session.model, val_ex, session.cfg.batch_size);
  log_file << "{\"final_val_dice\":" << dice << "}\n";
  out << "final val Dice " << dice << "\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalFlags {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string split = "val";
  double temperature = 1.0;
  CLI::Option* temperature_option = nullptr;
  int bins = 15;
};

struct LoadedModel {
  train::Session session;
  data::SplitSpec split;
};

LoadedModel load_model(const std::string& path) {
  const auto ckpt = train::load_checkpoint(path);
  auto session = train::Session::from_checkpoint(ckpt);
  auto split = split_from(ckpt.config, session.cfg.seed);
  set_threads(session.cfg.threads);
  return {std::move(session), split};
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  auto loaded = load_model(f.ckpt);
  auto& session = loaded.session;
  const auto samples = select_split(data::load_corpus(f.data), loaded.split, f.split);
  const auto examples = train::prepare_examples(samples, session.model_cfg.encoder.image_size);
  const fs::path reports = fs::path(f.out) / "reports";
  fs::create_directories(reports);

  eval::EvalOptions opt;
  opt.batch_size = session.cfg.batch_size;
  opt.bins = f.bins;
  if (f.temperature_option->count() > 0) opt.temperature = f.temperature;
  opt.artifact_dir = reports;
  opt.trained = session.completed_stage >= 3;
  const auto result = eval::evaluate(session.model, examples, opt);
  result.report.save(reports / "metrics.txt");

  std::ofstream ndjson(reports / "explanations.ndjson", std::ios::trunc);
  for (std::size_t i = 0; i < result.explanations.size(); ++i) {
    const auto& c = result.report.cases[i];
    ndjson << explain::to_ndjson(c.case_id, result.explanations[i], c.calibrated, result.untrained[i]) << "\n";
  }
  const auto text = result.report.to_text();
  out << text.substr(0, text.find("[cases]"));
  return kExitOk;
}

// --------------------------------------------------------------- calibrate

struct CalibrateFlags {
  std::string report;
  std::string out;
  int bins = 15;
};

int cmd_calibrate(const CalibrateFlags& f, std::ostream& out) {
  const auto report = eval::MetricsReport::load(f.report);
  std::vector<double> conf, acc;
  for (const auto& c : report.cases) {
    conf.push_back(c.confidence);
    acc.push_back(c.soft_dice);
  }
  const auto fit = eval::fit_temperature(conf, acc, f.bins);
  const auto before = eval::calibration_metrics(conf, acc, f.bins);
  const auto after = eval::calibration_metrics(eval::apply_temperature(conf, fit.temperature), acc, f.bins);

  KeyValueConfig result;
  auto put = [&](const std::string& k, double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    result.set(k, os.str());
  };
  put("temperature", fit.temperature);
  put("ece_before", before.ece);
  put("ece_after", after.ece);
  put("brier_before", before.brier);
  put("brier_after", after.brier);
  result.set("bins", std::to_string(f.bins));
  result.set("cases", std::to_string(conf.size()));
  const fs::path reports = fs::path(f.out) / "reports";
  fs::create_directories(reports);
  result.save(reports / "calibration.txt");
  out << result.to_string();
  return kExitOk;
}

// ------------------------------------------------------------------ ablate

struct AblateFlags {
  RunFlags run;
  std::string data;
};

int cmd_ablate(const AblateFlags& f, std::ostream& out) {
  const auto rc = resolve(f.run);
  set_threads(rc.train.threads);
  const fs::path root(f.run.out);
  make_run_layout(root);
  resolved_to_config(rc).save(root / "logs" / "run.cfg");

  const auto corpus = data::load_corpus(f.data);
  const auto [train_part, val_part] = data::stratified_split(corpus, rc.split);
  const int size = rc.model.encoder.image_size;
  const auto train_ex = train::prepare_examples(train_part, size);
  const auto val_ex = train::prepare_examples(val_part, size);

  std::ofstream log_file(root / "logs" / "ablation.ndjson", std::ios::trunc);
  const auto rows = eval::run_ablation(train_ex, val_ex, rc.model, rc.train, rc.weights,
                                       [&](const eval::AblationRow& r) {
                                         log_file << "{\"configuration\":\"" << r.name << "\",\"dice\":" << r.dice
                                                  << ",\"cider\":" << r.cider << ",\"ece_percent\":" << r.ece_percent
                                                  << ",\"clip_score\":" << r.clip_score << "}\n";
                                         log_file.flush();
                                         out << r.name << ": Dice " << r.dice << "\n";
                                       });
  const auto table = eval::format_ablation_table(rows);
  std::ofstream(root / "reports" / "ablation.txt", std::ios::trunc) << table;
  std::ofstream(root / "reports" / "ablation.csv", std::ios::trunc) << eval::ablation_csv(rows);
  out << table;
  return kExitOk;
}

// ----------------------------------------------------------------- explain

struct ExplainFlags {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string split = "all";
  std::vector<std::string> cases;
  std::string laterality;
  double temperature = 1.0;
};

int cmd_explain(const ExplainFlags& f, std::ostream& out) {
  auto loaded = load_model(f.ckpt);
  auto& session = loaded.session;
  auto samples = select_split(data::load_corpus(f.data), loaded.split, f.split);
  if (!f.cases.empty()) {
    std::vector<data::UltrasoundSample> picked;
    for (const auto& id : f.cases) {
      auto it = std::find_if(samples.begin(), samples.end(),
                             [&](const data::UltrasoundSample& s) { return s.record.case_id == id; });
      if (it == samples.end()) throw UsageError("case '" + id + "' not found in " + f.data);
      picked.push_back(*it);
    }
    samples = std::move(picked);
  }
  explain::RecordOverrides overrides;
  if (!f.laterality.empty()) {
    overrides.laterality = data::parse_laterality(f.laterality);
    if (!overrides.laterality) throw UsageError("--laterality must be left or right");
  }
  const auto examples = train::prepare_examples(samples, session.model_cfg.encoder.image_size);
  const fs::path reports = fs::path(f.out) / "reports";
  fs::create_directories(reports);
  std::ofstream ndjson(reports / "explanations.ndjson", std::ios::trunc);

  torch::NoGradGuard guard;
  session.model->eval();
  const bool trained = session.completed_stage >= 3;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng unused(0);
  train::BatchOptions bopt;
  for (const auto& idx : train::chunk(order, session.cfg.batch_size)) {
    const auto batch = train::make_batch(examples, idx, unused, bopt);
    const auto fwd = session.model->forward(batch.inputs);
    const auto neural = explain::generate_neural(session.model, fwd.pooled, session.model_cfg.caption_max_len, trained);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto i = static_cast<std::int64_t>(k);
      auto case_overrides = overrides;
      const double calibrated =
          eval::apply_temperature(fwd.bundle.confidence[i].item<double>(), f.temperature);
      case_overrides.confidence = calibrated;
      const auto e = explain::explain_case(fwd.bundle, i, neural[k], case_overrides);
      ndjson << explain::to_ndjson(batch.case_ids[k], e, calibrated, neural[k].untrained) << "\n";
      out << batch.case_ids[k] << ": " << e.composed << "\n";
    }
  }
  return kExitOk;
}

// -------------------------------------------------------------------- plot

struct PlotFlags {
  std::string report;
  std::string out;
  int bins = 15;
};

RgbImage load_artifact(const fs::path& dir, const std::string& rel, const std::string& case_id) {
  if (rel.empty()) throw StateError("case " + case_id + " has no stored images; run eval with artifacts first");
  const auto path = dir / rel;
  if (!fs::exists(path)) throw StateError("missing artifact " + path.string());
  return png::read_rgb8(path);
}

int cmd_plot(const PlotFlags& f, std::ostream& out) {
  const auto report = eval::MetricsReport::load(f.report);
  if (report.cases.empty()) {
    log::warn("plot: report has no cases; nothing to draw");
    return kExitOk;
  }
  const fs::path dir = fs::path(f.report).parent_path();
  const fs::path figures = fs::path(f.out) / "figures";
  fs::create_directories(figures);
  std::vector<double> conf, calibrated, acc;
  for (const auto& c : report.cases) {
    const auto panel = eval::case_figure(load_artifact(dir, c.input_png, c.case_id),
                                         load_artifact(dir, c.truth_png, c.case_id),
                                         load_artifact(dir, c.pred_png, c.case_id),
                                         load_artifact(dir, c.heatmap_png, c.case_id), c.confidence, c.calibrated);
    png::write_rgb8(figures / ("case_" + safe_name(c.case_id) + ".png"), panel);
    conf.push_back(c.confidence);
    calibrated.push_back(c.calibrated);
    acc.push_back(c.soft_dice);
  }
  png::write_rgb8(figures / "reliability_raw.png", eval::reliability_diagram(conf, acc, f.bins));
  png::write_rgb8(figures / "reliability_calibrated.png", eval::reliability_diagram(calibrated, acc, f.bins));
  out << "wrote " << report.cases.size() << " case figures and 2 reliability diagrams to " << figures.string()
      << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"medctx: multimodal breast ultrasound segmentation and explanation", "medctx"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic BUS-BRA style corpus");
  gen_cmd->add_option("--n", gen.n, "Number of cases")->capture_default_str();
  gen.seed_option = gen_cmd->add_option("--seed", gen.seed, "Corpus seed (default: MEDCTX_SEED, else 42)");
  gen_cmd->add_option("--out", gen.out, "Corpus directory")->required();
  gen_cmd->add_option("--image-size", gen.image_size, "Image side in pixels")->capture_default_str();
  gen_cmd->add_option("--params", gen.params, "Generator parameter file")->check(CLI::ExistingFile);
  gen_cmd->add_flag("--decoy", gen.decoy, "Draw an unlabeled decoy lesion in the other half of each image");

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "Run the three training stages");
  tr.run.add_to(*train_cmd);
  train_cmd->add_option("--data", tr.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_flag("--resume", tr.resume, "Continue from OUT/checkpoints/last.ckpt when present");

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and write a metrics report");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();
  eval_cmd->add_option("--split", ev.split, "Cases to evaluate")
      ->check(CLI::IsMember({"val", "train", "all"}))
      ->capture_default_str();
  ev.temperature_option =
      eval_cmd->add_option("--temperature", ev.temperature, "Confidence temperature (default: fit on these cases)")
          ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--bins", ev.bins, "Calibration bins")->check(CLI::PositiveNumber)->capture_default_str();

  CalibrateFlags cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Fit the confidence temperature from a metrics report");
  cal_cmd->add_option("--report", cal.report, "metrics.txt written by eval")->required()->check(CLI::ExistingFile);
  cal_cmd->add_option("--out", cal.out, "Output directory")->required();
  cal_cmd->add_option("--bins", cal.bins, "Calibration bins")->check(CLI::PositiveNumber)->capture_default_str();

  AblateFlags ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate the six ablation configurations");
  ab.run.add_to(*ablate_cmd);
  ablate_cmd->add_option("--data", ab.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);

  ExplainFlags ex;
  auto* explain_cmd = app.add_subcommand("explain", "Write explanations for cases");
  explain_cmd->add_option("--ckpt", ex.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  explain_cmd->add_option("--data", ex.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  explain_cmd->add_option("--out", ex.out, "Output directory")->required();
  explain_cmd->add_option("--split", ex.split, "Cases to explain")
      ->check(CLI::IsMember({"val", "train", "all"}))
      ->capture_default_str();
  explain_cmd->add_option("--case", ex.cases, "Only this case id (repeatable)");
  explain_cmd->add_option("--laterality", ex.laterality, "Known laterality (left or right) overriding the prediction");
  explain_cmd->add_option("--temperature", ex.temperature, "Confidence temperature")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  PlotFlags pl;
  auto* plot_cmd = app.add_subcommand("plot", "Draw per-case panels and reliability diagrams");
  plot_cmd->add_option("--report", pl.report, "metrics.txt written by eval")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", pl.out, "Output directory")->required();
  plot_cmd->add_option("--bins", pl.bins, "Reliability diagram bins")->check(CLI::PositiveNumber)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (cal_cmd->parsed()) return cmd_calibrate(cal, out);
    if (ablate_cmd->parsed()) return cmd_ablate(ab, out);
    if (explain_cmd->parsed()) return cmd_explain(ex, out);
    if (plot_cmd->parsed()) return cmd_plot(pl, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace medctx::cli
