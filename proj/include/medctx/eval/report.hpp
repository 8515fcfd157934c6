#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace medctx::eval {

struct CaseRecord {
  std::string case_id;
  double dice = 0.0, iou = 0.0, pixel_acc = 0.0, hausdorff = 0.0;
  double soft_dice = 0.0;  // calibration target
  double confidence = 0.0;
  double calibrated = 0.0;
  int birads_true = 0;
  int birads_pred = 0;
  std::string explanation;
  std::string neural;
  std::string reference;
  // Per-case images, relative to the report's directory (empty if not written).
  std::string input_png, truth_png, pred_png, heatmap_png;

  friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

/// Text document: `key = value` lines for the summary metrics, then a
/// `[cases]` section holding a CSV table with one row per case.
struct MetricsReport {
  double dice = 0.0, iou = 0.0, pixel_acc = 0.0, hausdorff = 0.0;
  double ece = 0.0, brier = 0.0;
  double ece_calibrated = 0.0, brier_calibrated = 0.0;
  double temperature = 1.0;
  double bleu4 = 0.0, cider = 0.0, meteor = 0.0;
  double birads_acc = 0.0;
  double clip_score = 0.0;
  std::vector<CaseRecord> cases;

  [[nodiscard]] std::string to_text() const;
  static MetricsReport parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static MetricsReport load(const std::filesystem::path& path);

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Summary keys written by to_text, in order.
const std::vector<std::string>& report_keys();

}  // namespace medctx::eval
