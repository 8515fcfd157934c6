#pragma once

#include <vector>

namespace medctx::eval {

struct CalibrationMetrics {
  double ece = 0.0;
  double brier = 0.0;
};

/// Regression-style calibration: `accuracies` are per-sample soft Dice scores.
/// ECE uses equal-width bins over [0,1]; a confidence of exactly 1 falls into
/// the last bin.
CalibrationMetrics calibration_metrics(const std::vector<double>& confidences, const std::vector<double>& accuracies,
                                       int bins = 15);

/// sigmoid(T * logit(c)) with c clipped to [1e-6, 1 - 1e-6]. T < 1 softens
/// over-confident scores.
double apply_temperature(double confidence, double temperature);
std::vector<double> apply_temperature(const std::vector<double>& confidences, double temperature);

struct TemperatureFit {
  double temperature = 1.0;
  double ece_before = 0.0;
  double ece_after = 0.0;
};

/// Minimizes ECE of the rescaled confidences over T in [0.05, 10]: a
/// log-spaced scan brackets the minimum and golden-section search refines it.
/// T = 1 is kept when nothing beats it, so ece_after <= ece_before.
TemperatureFit fit_temperature(const std::vector<double>& confidences, const std::vector<double>& accuracies,
                               int bins = 15);

}  // namespace medctx::eval
