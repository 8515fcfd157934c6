#include "medctx/eval/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "medctx/core/errors.hpp"

namespace medctx::eval {
namespace {

constexpr double kClip = 1e-6;
constexpr double kMinT = 0.05;
constexpr double kMaxT = 10.0;

void check_pairs(const std::vector<double>& c, const std::vector<double>& a) {
  if (c.empty()) throw InvalidArgument("calibration needs at least one sample");
  if (c.size() != a.size()) throw InvalidArgument("confidences and accuracies differ in length");
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(c[i] >= 0.0 && c[i] <= 1.0) || !(a[i] >= 0.0 && a[i] <= 1.0)) {
      throw InvalidArgument("confidences and accuracies must lie in [0,1]");
    }
  }
}

}  // namespace

CalibrationMetrics calibration_metrics(const std::vector<double>& conf, const std::vector<double>& acc, int bins) {
  check_pairs(conf, acc);
  if (bins < 1) throw InvalidArgument("bins must be positive");
  std::vector<double> sum_c(bins, 0.0), sum_a(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  CalibrationMetrics m;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const int b = std::min(bins - 1, static_cast<int>(conf[i] * bins));
    sum_c[b] += conf[i];
    sum_a[b] += acc[i];
    ++count[b];
    m.brier += (conf[i] - acc[i]) * (conf[i] - acc[i]);
  }
  const double n = static_cast<double>(conf.size());
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double k = static_cast<double>(count[b]);
    m.ece += (k / n) * std::abs(sum_c[b] / k - sum_a[b] / k);
  }
  m.brier /= n;
  return m;
}

double apply_temperature(double c, double t) {
  const double p = std::clamp(c, kClip, 1.0 - kClip);
  const double z = t * std::log(p / (1.0 - p));
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<double> apply_temperature(const std::vector<double>& conf, double t) {
  std::vector<double> out(conf.size());
  std::transform(conf.begin(), conf.end(), out.begin(), [t](double c) { return apply_temperature(c, t); });
  return out;
}

TemperatureFit fit_temperature(const std::vector<double>& conf, const std::vector<double>& acc, int bins) {
  check_pairs(conf, acc);
  if (conf.size() < 10) throw InvalidArgument("fit_temperature needs at least 10 validation pairs");
  auto ece_at = [&](double log_t) { return calibration_metrics(apply_temperature(conf, std::exp(log_t)), acc, bins).ece; };

  const double lo = std::log(kMinT), hi = std::log(kMaxT);
  constexpr int kScan = 200;
  int best = 0;
  double best_ece = ece_at(lo);
  for (int i = 1; i <= kScan; ++i) {
    const double e = ece_at(lo + (hi - lo) * i / kScan);
    if (e < best_ece) {
      best_ece = e;
      best = i;
    }
  }
  double a = lo + (hi - lo) * std::max(0, best - 1) / kScan;
  double b = lo + (hi - lo) * std::min(kScan, best + 1) / kScan;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
  double f1 = ece_at(x1), f2 = ece_at(x2);
  for (int it = 0; it < 80 && b - a > 1e-10; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = ece_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = ece_at(x2);
    }
  }
  double log_t = lo + (hi - lo) * best / kScan;
  for (auto [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}}) {
    if (f < best_ece) {
      best_ece = f;
      log_t = x;
    }
  }
  TemperatureFit fit;
  fit.ece_before = calibration_metrics(conf, acc, bins).ece;
  const double identity = ece_at(0.0);
  if (identity <= best_ece) {
    fit.temperature = 1.0;
    fit.ece_after = identity;
  } else {
    fit.temperature = std::exp(log_t);
    fit.ece_after = best_ece;
  }
  // clipping can make T = 1 differ from the raw confidences
  if (fit.ece_after > fit.ece_before) {
    fit.temperature = 1.0;
    fit.ece_after = fit.ece_before;
  }
  return fit;
}

}  // namespace medctx::eval
