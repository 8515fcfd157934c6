#include "medctx/eval/seg_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace medctx::eval {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// 1-D squared distance transform of f (Felzenszwalb & Huttenlocher).
void dt1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  d.assign(n, kInf);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = -1;
  auto meet = [&](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = meet(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = meet(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

Mask boundary(const Mask& m) {
  Mask out(m.height(), m.width(), 0);
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(y, x)) continue;
      bool edge = false;
      for (int dy = -1; dy <= 1 && !edge; ++dy) {
        for (int dx = -1; dx <= 1 && !edge; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= m.height() || xx >= m.width() || !m(yy, xx)) edge = true;
        }
      }
      out(y, x) = edge ? 1 : 0;
    }
  }
  return out;
}

Grid<double> squared_distance_transform(const Mask& sites) {
  const int h = sites.height(), w = sites.width();
  Grid<double> out(h, w, kInf);
  std::vector<double> f, d;
  for (int x = 0; x < w; ++x) {
    f.assign(h, kInf);
    for (int y = 0; y < h; ++y) f[y] = sites(y, x) ? 0.0 : kInf;
    dt1d(f, d);
    for (int y = 0; y < h; ++y) out(y, x) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    f.assign(w, kInf);
    for (int x = 0; x < w; ++x) f[x] = out(y, x);
    dt1d(f, d);
    for (int x = 0; x < w; ++x) out(y, x) = d[x];
  }
  return out;
}

double hausdorff_distance(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "hausdorff_distance");
  const auto ba = boundary(a), bb = boundary(b);
  const bool ea = std::none_of(ba.values().begin(), ba.values().end(), [](auto v) { return v != 0; });
  const bool eb = std::none_of(bb.values().begin(), bb.values().end(), [](auto v) { return v != 0; });
  if (ea && eb) return 0.0;
  if (ea || eb) return std::hypot(static_cast<double>(a.height()), static_cast<double>(a.width()));
  const auto da = squared_distance_transform(ba), db = squared_distance_transform(bb);
  double worst = 0.0;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (ba.data()[i]) worst = std::max(worst, db.data()[i]);
    if (bb.data()[i]) worst = std::max(worst, da.data()[i]);
  }
  return std::sqrt(worst);
}

SegMetrics seg_metrics(const Mask& pred, const Mask& gt) {
  require_same_shape(pred, gt, "seg_metrics");
  std::size_t p = 0, g = 0, inter = 0, agree = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred.data()[i] != 0, b = gt.data()[i] != 0;
    p += a;
    g += b;
    inter += a && b;
    agree += a == b;
  }
  SegMetrics m;
  const std::size_t uni = p + g - inter;
  m.dice = (p + g) == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
  m.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  m.pixel_acc = pred.size() == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(pred.size());
  m.hausdorff = hausdorff_distance(pred, gt);
  return m;
}

}  // namespace medctx::eval
