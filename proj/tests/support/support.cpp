#include "support.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include <unistd.h>

#include "medctx/data/synthetic.hpp"

namespace medctx::support {

std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("medctx_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<data::UltrasoundSample> small_corpus(int n, std::uint64_t seed, int image_size) {
  return data::generate_synthetic_corpus(n, seed, image_size);
}

Mask random_mask(Rng& rng, int height, int width, double density) {
  Mask m(height, width, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) m(y, x) = bernoulli(rng, density) ? 1 : 0;
  }
  return m;
}

std::vector<std::pair<int, int>> brute_boundary(const Mask& m) {
  std::vector<std::pair<int, int>> out;
  auto on = [&](int y, int x) { return y >= 0 && x >= 0 && y < m.height() && x < m.width() && m(y, x) != 0; };
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!on(y, x)) continue;
      bool edge = false;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dy != 0 || dx != 0) && !on(y + dy, x + dx)) edge = true;
        }
      }
      if (edge) out.emplace_back(y, x);
    }
  }
  return out;
}

MaskOracle brute_mask_metrics(const Mask& pred, const Mask& gt) {
  long inter = 0, p = 0, g = 0, agree = 0;
  const long total = static_cast<long>(pred.height()) * pred.width();
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      const bool a = pred(y, x) != 0, b = gt(y, x) != 0;
      inter += a && b;
      p += a;
      g += b;
      agree += a == b;
    }
  }
  MaskOracle o;
  o.dice = p + g == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
  const long uni = p + g - inter;
  o.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  o.pixel_acc = static_cast<double>(agree) / static_cast<double>(total);

  const auto bp = brute_boundary(pred), bg = brute_boundary(gt);
  if (bp.empty() && bg.empty()) {
    o.hausdorff = 0.0;
  } else if (bp.empty() || bg.empty()) {
    o.hausdorff = std::hypot(static_cast<double>(pred.height()), static_cast<double>(pred.width()));
  } else {
    auto directed = [](const auto& from, const auto& to) {
      long worst = 0;
      for (auto [y1, x1] : from) {
        long best = std::numeric_limits<long>::max();
        for (auto [y2, x2] : to) {
          const long d = static_cast<long>(y1 - y2) * (y1 - y2) + static_cast<long>(x1 - x2) * (x1 - x2);
          best = std::min(best, d);
        }
        worst = std::max(worst, best);
      }
      return worst;
    };
    o.hausdorff = std::sqrt(static_cast<double>(std::max(directed(bp, bg), directed(bg, bp))));
  }
  return o;
}

double gradient_error(const ScalarFn& f, const std::vector<torch::Tensor>& inputs, double h) {
  std::vector<torch::Tensor> leaves;
  for (const auto& t : inputs) leaves.push_back(t.detach().clone().set_requires_grad(true));
  f(leaves).backward();

  double max_diff = 0.0, max_ref = 0.0;
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> probe;
  for (const auto& t : inputs) probe.push_back(t.detach().clone());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    auto flat = probe[k].view({-1});
    const auto analytic = leaves[k].grad().defined() ? leaves[k].grad().reshape({-1})
                                                     : torch::zeros_like(flat);
    auto acc = flat.accessor<double, 1>();
    for (std::int64_t i = 0; i < flat.size(0); ++i) {
      const double x0 = acc[i];
      acc[i] = x0 + h;
      const double up = f(probe).item<double>();
      acc[i] = x0 - h;
      const double down = f(probe).item<double>();
      acc[i] = x0;
      const double numeric = (up - down) / (2.0 * h);
      max_diff = std::max(max_diff, std::abs(analytic[i].item<double>() - numeric));
      max_ref = std::max(max_ref, std::abs(numeric));
    }
  }
  return max_diff / std::max(max_ref, 1e-12);
}

double brute_ntxent(const torch::Tensor& v1, const torch::Tensor& v2, double tau) {
  const auto z = torch::cat({v1, v2}).to(torch::kDouble);
  const auto n = z.size(0), b = v1.size(0);
  std::vector<std::vector<double>> unit(n);
  for (std::int64_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::int64_t d = 0; d < z.size(1); ++d) norm += z[i][d].item<double>() * z[i][d].item<double>();
    norm = std::sqrt(norm);
    for (std::int64_t d = 0; d < z.size(1); ++d) unit[i].push_back(z[i][d].item<double>() / norm);
  }
  auto sim = [&](std::int64_t i, std::int64_t j) {
    double s = 0.0;
    for (std::size_t d = 0; d < unit[i].size(); ++d) s += unit[i][d] * unit[j][d];
    return s / tau;
  };
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t pos = i < b ? i + b : i - b;
    double denom = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      if (j != i) denom += std::exp(sim(i, j));
    }
    total += -std::log(std::exp(sim(i, pos)) / denom);
  }
  return total / static_cast<double>(n);
}

}  // namespace medctx::support
