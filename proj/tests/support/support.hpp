#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "medctx/core/grid.hpp"
#include "medctx/core/rng.hpp"
#include "medctx/data/clinical.hpp"
#include "medctx/model/config.hpp"

namespace medctx::support {

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::vector<data::UltrasoundSample> small_corpus(int n, std::uint64_t seed, int image_size = 32);

Mask random_mask(Rng& rng, int height, int width, double density);

// Pixel-set oracle, written without reference to the library implementation.
struct MaskOracle {
  double dice = 0.0, iou = 0.0, pixel_acc = 0.0, hausdorff = 0.0;
};
MaskOracle brute_mask_metrics(const Mask& pred, const Mask& gt);

/// Boundary by direct neighbour inspection (8-neighbourhood, outside = 0).
std::vector<std::pair<int, int>> brute_boundary(const Mask& m);

using ScalarFn = std::function<torch::Tensor(const std::vector<torch::Tensor>&)>;

/// max |analytic - central difference| / max |central difference| over every
/// element of every input. Inputs must be double tensors.
double gradient_error(const ScalarFn& f, const std::vector<torch::Tensor>& inputs, double h = 1e-6);

/// NT-Xent by explicit loops over the 2B anchors.
double brute_ntxent(const torch::Tensor& v1, const torch::Tensor& v2, double tau);

}  // namespace medctx::support
