#pragma once

#include <optional>

#include "medctx/core/rng.hpp"
#include "medctx/data/clinical.hpp"

namespace medctx::data {

enum class Mode { train, val };

struct AugmentOptions {
  int output_size = 224;
  double max_rotation_deg = 15.0;
  double flip_probability = 0.5;
  double jitter = 0.1;  // brightness offset and contrast factor range, +-
};

/// Pins individual random choices (tests, deterministic visualisation).
struct AugmentOverride {
  std::optional<bool> flip;
  std::optional<double> rotation_deg;
  std::optional<double> brightness;  // additive, in normalized units
  std::optional<double> contrast;    // multiplicative
};

struct Preprocessed {
  Image image;  // zero mean / unit variance (or all zeros if degenerate)
  Mask mask;
  bool degenerate = false;
};

/// Keeps pixels whose raw value is at least 1/factor of full intensity.
Mask process_mask(const Image& raw_mask, double factor = 2.5);

Image resize_bilinear(const Image& src, int height, int width);
Mask resize_nearest(const Mask& src, int height, int width);

/// Resize to output_size, then (train mode) rotation + horizontal flip applied
/// identically to image and mask and brightness/contrast jitter on the image.
/// Val mode resizes and normalizes only. The rng is consumed only in train mode.
Preprocessed preprocess(const UltrasoundSample& sample, Mode mode, Rng& rng,
                        const AugmentOptions& options = {}, const AugmentOverride& pinned = {});

/// Standardizes to zero mean / unit variance in place; returns false (and
/// zeroes the image) when the image is constant.
bool normalize_image(Image& image);

}  // namespace medctx::data
