#include "medctx/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "medctx/core/errors.hpp"
#include "medctx/core/log.hpp"

namespace medctx::data {
namespace {

float sample_bilinear(const Image& src, double y, double x, float fill) {
  const int h = src.height(), w = src.width();
  if (y < -0.5 || x < -0.5 || y > h - 0.5 || x > w - 0.5) return fill;
  y = std::clamp(y, 0.0, h - 1.0);
  x = std::clamp(x, 0.0, w - 1.0);
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - y0, fx = x - x0;
  const double top = src(y0, x0) * (1 - fx) + src(y0, x1) * fx;
  const double bottom = src(y1, x0) * (1 - fx) + src(y1, x1) * fx;
  return static_cast<float>(top * (1 - fy) + bottom * fy);
}

std::uint8_t sample_nearest(const Mask& src, double y, double x) {
  const int yi = static_cast<int>(std::floor(y + 0.5));
  const int xi = static_cast<int>(std::floor(x + 0.5));
  if (yi < 0 || xi < 0 || yi >= src.height() || xi >= src.width()) return 0;
  return src(yi, xi);
}

// Rotation about the image centre by `deg` (counter-clockwise on screen).
template <typename Sampler, typename G>
G rotate(const G& src, double deg, Sampler sample) {
  G out(src.height(), src.width());
  const double rad = deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cy = (src.height() - 1) / 2.0, cx = (src.width() - 1) / 2.0;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const double dx = x - cx, dy = y - cy;
      // inverse map: output pixel -> source location
      const double sx = c * dx - s * dy + cx;
      const double sy = s * dx + c * dy + cy;
      out(y, x) = sample(src, sy, sx);
    }
  }
  return out;
}

template <typename G>
G flip_horizontal(const G& src) {
  G out(src.height(), src.width());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) out(y, x) = src(y, src.width() - 1 - x);
  }
  return out;
}

}  // namespace

Mask process_mask(const Image& raw_mask, double factor) {
  if (!(factor > 1.0)) throw InvalidArgument("mask threshold factor must exceed 1");
  const double threshold = 1.0 / factor;
  Mask out(raw_mask.height(), raw_mask.width());
  auto src = raw_mask.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1 : 0;
  return out;
}

Image resize_bilinear(const Image& src, int height, int width) {
  if (src.empty()) throw ShapeError("resize of empty image");
  if (src.height() == height && src.width() == width) return src;
  Image out(height, width);
  const double sy = static_cast<double>(src.height()) / height;
  const double sx = static_cast<double>(src.width()) / width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // pixel-centre alignment
      out(y, x) = sample_bilinear(src, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5, 0.0f);
    }
  }
  return out;
}

Mask resize_nearest(const Mask& src, int height, int width) {
  if (src.empty()) throw ShapeError("resize of empty mask");
  if (src.height() == height && src.width() == width) return src;
  Mask out(height, width);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(src.height() - 1, static_cast<int>((y + 0.5) * src.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(src.width() - 1, static_cast<int>((x + 0.5) * src.width() / width));
      out(y, x) = src(sy, sx);
    }
  }
  return out;
}

bool normalize_image(Image& image) {
  auto v = image.values();
  if (v.empty()) return false;
  double mean = 0.0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (float x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  if (var < 1e-12) {
    std::fill(v.begin(), v.end(), 0.0f);
    return false;
  }
  const double inv_std = 1.0 / std::sqrt(var);
  for (float& x : v) x = static_cast<float>((x - mean) * inv_std);
  return true;
}

Preprocessed preprocess(const UltrasoundSample& sample, Mode mode, Rng& rng,
                        const AugmentOptions& options, const AugmentOverride& pinned) {
  validate(sample);
  const int size = options.output_size;
  Preprocessed out;
  out.image = resize_bilinear(sample.image, size, size);
  out.mask = resize_nearest(sample.mask, size, size);

  if (mode == Mode::train) {
    // Draw every random quantity up front so overrides do not shift the stream.
    const double angle = uniform(rng, -options.max_rotation_deg, options.max_rotation_deg);
    const bool flip = bernoulli(rng, options.flip_probability);
    const double brightness = uniform(rng, -options.jitter, options.jitter);
    const double contrast = uniform(rng, 1.0 - options.jitter, 1.0 + options.jitter);

    const double use_angle = pinned.rotation_deg.value_or(angle);
    if (use_angle != 0.0) {
      out.image = rotate(out.image, use_angle, [](const Image& g, double y, double x) {
        return sample_bilinear(g, y, x, 0.0f);
      });
      out.mask = rotate(out.mask, use_angle, sample_nearest);
    }
    if (pinned.flip.value_or(flip)) {
      out.image = flip_horizontal(out.image);
      out.mask = flip_horizontal(out.mask);
    }
    out.degenerate = !normalize_image(out.image);
    if (!out.degenerate) {
      const float b = static_cast<float>(pinned.brightness.value_or(brightness));
      const float c = static_cast<float>(pinned.contrast.value_or(contrast));
      for (float& x : out.image.values()) x = x * c + b;
    }
  } else {
    out.degenerate = !normalize_image(out.image);
  }
  if (out.degenerate) {
    log::warn("case ", sample.record.case_id, ": constant image; normalized to zeros");
  }
  return out;
}

}  // namespace medctx::data
