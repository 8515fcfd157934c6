#pragma once

#include <string_view>
#include <vector>

#include "medctx/core/grid.hpp"

namespace medctx::eval {

/// R = attention bilinearly upsampled to the image size and min-max
/// normalized (constant maps give 0), G = grayscale input in [0,1], B = U.
/// Channels are quantized as floor(255 * v).
RgbImage render_heatmap(const Image& gray, const Image& attention, const Image& uncertainty);

/// Draws `text` with a 5x7 bitmap font (upper-case letters, digits and
/// . : - % = ( ) /), each font pixel scaled to `scale` x `scale`.
void draw_text(RgbImage& canvas, int x, int y, std::string_view text, Rgb color, int scale = 1);
int text_width(std::string_view text, int scale = 1);

RgbImage gray_to_rgb(const Grid<std::uint8_t>& gray);

/// Five panels left to right: input, ground truth, prediction, heatmap and a
/// confidence panel (value as text plus a bar).
RgbImage case_figure(const RgbImage& input, const RgbImage& truth, const RgbImage& prediction,
                     const RgbImage& heatmap, double confidence, double calibrated_confidence);

/// Reliability diagram: per-bin mean accuracy bars against the diagonal.
RgbImage reliability_diagram(const std::vector<double>& confidences, const std::vector<double>& accuracies,
                             int bins = 15, int size = 300);

}  // namespace medctx::eval
