#pragma once

#include <filesystem>

#include "medctx/core/grid.hpp"

namespace medctx::png {

/// Reads any PNG as 8-bit grayscale (color inputs are luminance-converted,
/// alpha is dropped, 16-bit is reduced). Throws IoError on failure.
Grid<std::uint8_t> read_gray8(const std::filesystem::path& path);
/// Reads any PNG as 8-bit RGB (gray inputs are replicated).
RgbImage read_rgb8(const std::filesystem::path& path);

void write_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& image);
void write_rgb8(const std::filesystem::path& path, const RgbImage& image);

/// Maps [0,1] floats to 8-bit with clamping.
Grid<std::uint8_t> to_gray8(const Image& image);
/// Min-max stretches an arbitrary-range image to 8-bit; constant images map to 0.
Grid<std::uint8_t> stretch_to_gray8(const Image& image);

}  // namespace medctx::png
