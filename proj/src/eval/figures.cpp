#include "medctx/eval/figures.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "medctx/core/errors.hpp"
#include "medctx/data/preprocess.hpp"

namespace medctx::eval {
namespace {

struct Glyph {
  char ch;
  std::array<std::uint8_t, 5> columns;  // bit 0 = top row
};

constexpr Glyph kFont[] = {
    {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}}, {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}},
    {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}},
    {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
    {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
    {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}},
    {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}}, {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}},
    {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}}, {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}},
    {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}}, {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}},
    {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}}, {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}},
    {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}}, {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}},
    {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}}, {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}},
    {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}}, {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}},
    {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}}, {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}},
    {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}}, {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}},
    {'S', {0x46, 0x49, 0x49, 0x49, 0x31}}, {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}},
    {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}}, {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}},
    {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}}, {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
    {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}}, {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
    {'.', {0x00, 0x60, 0x60, 0x00, 0x00}}, {':', {0x00, 0x36, 0x36, 0x00, 0x00}},
    {'-', {0x08, 0x08, 0x08, 0x08, 0x08}}, {'%', {0x23, 0x13, 0x08, 0x64, 0x62}},
    {'=', {0x14, 0x14, 0x14, 0x14, 0x14}}, {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}},
    {')', {0x00, 0x41, 0x22, 0x1C, 0x00}}, {'/', {0x20, 0x10, 0x08, 0x04, 0x02}},
};

const Glyph* find_glyph(char c) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont) {
    if (g.ch == up) return &g;
  }
  return nullptr;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v * 255.0), 0.0, 255.0));
}

void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1, Rgb color) {
  for (int y = std::max(0, y0); y < std::min(img.height(), y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(img.width(), x1); ++x) img(y, x) = color;
  }
}

void blit(RgbImage& dst, const RgbImage& src, int x0, int y0) {
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      if (y0 + y < dst.height() && x0 + x < dst.width()) dst(y0 + y, x0 + x) = src(y, x);
    }
  }
}

void draw_line(RgbImage& img, int x0, int y0, int x1, int y1, Rgb color) {
  const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  for (int i = 0; i <= steps; ++i) {
    const double t = steps == 0 ? 0.0 : static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) img(y, x) = color;
  }
}

}  // namespace

RgbImage render_heatmap(const Image& gray, const Image& attention, const Image& uncertainty) {
  require_same_shape(gray, uncertainty, "render_heatmap");
  const auto up = data::resize_bilinear(attention, gray.height(), gray.width());
  const auto [lo, hi] = std::minmax_element(up.values().begin(), up.values().end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  RgbImage out(gray.height(), gray.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = range > 0.0 ? (up.data()[i] - *lo) / range : 0.0;
    out.data()[i] = {quantize(r), quantize(gray.data()[i]), quantize(uncertainty.data()[i])};
  }
  return out;
}

int text_width(std::string_view text, int scale) { return static_cast<int>(text.size()) * 6 * scale; }

void draw_text(RgbImage& canvas, int x, int y, std::string_view text, Rgb color, int scale) {
  for (char c : text) {
    if (const auto* g = find_glyph(c)) {
      for (int col = 0; col < 5; ++col) {
        for (int row = 0; row < 7; ++row) {
          if (g->columns[col] >> row & 1) {
            fill_rect(canvas, x + col * scale, y + row * scale, x + (col + 1) * scale, y + (row + 1) * scale, color);
          }
        }
      }
    }
    x += 6 * scale;
  }
}

RgbImage gray_to_rgb(const Grid<std::uint8_t>& gray) {
  RgbImage out(gray.height(), gray.width());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = {gray.data()[i], gray.data()[i], gray.data()[i]};
  return out;
}

RgbImage case_figure(const RgbImage& input, const RgbImage& truth, const RgbImage& prediction,
                     const RgbImage& heatmap, double confidence, double calibrated_confidence) {
  const int s = input.height();
  constexpr int kGap = 4, kTitle = 20;
  const Rgb white{255, 255, 255};
  RgbImage out(s + kTitle + kGap, 5 * s + 6 * kGap, Rgb{24, 24, 24});
  const char* titles[] = {"INPUT", "TRUTH", "PREDICTION", "HEATMAP", "CONFIDENCE"};
  const char* short_titles[] = {"IN", "GT", "PRED", "MAP", "CONF"};
  const RgbImage* panels[] = {&input, &truth, &prediction, &heatmap};
  for (int p = 0; p < 5; ++p) {
    const int x0 = kGap + p * (s + kGap);
    draw_text(out, x0, 6, text_width(titles[p]) <= s ? titles[p] : short_titles[p], white, 1);
    if (p < 4) {
      blit(out, *panels[p], x0, kTitle);
      continue;
    }
    fill_rect(out, x0, kTitle, x0 + s, kTitle + s, Rgb{0, 0, 0});
    char line[32];
    std::snprintf(line, sizeof line, "C=%.2f", confidence);
    const int scale = std::max(1, s / 64);
    draw_text(out, x0 + 4, kTitle + 8, line, white, scale);
    std::snprintf(line, sizeof line, "CAL=%.2f", calibrated_confidence);
    draw_text(out, x0 + 4, kTitle + 8 + 10 * scale, line, white, scale);
    const int bar_y = kTitle + s - 12 * scale;
    fill_rect(out, x0 + 4, bar_y, x0 + s - 4, bar_y + 6 * scale, Rgb{70, 70, 70});
    const int filled = static_cast<int>(std::lround((s - 8) * std::clamp(calibrated_confidence, 0.0, 1.0)));
    fill_rect(out, x0 + 4, bar_y, x0 + 4 + filled, bar_y + 6 * scale, Rgb{80, 200, 120});
  }
  return out;
}

RgbImage reliability_diagram(const std::vector<double>& conf, const std::vector<double>& acc, int bins, int size) {
  if (conf.size() != acc.size()) throw InvalidArgument("reliability_diagram: length mismatch");
  if (bins < 1 || size < 64) throw InvalidArgument("reliability_diagram: bad geometry");
  const Rgb white{255, 255, 255}, axis{40, 40, 40};
  RgbImage out(size, size, white);
  const int m = 28;  // margin
  const int plot = size - 2 * m;
  std::vector<double> sum(bins, 0.0);
  std::vector<int> count(bins, 0);
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const int b = std::min(bins - 1, static_cast<int>(std::clamp(conf[i], 0.0, 1.0) * bins));
    sum[b] += acc[i];
    ++count[b];
  }
  for (int b = 0; b < bins; ++b) {
    const int x0 = m + b * plot / bins, x1 = m + (b + 1) * plot / bins;
    const double mid = (b + 0.5) / bins;
    const int gap_top = m + plot - static_cast<int>(std::lround(mid * plot));
    if (count[b] == 0) continue;
    const double mean = sum[b] / count[b];
    const int top = m + plot - static_cast<int>(std::lround(mean * plot));
    fill_rect(out, x0 + 1, top, x1 - 1, m + plot, Rgb{70, 110, 200});
    fill_rect(out, x0 + 1, std::min(top, gap_top), x1 - 1, std::max(top, gap_top), Rgb{230, 120, 120});
  }
  draw_line(out, m, m + plot, m + plot, m, Rgb{120, 120, 120});
  draw_line(out, m, m, m, m + plot, axis);
  draw_line(out, m, m + plot, m + plot, m + plot, axis);
  draw_text(out, m, size - m + 8, "CONFIDENCE", axis, 1);
  draw_text(out, m, 8, "ACCURACY (DICE)", axis, 1);
  draw_text(out, m - 8, m + plot + 2, "0", axis, 1);
  draw_text(out, m + plot - 3, m + plot + 2, "1", axis, 1);
  return out;
}

}  // namespace medctx::eval
