#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>

#include "audiogram/font.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/image.hpp"

namespace audiogram::draw {

// Integer pixel rectangle, inclusive on both ends.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  bool empty() const { return x1 < x0 || y1 < y0; }
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  // Continuous box covering the pixels (pixel centers sit on integers).
  Box box() const { return {x0 - 0.5, y0 - 0.5, x1 + 0.5, y1 + 0.5}; }
};

inline void put(GrayImage& img, int x, int y, std::uint8_t v) {
  if (img.contains(x, y)) img(x, y) = v;
}

inline void fill_rect(GrayImage& img, const PixelRect& r, std::uint8_t v) {
  for (int y = std::max(0, r.y0); y <= std::min(img.height() - 1, r.y1); ++y)
    for (int x = std::max(0, r.x0); x <= std::min(img.width() - 1, r.x1); ++x) img(x, y) = v;
}

// Integer DDA line; both endpoints inclusive.
inline void line(GrayImage& img, int x0, int y0, int x1, int y1, std::uint8_t v) {
  const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  if (steps == 0) {
    put(img, x0, y0, v);
    return;
  }
  for (int i = 0; i <= steps; ++i) {
    // Exact rational interpolation, rounded half away from zero.
    const long nx = long(x0) * steps + long(x1 - x0) * i;
    const long ny = long(y0) * steps + long(y1 - y0) * i;
    auto round_div = [steps](long n) {
      return int(n >= 0 ? (n + steps / 2) / steps : -((-n + steps / 2) / steps));
    };
    put(img, round_div(nx), round_div(ny), v);
  }
}

inline void line(GrayImage& img, const Point& a, const Point& b, std::uint8_t v) {
  line(img, int(std::lround(a.x)), int(std::lround(a.y)), int(std::lround(b.x)),
       int(std::lround(b.y)), v);
}

inline void rect_outline(GrayImage& img, const PixelRect& r, std::uint8_t v) {
  line(img, r.x0, r.y0, r.x1, r.y0, v);
  line(img, r.x1, r.y0, r.x1, r.y1, v);
  line(img, r.x1, r.y1, r.x0, r.y1, v);
  line(img, r.x0, r.y1, r.x0, r.y0, v);
}

// Layout of a string in the bitmap font, relative to its top-left cell corner.
struct TextMetrics {
  int cell_width = 0;   // full advance box
  int cell_height = 0;
  PixelRect ink;        // tight ink bounds, relative to the cell origin
};

inline TextMetrics measure_text(std::string_view text, int scale, int spacing) {
  TextMetrics m;
  const int n = int(text.size());
  m.cell_width = n == 0 ? 0 : n * synth::glyph_width * scale + (n - 1) * spacing;
  m.cell_height = synth::glyph_height * scale;
  PixelRect ink{INT32_MAX, INT32_MAX, INT32_MIN, INT32_MIN};
  for (int i = 0; i < n; ++i) {
    const auto& g = synth::glyph(text[std::size_t(i)]);
    const int ox = i * (synth::glyph_width * scale + spacing);
    for (int r = 0; r < synth::glyph_height; ++r)
      for (int c = 0; c < synth::glyph_width; ++c)
        if (g.rows[std::size_t(r)][std::size_t(c)] == '#') {
          ink.x0 = std::min(ink.x0, ox + c * scale);
          ink.y0 = std::min(ink.y0, r * scale);
          ink.x1 = std::max(ink.x1, ox + c * scale + scale - 1);
          ink.y1 = std::max(ink.y1, r * scale + scale - 1);
        }
  }
  m.ink = ink.x0 == INT32_MAX ? PixelRect{} : ink;
  return m;
}

// Draws text with its cell's top-left pixel at (x, y).
inline void text(GrayImage& img, std::string_view s, int x, int y, int scale, int spacing,
                 std::uint8_t v) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& g = synth::glyph(s[i]);
    const int ox = x + int(i) * (synth::glyph_width * scale + spacing);
    for (int r = 0; r < synth::glyph_height; ++r)
      for (int c = 0; c < synth::glyph_width; ++c)
        if (g.rows[std::size_t(r)][std::size_t(c)] == '#')
          fill_rect(img, {ox + c * scale, y + r * scale, ox + c * scale + scale - 1,
                          y + r * scale + scale - 1},
                    v);
  }
}

// Top-left cell position that centers the text's ink on (cx, cy), rounded
// so the ink box center lands within half a pixel of the target.
inline std::pair<int, int> text_origin_for_center(std::string_view s, double cx, double cy,
                                                  int scale, int spacing) {
  const auto m = measure_text(s, scale, spacing);
  const double ink_cx = (m.ink.x0 + m.ink.x1) / 2.0;
  const double ink_cy = (m.ink.y0 + m.ink.y1) / 2.0;
  return {int(std::floor(cx - ink_cx + 0.5)), int(std::floor(cy - ink_cy + 0.5))};
}

}  // namespace audiogram::draw
