#pragma once

#include <array>
#include <string>
#include <string_view>

#include "audiogram/errors.hpp"

namespace audiogram::synth {

// Fixed 5x7 bitmap glyphs for the only characters tick labels use.
struct Glyph {
  std::array<std::string_view, 7> rows;
};

inline constexpr int glyph_width = 5;
inline constexpr int glyph_height = 7;

inline const Glyph& glyph(char c) {
  static const Glyph digits[10] = {
      {{".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
      {{"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
      {{".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
      {{"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
      {{"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
      {{"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
      {{"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
      {{"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
      {{".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
      {{".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
  };
  static const Glyph minus{{".....", ".....", ".....", "#####", ".....", ".....", "....."}};
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c == '-') return minus;
  throw ParameterError(std::string("no glyph for character '") + c + "'");
}

}  // namespace audiogram::synth
