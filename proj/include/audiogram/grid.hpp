#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "audiogram/errors.hpp"

namespace audiogram {

// The finite sample space of an audiogram. Frequencies are octave-spaced,
// tick labels sit every 10 dB and marks may take any 5 dB step.
struct GridSpec {
  std::vector<int> frequencies{125, 250, 500, 1000, 2000, 4000, 8000, 16000};
  std::vector<int> hl_ticks{-10, 0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120};
  std::vector<int> hl_mark_values = [] {
    std::vector<int> v;
    for (int hl = -10; hl <= 120; hl += 5) v.push_back(hl);
    return v;
  }();

  static const GridSpec& standard() {
    static const GridSpec grid{};
    return grid;
  }

  bool has_frequency(int f) const {
    return std::binary_search(frequencies.begin(), frequencies.end(), f);
  }
  bool has_mark_value(int hl) const {
    return std::binary_search(hl_mark_values.begin(), hl_mark_values.end(), hl);
  }
  bool has_tick(int hl) const {
    return std::binary_search(hl_ticks.begin(), hl_ticks.end(), hl);
  }
};

enum class Ear { left, right };

inline std::string_view to_string(Ear ear) { return ear == Ear::left ? "left" : "right"; }

inline Ear ear_from_string(std::string_view s) {
  if (s == "left") return Ear::left;
  if (s == "right") return Ear::right;
  throw SchemaError("unknown ear '" + std::string(s) + "'");
}

struct AudiogramMark {
  int frequency = 0;
  int hl = 0;
  Ear ear = Ear::left;

  auto operator<=>(const AudiogramMark&) const = default;
};

// Set of marks with at most one mark per (frequency, ear).
class DigitalAudiogram {
 public:
  DigitalAudiogram() = default;

  // Throws DomainError for off-grid values or a second mark on the same
  // (frequency, ear) key.
  void add(const AudiogramMark& mark, const GridSpec& grid = GridSpec::standard()) {
    if (!grid.has_frequency(mark.frequency) || !grid.has_mark_value(mark.hl)) {
      throw DomainError("mark (" + std::to_string(mark.frequency) + " Hz, " +
                        std::to_string(mark.hl) + " dB HL) is not on the audiogram grid");
    }
    auto [it, inserted] = marks_.emplace(Key{mark.ear, mark.frequency}, mark.hl);
    if (!inserted) {
      throw DomainError("duplicate mark at " + std::to_string(mark.frequency) + " Hz (" +
                        std::string(to_string(mark.ear)) + " ear)");
    }
  }

  bool contains(Ear ear, int frequency) const { return marks_.count({ear, frequency}) != 0; }

  std::optional<int> hl_at(Ear ear, int frequency) const {
    auto it = marks_.find({ear, frequency});
    if (it == marks_.end()) return std::nullopt;
    return it->second;
  }

  // Sorted by (ear, frequency).
  std::vector<AudiogramMark> marks() const {
    std::vector<AudiogramMark> out;
    out.reserve(marks_.size());
    for (const auto& [key, hl] : marks_) out.push_back({key.second, hl, key.first});
    return out;
  }

  std::size_t size() const { return marks_.size(); }
  bool empty() const { return marks_.empty(); }

  bool operator==(const DigitalAudiogram&) const = default;

 private:
  using Key = std::pair<Ear, int>;
  std::map<Key, int> marks_;
};

struct GridValue {
  int frequency = 0;
  int hl = 0;
  auto operator<=>(const GridValue&) const = default;
};

namespace detail {

// Nearest candidate to target with ties going to the smaller candidate.
// Candidates must be sorted ascending.
template <typename Metric>
int nearest(const std::vector<int>& candidates, Metric&& distance) {
  int best = candidates.front();
  double best_d = distance(best);
  for (int c : candidates) {
    const double d = distance(c);
    if (d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

}  // namespace detail

// Nearest grid point per axis: log2 distance for frequency, linear for HL.
inline GridValue snap_to_grid(double frequency_hz, double hl,
                              const GridSpec& grid = GridSpec::standard()) {
  if (!std::isfinite(frequency_hz) || !std::isfinite(hl)) {
    throw DomainError("snap_to_grid: non-finite input");
  }
  if (frequency_hz <= 0.0) throw DomainError("snap_to_grid: frequency must be positive");
  const double lf = std::log2(frequency_hz);
  const int f = detail::nearest(grid.frequencies,
                                [lf](int c) { return std::abs(lf - std::log2(double(c))); });
  const int h = detail::nearest(grid.hl_mark_values, [hl](int c) { return std::abs(hl - c); });
  return {f, h};
}

}  // namespace audiogram
