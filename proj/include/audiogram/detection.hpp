#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "audiogram/errors.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/grid.hpp"

namespace audiogram {

// One of the 24 detector classes: two mark classes, 14 HL tick labels and
// 8 frequency tick labels. Tick classes carry their numeric value.
class MarkClass {
 public:
  enum class Kind { mark_left, mark_right, hl_tick, freq_tick };

  static constexpr std::size_t count = 24;

  static MarkClass mark(Ear ear) {
    return MarkClass(ear == Ear::left ? Kind::mark_left : Kind::mark_right, 0);
  }
  static MarkClass hl_tick(int hl) {
    if (!GridSpec::standard().has_tick(hl))
      throw DomainError("no HL tick class for " + std::to_string(hl));
    return MarkClass(Kind::hl_tick, hl);
  }
  static MarkClass freq_tick(int hz) {
    if (!GridSpec::standard().has_frequency(hz))
      throw DomainError("no frequency tick class for " + std::to_string(hz));
    return MarkClass(Kind::freq_tick, hz);
  }

  // Canonical order: mark_left, mark_right, HL ticks ascending, frequency
  // ticks ascending.
  static const std::array<MarkClass, count>& all() {
    static const std::array<MarkClass, count> classes = [] {
      std::array<MarkClass, count> out{};
      std::size_t i = 0;
      out[i++] = mark(Ear::left);
      out[i++] = mark(Ear::right);
      for (int hl : GridSpec::standard().hl_ticks) out[i++] = MarkClass(Kind::hl_tick, hl);
      for (int f : GridSpec::standard().frequencies) out[i++] = MarkClass(Kind::freq_tick, f);
      return out;
    }();
    return classes;
  }

  static MarkClass from_index(std::size_t i) { return all().at(i); }

  static std::optional<MarkClass> from_name(std::string_view name) {
    for (const auto& c : all())
      if (c.name() == name) return c;
    return std::nullopt;
  }

  Kind kind() const { return kind_; }
  int value() const { return value_; }
  bool is_mark() const { return kind_ == Kind::mark_left || kind_ == Kind::mark_right; }
  bool is_hl_tick() const { return kind_ == Kind::hl_tick; }
  bool is_freq_tick() const { return kind_ == Kind::freq_tick; }
  Ear ear() const { return kind_ == Kind::mark_right ? Ear::right : Ear::left; }

  std::size_t index() const {
    const auto& a = all();
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] == *this) return i;
    return 0;
  }

  std::string name() const {
    switch (kind_) {
      case Kind::mark_left: return "mark_left";
      case Kind::mark_right: return "mark_right";
      case Kind::hl_tick: return "hl_tick_" + std::to_string(value_);
      case Kind::freq_tick: return "freq_tick_" + std::to_string(value_);
    }
    return {};
  }

  // Text printed for tick labels; empty for marks.
  std::string label_text() const { return is_mark() ? std::string{} : std::to_string(value_); }

  MarkClass() = default;
  auto operator<=>(const MarkClass&) const = default;

 private:
  MarkClass(Kind k, int v) : kind_(k), value_(v) {}
  Kind kind_ = Kind::mark_left;
  int value_ = 0;
};

struct Detection {
  MarkClass cls;
  Box bbox;
  double score = 1.0;

  bool operator==(const Detection&) const = default;
};

inline void validate(const Detection& d) {
  if (!d.bbox.valid()) throw SchemaError("detection bbox must satisfy x_min < x_max, y_min < y_max");
  if (!(d.score >= 0.0 && d.score <= 1.0)) throw SchemaError("detection score must be in [0, 1]");
}

// Ground truth for one image at the four annotation levels.
struct AnnotationBundle {
  DigitalAudiogram level1;      // marks
  Box level2;                   // gram region
  std::vector<Point> level3;    // chart-region polygon
  std::vector<Detection> level4;  // marks and tick labels
  Homography true_homography;   // undistorted -> this image
};

}  // namespace audiogram
