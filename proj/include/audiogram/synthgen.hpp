#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "audiogram/detection.hpp"
#include "audiogram/draw.hpp"
#include "audiogram/errors.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/grid.hpp"
#include "audiogram/image.hpp"
#include "audiogram/png_io.hpp"
#include "audiogram/random.hpp"
#include "audiogram/serialize.hpp"
#include "audiogram/warp.hpp"

namespace audiogram::synth {

// Geometry and glyph settings of the synthetic chart. Gridlines are one
// pixel wide at integer coordinates, so marks drawn at grid intersections
// have exact centroids.
struct RenderStyle {
  int width = 640;
  int height = 520;
  int chart_left = 90;
  int chart_top = 70;
  int octave_spacing = 64;  // px between frequency gridlines
  int tick_spacing = 28;    // px between 10 dB gridlines; must be even
  int grid_line_width = 1;
  int mark_size = 15;       // odd
  int mark_stroke = 2;
  int font_scale = 2;
  int char_spacing = 2;
  int polyline_width = 1;
  int freq_label_gap = 10;  // label ink bottom to top gridline
  int hl_label_gap = 18;    // widest label ink right edge to left gridline
  int gram_padding = 8;
  bool mark_knockout = true;  // marks drawn on an opaque paper square
  Ear circle_ear = Ear::right;  // circle for this ear, cross for the other
};

inline Json to_json(const RenderStyle& s) {
  return {{"width", s.width},
          {"height", s.height},
          {"chart_left", s.chart_left},
          {"chart_top", s.chart_top},
          {"octave_spacing", s.octave_spacing},
          {"tick_spacing", s.tick_spacing},
          {"grid_line_width", s.grid_line_width},
          {"mark_size", s.mark_size},
          {"mark_stroke", s.mark_stroke},
          {"font_scale", s.font_scale},
          {"char_spacing", s.char_spacing},
          {"polyline_width", s.polyline_width},
          {"freq_label_gap", s.freq_label_gap},
          {"hl_label_gap", s.hl_label_gap},
          {"gram_padding", s.gram_padding},
          {"mark_knockout", s.mark_knockout},
          {"circle_ear", std::string(to_string(s.circle_ear))}};
}

inline RenderStyle style_from_json(const Json& j) {
  RenderStyle s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  try {
    get("width", s.width);
    get("height", s.height);
    get("chart_left", s.chart_left);
    get("chart_top", s.chart_top);
    get("octave_spacing", s.octave_spacing);
    get("tick_spacing", s.tick_spacing);
    get("grid_line_width", s.grid_line_width);
    get("mark_size", s.mark_size);
    get("mark_stroke", s.mark_stroke);
    get("font_scale", s.font_scale);
    get("char_spacing", s.char_spacing);
    get("polyline_width", s.polyline_width);
    get("freq_label_gap", s.freq_label_gap);
    get("hl_label_gap", s.hl_label_gap);
    get("gram_padding", s.gram_padding);
    get("mark_knockout", s.mark_knockout);
    if (j.contains("circle_ear")) s.circle_ear = ear_from_string(j["circle_ear"].get<std::string>());
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("render style: ") + e.what());
  }
  return s;
}

// Pixel positions derived from a style and grid.
class ChartLayout {
 public:
  ChartLayout(const RenderStyle& style, const GridSpec& grid) : style_(style), grid_(grid) {}

  int x_of(int frequency) const {
    return style_.chart_left +
           int(std::lround(std::log2(double(frequency) / grid_.frequencies.front()))) *
               style_.octave_spacing;
  }
  int y_of(int hl) const {
    return style_.chart_top + (hl - grid_.hl_ticks.front()) * style_.tick_spacing / 10;
  }
  int left() const { return x_of(grid_.frequencies.front()); }
  int right() const { return x_of(grid_.frequencies.back()); }
  int top() const { return y_of(grid_.hl_ticks.front()); }
  int bottom() const { return y_of(grid_.hl_ticks.back()); }

  // Corners in ascending atan2 order about the centroid: TL, TR, BR, BL.
  std::vector<Point> chart_polygon() const {
    return {{double(left()), double(top())},
            {double(right()), double(top())},
            {double(right()), double(bottom())},
            {double(left()), double(bottom())}};
  }
  Box chart_box() const { return {double(left()), double(top()), double(right()), double(bottom())}; }

  // Ink center of a frequency tick label.
  Point freq_label_center(int frequency) const {
    const auto m = draw::measure_text(std::to_string(frequency), style_.font_scale, style_.char_spacing);
    const double h = m.ink.height();
    return {double(x_of(frequency)), top() - style_.freq_label_gap - (h - 1) / 2.0 - 0.5};
  }

  // HL labels are centered on one column so their centroids are collinear.
  double hl_label_column() const {
    int widest = 0;
    for (int hl : grid_.hl_ticks)
      widest = std::max(widest, draw::measure_text(std::to_string(hl), style_.font_scale,
                                                   style_.char_spacing)
                                    .ink.width());
    return left() - style_.hl_label_gap - widest / 2.0;
  }
  Point hl_label_center(int hl) const { return {hl_label_column(), double(y_of(hl))}; }

  const RenderStyle& style() const { return style_; }
  const GridSpec& grid() const { return grid_; }

 private:
  RenderStyle style_;
  GridSpec grid_;
};

// Ink pattern of a mark glyph: (2r+1) square, 255 = paper, 0 = ink.
inline GrayImage mark_glyph(const RenderStyle& style, Ear ear) {
  const int r = style.mark_size / 2;
  const int n = 2 * r + 1;
  GrayImage g(n, n, 255);
  const double half_stroke = style.mark_stroke / 2.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      bool ink;
      if (ear == style.circle_ear) {
        const double d = std::hypot(double(dx), double(dy));
        ink = d <= r + 0.5 && d >= r + 0.5 - 2 * half_stroke;
      } else {
        ink = std::abs(dx - dy) < style.mark_stroke || std::abs(dx + dy) < style.mark_stroke;
      }
      if (ink) g(dx + r, dy + r) = 0;
    }
  }
  return g;
}

inline void validate_layout(const ChartLayout& layout) {
  const auto& s = layout.style();
  if (s.mark_size % 2 == 0 || s.mark_size < 3) throw LayoutError("mark size must be odd and >= 3");
  if (s.tick_spacing % 2 != 0) throw LayoutError("tick spacing must be even");
  if (s.mark_size >= std::min(s.octave_spacing, s.tick_spacing))
    throw LayoutError("mark size must be smaller than a grid cell");
  if (layout.left() < 0 || layout.top() < 0 || layout.right() >= s.width ||
      layout.bottom() >= s.height)
    throw LayoutError("chart region does not fit inside the image");
  const auto& grid = layout.grid();
  for (int f : grid.frequencies) {
    const auto m = draw::measure_text(std::to_string(f), s.font_scale, s.char_spacing);
    const Point c = layout.freq_label_center(f);
    if (c.y - m.ink.height() / 2.0 < 0 || c.x - m.ink.width() / 2.0 < 0 ||
        c.x + m.ink.width() / 2.0 >= s.width)
      throw LayoutError("frequency labels do not fit inside the image");
  }
  for (int hl : grid.hl_ticks) {
    const auto m = draw::measure_text(std::to_string(hl), s.font_scale, s.char_spacing);
    if (layout.hl_label_column() - m.ink.width() / 2.0 < 0)
      throw LayoutError("hearing-level labels do not fit inside the image");
  }
}

struct RenderResult {
  GrayImage image;
  AnnotationBundle annotation;
};

// Renders the chart with exact ground truth. The seed is accepted for API
// symmetry; rendering itself is fully determined by (g, style).
inline RenderResult render_audiogram(const DigitalAudiogram& g, const RenderStyle& style,
                                     std::uint64_t /*seed*/ = 0,
                                     const GridSpec& grid = GridSpec::standard()) {
  const ChartLayout layout(style, grid);
  validate_layout(layout);
  GrayImage img(style.width, style.height, 255);
  AnnotationBundle ann;
  ann.level1 = g;

  const int lw = style.grid_line_width;
  const int lo = -(lw - 1) / 2, hi = lw / 2;
  for (int f : grid.frequencies) {
    const int x = layout.x_of(f);
    draw::fill_rect(img, {x + lo, layout.top(), x + hi, layout.bottom()}, 0);
  }
  for (int hl : grid.hl_ticks) {
    const int y = layout.y_of(hl);
    draw::fill_rect(img, {layout.left(), y + lo, layout.right(), y + hi}, 0);
  }

  auto add_label = [&](const std::string& text, Point center, MarkClass cls) {
    const auto [ox, oy] = draw::text_origin_for_center(text, center.x, center.y, style.font_scale,
                                                       style.char_spacing);
    draw::text(img, text, ox, oy, style.font_scale, style.char_spacing, 0);
    const auto m = draw::measure_text(text, style.font_scale, style.char_spacing);
    const draw::PixelRect ink{ox + m.ink.x0, oy + m.ink.y0, ox + m.ink.x1, oy + m.ink.y1};
    ann.level4.push_back({cls, ink.box(), 1.0});
  };
  for (int hl : grid.hl_ticks)
    add_label(std::to_string(hl), layout.hl_label_center(hl), MarkClass::hl_tick(hl));
  for (int f : grid.frequencies)
    add_label(std::to_string(f), layout.freq_label_center(f), MarkClass::freq_tick(f));

  // Polyline per ear, then marks on top.
  const auto marks = g.marks();
  for (Ear ear : {Ear::left, Ear::right}) {
    std::optional<Point> prev;
    for (const auto& m : marks) {
      if (m.ear != ear) continue;
      const Point p{double(layout.x_of(m.frequency)), double(layout.y_of(m.hl))};
      if (prev) {
        for (int o = 0; o < style.polyline_width; ++o)
          draw::line(img, *prev + Point{0, double(o)}, p + Point{0, double(o)}, 0);
      }
      prev = p;
    }
  }
  const int r = style.mark_size / 2;
  for (const auto& m : marks) {
    const int cx = layout.x_of(m.frequency), cy = layout.y_of(m.hl);
    const GrayImage glyph = mark_glyph(style, m.ear);
    if (style.mark_knockout) draw::fill_rect(img, {cx - r, cy - r, cx + r, cy + r}, 255);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (glyph(dx + r, dy + r) == 0) draw::put(img, cx + dx, cy + dy, 0);
    ann.level4.push_back({MarkClass::mark(m.ear), draw::PixelRect{cx - r, cy - r, cx + r, cy + r}.box(), 1.0});
  }

  ann.level3 = layout.chart_polygon();
  std::vector<Point> pts(ann.level3);
  for (const auto& d : ann.level4) {
    pts.push_back({d.bbox.x_min, d.bbox.y_min});
    pts.push_back({d.bbox.x_max, d.bbox.y_max});
  }
  const Box hull = Box::hull(pts);
  const double pad = style.gram_padding;
  ann.level2 = {std::max(-0.5, hull.x_min - pad), std::max(-0.5, hull.y_min - pad),
                std::min(style.width - 0.5, hull.x_max + pad),
                std::min(style.height - 0.5, hull.y_max + pad)};
  ann.true_homography = Homography::identity();
  return {std::move(img), std::move(ann)};
}

struct OcclusionSpec {
  int count = 0;
  double min_fraction = 0.05;  // of min(width, height)
  double max_fraction = 0.15;
};

struct DistortionParams {
  double camera_angle_deg = 0.0;       // [0, 45]
  std::optional<double> tilt_axis_deg;  // in-plane rotation axis; random when unset
  double inplane_rotation_deg = 0.0;
  double lighting_magnitude = 0.0;     // fractional darkening at the far end of the ramp
  double lighting_direction_deg = 0.0;
  double noise_sigma = 0.0;
  OcclusionSpec occlusion;
  bool shadow_line = false;
  double frame_margin = 0.04;
  std::uint64_t seed = 0;
};

inline Json to_json(const DistortionParams& p) {
  Json j{{"camera_angle_deg", p.camera_angle_deg},
         {"inplane_rotation_deg", p.inplane_rotation_deg},
         {"lighting_magnitude", p.lighting_magnitude},
         {"lighting_direction_deg", p.lighting_direction_deg},
         {"noise_sigma", p.noise_sigma},
         {"occlusion_count", p.occlusion.count},
         {"occlusion_min_fraction", p.occlusion.min_fraction},
         {"occlusion_max_fraction", p.occlusion.max_fraction},
         {"shadow_line", p.shadow_line},
         {"frame_margin", p.frame_margin},
         {"seed", p.seed}};
  if (p.tilt_axis_deg) j["tilt_axis_deg"] = *p.tilt_axis_deg;
  return j;
}

inline void validate(const DistortionParams& p) {
  if (!(p.camera_angle_deg >= 0.0 && p.camera_angle_deg <= 45.0))
    throw ParameterError("camera angle must lie in [0, 45] degrees");
  if (p.noise_sigma < 0 || p.lighting_magnitude < 0 || p.lighting_magnitude >= 1 ||
      p.occlusion.count < 0 || p.frame_margin < 0 || p.frame_margin >= 0.5)
    throw ParameterError("invalid distortion parameters");
}

namespace detail {

// Pinhole view of the chart plane after rotating it by angle about an
// in-plane axis through the image center, followed by an in-plane rotation.
inline Eigen::Matrix3d perspective_matrix(double width, double height, double angle_deg,
                                          double axis_deg, double rotation_deg) {
  const double f = std::max(width, height);
  const double cx = width / 2.0, cy = height / 2.0;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double phi = axis_deg * std::numbers::pi / 180.0;
  const Eigen::Matrix3d r =
      Eigen::AngleAxisd(theta, Eigen::Vector3d(std::cos(phi), std::sin(phi), 0.0)).toRotationMatrix();
  Eigen::Matrix3d plane;
  plane.col(0) = r.col(0);
  plane.col(1) = r.col(1);
  plane.col(2) = Eigen::Vector3d(0, 0, f);
  Eigen::Matrix3d k;
  k << f, 0, cx, 0, f, cy, 0, 0, 1;
  Eigen::Matrix3d center;
  center << 1, 0, -cx, 0, 1, -cy, 0, 0, 1;
  const double psi = rotation_deg * std::numbers::pi / 180.0;
  Eigen::Matrix3d rot;
  rot << std::cos(psi), -std::sin(psi), cx - cx * std::cos(psi) + cy * std::sin(psi),
      std::sin(psi), std::cos(psi), cy - cx * std::sin(psi) - cy * std::cos(psi), 0, 0, 1;
  return rot * k * plane * center;
}

}  // namespace detail

// Builds the ground-truth distortion homography for a chart whose gram
// region is `gram` in an image of the given size. The result keeps the
// mapped gram region inside the frame (minus margin), shrinking when needed.
inline Homography synthesize_homography(const DistortionParams& params, int width, int height,
                                        const Box& gram, double axis_deg) {
  const Eigen::Matrix3d base = detail::perspective_matrix(
      width, height, params.camera_angle_deg, axis_deg, params.inplane_rotation_deg);
  const double mx = params.frame_margin * width, my = params.frame_margin * height;
  const Box frame{mx, my, width - 1 - mx, height - 1 - my};
  const auto corners = gram.corners();

  double extra_scale = 1.0;
  for (int attempt = 0; attempt < 5; ++attempt, extra_scale *= 0.9) {
    std::array<Point, 4> mapped;
    bool behind = false;
    for (std::size_t i = 0; i < 4; ++i) {
      const Eigen::Vector3d q = base * corners[i].homogeneous();
      if (!(q.z() > 0)) behind = true;
      mapped[i] = {q.x() / q.z(), q.y() / q.z()};
    }
    if (behind) continue;
    const Box hull = Box::hull(mapped);
    Eigen::Matrix3d fit = Eigen::Matrix3d::Identity();
    if (!frame.contains(hull) || extra_scale < 1.0) {
      const double s = extra_scale * std::min({1.0, frame.width() / hull.width(),
                                               frame.height() / hull.height()});
      const Point c = hull.center();
      const Point t{width / 2.0 - 0.5 - s * c.x, height / 2.0 - 0.5 - s * c.y};
      fit << s, 0, t.x, 0, s, t.y, 0, 0, 1;
    }
    const Eigen::Matrix3d m = fit * base;
    bool inside = true;
    for (const auto& p : corners) {
      const Eigen::Vector3d q = m * p.homogeneous();
      if (!frame.contains(Point{q.x() / q.z(), q.y() / q.z()})) inside = false;
    }
    if (inside) return Homography(m / m(2, 2), Provenance::ground_truth);
  }
  throw LayoutError("distortion pushes the chart out of frame after 5 attempts");
}

// Warp, then lighting, noise and occlusion. Only the warp changes geometry;
// every annotation is mapped through the same homography.
inline RenderResult distort(const GrayImage& image, const AnnotationBundle& ann,
                            const DistortionParams& params) {
  validate(params);
  Rng rng(params.seed);
  const double axis = params.tilt_axis_deg ? *params.tilt_axis_deg : rng.uniform(0.0, 180.0);
  const int w = image.width(), h = image.height();
  const Homography hmat = synthesize_homography(params, w, h, ann.level2, axis);
  const bool is_identity = hmat.matrix().isApprox(Eigen::Matrix3d::Identity(), 1e-15);

  RenderResult out;
  out.image = is_identity ? image : warp_image(image, hmat, w, h);
  auto& img = out.image;

  if (params.lighting_magnitude > 0) {
    const double a = params.lighting_direction_deg * std::numbers::pi / 180.0;
    const double ux = std::cos(a), uy = std::sin(a);
    double lo = 1e300, hi = -1e300;
    for (const Point& c : {Point{0, 0}, Point{double(w - 1), 0}, Point{0, double(h - 1)},
                           Point{double(w - 1), double(h - 1)}}) {
      lo = std::min(lo, c.x * ux + c.y * uy);
      hi = std::max(hi, c.x * ux + c.y * uy);
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double t = (x * ux + y * uy - lo) / (hi - lo);
        img(x, y) = clamp_u8(img(x, y) * (1.0 - params.lighting_magnitude * t));
      }
  }
  if (params.shadow_line) {
    const Point p{rng.uniform(0, w), rng.uniform(0, h)};
    const double a = rng.uniform(0, std::numbers::pi);
    const Line l = Line::from_point_direction(p, {std::cos(a), std::sin(a)});
    const double band = rng.uniform(4.0, 12.0), depth = rng.uniform(0.2, 0.45);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d = l.distance({double(x), double(y)});
        if (d < 3 * band) {
          const double shade = depth * std::exp(-d * d / (2 * band * band));
          img(x, y) = clamp_u8(img(x, y) * (1.0 - shade));
        }
      }
  }
  if (params.noise_sigma > 0) {
    for (auto& v : img.pixels()) v = clamp_u8(v + rng.normal(0.0, params.noise_sigma));
  }
  for (int i = 0; i < params.occlusion.count; ++i) {
    const double base = std::min(w, h);
    const int rw = int(base * rng.uniform(params.occlusion.min_fraction, params.occlusion.max_fraction));
    const int rh = int(base * rng.uniform(params.occlusion.min_fraction, params.occlusion.max_fraction));
    const int x0 = rng.uniform_int(0, std::max(0, w - rw)), y0 = rng.uniform_int(0, std::max(0, h - rh));
    const auto shade = std::uint8_t(rng.uniform_int(60, 200));
    draw::fill_rect(img, {x0, y0, x0 + rw - 1, y0 + rh - 1}, shade);
  }

  auto& a = out.annotation;
  a.level1 = ann.level1;
  a.level2 = apply_homography(hmat, ann.level2);
  for (const auto& p : ann.level3) a.level3.push_back(apply_homography(hmat, p));
  for (const auto& d : ann.level4) a.level4.push_back({d.cls, apply_homography(hmat, d.bbox), d.score});
  a.true_homography = hmat * ann.true_homography;
  return out;
}

// Replaces every vertex of a closed polygon with an arc of `arc_vertices`
// points of the given radius tangent to both adjacent edges, and densifies
// the straight runs every `spacing` px with uniform jitter of +-jitter px
// perpendicular to the edge. Mimics segmentation-mask polygons.
inline std::vector<Point> round_polygon_corners(const std::vector<Point>& poly, double radius,
                                                int arc_vertices = 5, double spacing = 0.0,
                                                double jitter = 0.0, std::uint64_t seed = 0) {
  const std::size_t n = poly.size();
  Rng rng(seed);
  std::vector<std::array<Point, 2>> tangents(n);
  std::vector<std::vector<Point>> arcs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point prev = poly[(i + n - 1) % n], cur = poly[i], next = poly[(i + 1) % n];
    const Point u = (prev - cur) * (1.0 / distance(prev, cur));
    const Point v = (next - cur) * (1.0 / distance(next, cur));
    const double half = std::acos(std::clamp(u.dot(v), -1.0, 1.0)) / 2.0;
    const double t = radius / std::tan(half);
    const Point a = cur + u * t, b = cur + v * t;
    const Point bis = (u + v) * (1.0 / (u + v).norm());
    const Point center = cur + bis * (radius / std::sin(half));
    double a0 = std::atan2(a.y - center.y, a.x - center.x);
    double a1 = std::atan2(b.y - center.y, b.x - center.x);
    double sweep = a1 - a0;
    while (sweep > std::numbers::pi) sweep -= 2 * std::numbers::pi;
    while (sweep < -std::numbers::pi) sweep += 2 * std::numbers::pi;
    for (int k = 0; k < arc_vertices; ++k) {
      const double ang = a0 + sweep * k / double(arc_vertices - 1);
      arcs[i].push_back(center + Point{std::cos(ang), std::sin(ang)} * radius);
    }
    tangents[i] = {a, b};
  }
  std::vector<Point> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.insert(out.end(), arcs[i].begin(), arcs[i].end());
    if (spacing > 0) {
      const Point from = tangents[i][1], to = tangents[(i + 1) % n][0];
      const double len = distance(from, to);
      const int steps = int(len / spacing);
      const Point dir = (to - from) * (1.0 / len);
      const Point normal{-dir.y, dir.x};
      for (int k = 1; k < steps; ++k)
        out.push_back(from + dir * (len * k / steps) + normal * rng.uniform(-jitter, jitter));
    }
  }
  return out;
}

// Sampling ranges for dataset generation.
struct DistortionRanges {
  double angle_min = 0.0;
  double angle_max = 45.0;
  double rotation_max = 8.0;
  double lighting_max = 0.35;
  double noise_max = 6.0;
  int occlusion_max = 0;
  double shadow_probability = 0.0;
};

inline DigitalAudiogram sample_audiogram(Rng& rng, const GridSpec& grid,
                                         double mark_probability = 0.9) {
  const Ear ear = rng.bernoulli(0.5) ? Ear::left : Ear::right;
  DigitalAudiogram g;
  for (int f : grid.frequencies) {
    if (!rng.bernoulli(mark_probability)) continue;
    const int hl = grid.hl_mark_values[std::size_t(rng.index(grid.hl_mark_values.size()))];
    g.add({f, hl, ear}, grid);
  }
  return g;
}

inline DistortionParams sample_distortion(Rng& rng, const DistortionRanges& r) {
  DistortionParams p;
  p.camera_angle_deg = rng.uniform(r.angle_min, r.angle_max);
  p.tilt_axis_deg = rng.uniform(0.0, 180.0);
  p.inplane_rotation_deg = rng.uniform(-r.rotation_max, r.rotation_max);
  p.lighting_magnitude = rng.uniform(0.0, r.lighting_max);
  p.lighting_direction_deg = rng.uniform(0.0, 360.0);
  p.noise_sigma = rng.uniform(0.0, r.noise_max);
  p.occlusion.count = r.occlusion_max > 0 ? rng.uniform_int(0, r.occlusion_max) : 0;
  p.shadow_line = rng.bernoulli(r.shadow_probability);
  p.seed = rng.next();
  return p;
}

struct SyntheticSample {
  GrayImage image;
  AnnotationBundle annotation;
  DistortionParams distortion;
};

// Fully determined by (master seed, index).
inline SyntheticSample make_sample(std::uint64_t master_seed, std::size_t index,
                                   const GridSpec& grid, const RenderStyle& style,
                                   const DistortionRanges& ranges) {
  Rng rng(derive_seed(master_seed, index));
  const DigitalAudiogram g = sample_audiogram(rng, grid);
  const DistortionParams params = sample_distortion(rng, ranges);
  auto clean = render_audiogram(g, style, 0, grid);
  auto distorted = distort(clean.image, clean.annotation, params);
  return {std::move(distorted.image), std::move(distorted.annotation), params};
}

struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path annotation;
};

struct Manifest {
  std::uint64_t seed = 0;
  RenderStyle style;
  std::vector<ManifestEntry> entries;
};

inline Manifest load_manifest(const std::filesystem::path& path) {
  const Json j = json_io::read_file(path);
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array())
    throw SchemaError("manifest: missing 'entries' array");
  Manifest m;
  const auto dir = path.parent_path();
  m.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("style")) m.style = style_from_json(j["style"]);
  for (const auto& e : j["entries"]) {
    if (!e.contains("image") || !e.contains("annotation"))
      throw SchemaError("manifest entry needs 'image' and 'annotation'");
    m.entries.push_back({dir / e["image"].get<std::string>(), dir / e["annotation"].get<std::string>()});
  }
  return m;
}

// Writes n image/annotation pairs plus manifest.json under out_dir.
inline std::filesystem::path generate_dataset(std::size_t n, const GridSpec& grid,
                                              const RenderStyle& style,
                                              const DistortionRanges& ranges, std::uint64_t seed,
                                              const std::filesystem::path& out_dir) {
  if (n < 1) throw ParameterError("dataset size must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory '" + out_dir.string() + "'");

  Json entries = Json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const auto sample = make_sample(seed, i, grid, style, ranges);
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%05zu", i);
    const std::string image_name = std::string(stem) + ".png";
    const std::string ann_name = std::string(stem) + ".json";
    write_png(out_dir / image_name, sample.image);
    save_annotation(out_dir / ann_name, sample.annotation);
    entries.push_back({{"image", image_name},
                       {"annotation", ann_name},
                       {"distortion", to_json(sample.distortion)}});
  }
  const Json manifest{{"seed", seed}, {"count", n}, {"style", to_json(style)}, {"entries", entries}};
  const auto path = out_dir / "manifest.json";
  json_io::write_file(path, manifest);
  return path;
}

}  // namespace audiogram::synth
