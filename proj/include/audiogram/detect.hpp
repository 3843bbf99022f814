#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "audiogram/detection.hpp"
#include "audiogram/draw.hpp"
#include "audiogram/errors.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/grid.hpp"
#include "audiogram/image.hpp"
#include "audiogram/imgproc.hpp"
#include "audiogram/random.hpp"
#include "audiogram/serialize.hpp"
#include "audiogram/synthgen.hpp"

namespace audiogram::detect {

struct GramCrop {
  GrayImage image;
  int offset_x = 0;
  int offset_y = 0;

  Box to_crop(const Box& b) const { return b.translated(-offset_x, -offset_y); }
  Box from_crop(const Box& b) const { return b.translated(offset_x, offset_y); }
  Point to_crop(const Point& p) const { return {p.x - offset_x, p.y - offset_y}; }
  Point from_crop(const Point& p) const { return {p.x + offset_x, p.y + offset_y}; }
  Homography to_crop_transform() const { return Homography::translation(-offset_x, -offset_y); }
};

// Keeps every pixel whose center lies inside bbox.
inline GramCrop crop_gram(const GrayImage& img, const Box& bbox) {
  constexpr double slack = 1e-6;
  if (!bbox.valid() || bbox.x_min < -0.5 - slack || bbox.y_min < -0.5 - slack ||
      bbox.x_max > img.width() - 0.5 + slack || bbox.y_max > img.height() - 0.5 + slack)
    throw ParameterError("gram bbox lies outside the image");
  const int x0 = std::max(0, int(std::ceil(bbox.x_min - slack)));
  const int y0 = std::max(0, int(std::ceil(bbox.y_min - slack)));
  const int x1 = std::min(img.width() - 1, int(std::floor(bbox.x_max + slack)));
  const int y1 = std::min(img.height() - 1, int(std::floor(bbox.y_max + slack)));
  if (x1 < x0 || y1 < y0) throw ParameterError("gram bbox contains no pixels");
  GramCrop c{GrayImage(x1 - x0 + 1, y1 - y0 + 1), x0, y0};
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) c.image(x - x0, y - y0) = img(x, y);
  return c;
}

inline std::vector<Detection> load_detections(const std::filesystem::path& path) {
  return json_io::detections(json_io::read_file(path));
}

using audiogram::save_detections;

struct DetectorNoise {
  double sigma = 0.0;    // centroid jitter, px
  double p_mis = 0.0;    // class resampled uniformly over all 24
  double p_fn = 0.0;
  double lambda_fp = 0.0;  // expected spurious boxes per image
  double fp_min_size = 8.0;
  double fp_max_size = 40.0;
  std::uint64_t seed = 0;
};

inline void validate(const DetectorNoise& n) {
  if (!(n.sigma >= 0) || !(n.p_mis >= 0 && n.p_mis <= 1) || !(n.p_fn >= 0 && n.p_fn <= 1) ||
      !(n.lambda_fp >= 0) || !(n.fp_min_size > 0) || n.fp_max_size < n.fp_min_size)
    throw ParameterError("invalid detector noise parameters");
}

inline Json to_json(const DetectorNoise& n) {
  return {{"sigma", n.sigma},         {"p_mis", n.p_mis},
          {"p_fn", n.p_fn},           {"lambda_fp", n.lambda_fp},
          {"fp_min_size", n.fp_min_size}, {"fp_max_size", n.fp_max_size},
          {"seed", n.seed}};
}

// Perturbs ground truth. Spurious boxes are placed uniformly in `region`,
// which defaults to the hull of the ground-truth boxes.
inline std::vector<Detection> simulate_detections(const std::vector<Detection>& gt,
                                                  const DetectorNoise& noise,
                                                  std::optional<Box> region = std::nullopt) {
  validate(noise);
  Rng rng(noise.seed);
  const auto& classes = MarkClass::all();
  std::vector<Detection> out;
  for (const auto& d : gt) {
    if (rng.bernoulli(noise.p_fn)) continue;
    Detection s = d;
    const double dx = noise.sigma * rng.normal(), dy = noise.sigma * rng.normal();
    s.bbox = d.bbox.translated(dx, dy);
    if (rng.bernoulli(noise.p_mis)) s.cls = classes[std::size_t(rng.index(classes.size()))];
    out.push_back(s);
  }
  if (noise.lambda_fp > 0) {
    Box area;
    if (region) {
      area = *region;
    } else if (!gt.empty()) {
      std::vector<Point> pts;
      for (const auto& d : gt) {
        pts.push_back({d.bbox.x_min, d.bbox.y_min});
        pts.push_back({d.bbox.x_max, d.bbox.y_max});
      }
      area = Box::hull(pts);
    } else {
      return out;
    }
    const int k = rng.poisson(noise.lambda_fp);
    for (int i = 0; i < k; ++i) {
      const MarkClass cls = classes[std::size_t(rng.index(classes.size()))];
      const double w = rng.uniform(noise.fp_min_size, noise.fp_max_size);
      const double h = rng.uniform(noise.fp_min_size, noise.fp_max_size);
      const double cx = rng.uniform(area.x_min, area.x_max), cy = rng.uniform(area.y_min, area.y_max);
      out.push_back({cls, {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2}, 1.0});
    }
  }
  return out;
}

// ---- Template matching ----

// A binary-ink template on a paper-colored canvas. The ink is stored as
// rectangles so window sums over it cost a few integral-image lookups.
struct Template {
  MarkClass cls;
  int width = 0, height = 0;
  draw::PixelRect ink_box;  // reported box, canvas coordinates
  std::vector<draw::PixelRect> ink_rects;
  int ink_pixels = 0;
};

namespace detail {

inline Template make_template(MarkClass cls, const GrayImage& canvas, draw::PixelRect ink_box) {
  Template t{cls, canvas.width(), canvas.height(), ink_box, {}, 0};
  // Horizontal runs, merged down when the next row repeats them.
  std::vector<draw::PixelRect> open;
  for (int y = 0; y < canvas.height(); ++y) {
    std::vector<draw::PixelRect> row;
    for (int x = 0; x < canvas.width();) {
      if (canvas(x, y) == 0) {
        int e = x;
        while (e + 1 < canvas.width() && canvas(e + 1, y) == 0) ++e;
        row.push_back({x, y, e, y});
        t.ink_pixels += e - x + 1;
        x = e + 1;
      } else {
        ++x;
      }
    }
    std::vector<draw::PixelRect> next;
    for (auto r : row) {
      auto it = std::find_if(open.begin(), open.end(), [&](const draw::PixelRect& o) {
        return o.x0 == r.x0 && o.x1 == r.x1 && o.y1 == y - 1;
      });
      if (it != open.end()) {
        r.y0 = it->y0;
        open.erase(it);
      }
      next.push_back(r);
    }
    t.ink_rects.insert(t.ink_rects.end(), open.begin(), open.end());
    open = std::move(next);
  }
  t.ink_rects.insert(t.ink_rects.end(), open.begin(), open.end());
  return t;
}

}  // namespace detail

struct TemplateParams {
  int label_pad_x = 12;  // one character advance, so a label never matches inside a longer one
  int label_pad_y = 3;
  double threshold = 0.8;
  double nms_iou = 0.3;
  double containment = 0.7;  // suppress a box mostly inside a stronger one
  double min_window_std = 8.0;
};

inline std::vector<Template> make_templates(const synth::RenderStyle& style,
                                            const GridSpec& grid = GridSpec::standard(),
                                            const TemplateParams& p = {}) {
  std::vector<Template> out;
  for (Ear ear : {Ear::left, Ear::right}) {
    const GrayImage g = synth::mark_glyph(style, ear);
    out.push_back(detail::make_template(MarkClass::mark(ear), g,
                                        {0, 0, g.width() - 1, g.height() - 1}));
  }
  auto label = [&](const std::string& text, MarkClass cls) {
    const auto m = draw::measure_text(text, style.font_scale, style.char_spacing);
    GrayImage canvas(m.ink.width() + 2 * p.label_pad_x, m.ink.height() + 2 * p.label_pad_y, 255);
    draw::text(canvas, text, p.label_pad_x - m.ink.x0, p.label_pad_y - m.ink.y0, style.font_scale,
               style.char_spacing, 0);
    out.push_back(detail::make_template(
        cls, canvas,
        {p.label_pad_x, p.label_pad_y, p.label_pad_x + m.ink.width() - 1,
         p.label_pad_y + m.ink.height() - 1}));
  };
  for (int hl : grid.hl_ticks) label(std::to_string(hl), MarkClass::hl_tick(hl));
  for (int f : grid.frequencies) label(std::to_string(f), MarkClass::freq_tick(f));
  return out;
}

namespace detail {

class Integral {
 public:
  explicit Integral(const GrayImage& img) : w_(img.width() + 1), sum_(std::size_t(w_) * (img.height() + 1), 0), sq_(sum_.size(), 0) {
    for (int y = 0; y < img.height(); ++y) {
      std::int64_t row = 0, row_sq = 0;
      for (int x = 0; x < img.width(); ++x) {
        const std::int64_t v = img(x, y);
        row += v;
        row_sq += v * v;
        sum_[idx(x + 1, y + 1)] = sum_[idx(x + 1, y)] + row;
        sq_[idx(x + 1, y + 1)] = sq_[idx(x + 1, y)] + row_sq;
      }
    }
  }
  // Sums over [x0, x1] x [y0, y1], inclusive.
  std::int64_t sum(int x0, int y0, int x1, int y1) const { return rect(sum_, x0, y0, x1, y1); }
  std::int64_t sum_sq(int x0, int y0, int x1, int y1) const { return rect(sq_, x0, y0, x1, y1); }

 private:
  std::size_t idx(int x, int y) const { return std::size_t(y) * w_ + x; }
  std::int64_t rect(const std::vector<std::int64_t>& t, int x0, int y0, int x1, int y1) const {
    return t[idx(x1 + 1, y1 + 1)] - t[idx(x0, y1 + 1)] - t[idx(x1 + 1, y0)] + t[idx(x0, y0)];
  }
  int w_;
  std::vector<std::int64_t> sum_, sq_;
};

}  // namespace detail

struct Peak {
  Detection detection;
  double area = 0;
};

// Normalized cross-correlation map of one template (top-left anchored).
// For a two-level template the correlation with a window only needs the
// window sum and the sum over the ink pixels.
inline std::vector<float> ncc_map(const detail::Integral& integ, int img_w, int img_h,
                                  const Template& t, double min_window_std) {
  const int ow = img_w - t.width + 1, oh = img_h - t.height + 1;
  std::vector<float> out;
  if (ow <= 0 || oh <= 0 || t.ink_pixels == 0) return out;
  out.assign(std::size_t(ow) * oh, 0.0f);
  const double n = double(t.width) * t.height;
  const double k = t.ink_pixels;
  // Template values: paper 1, ink 0 (scale-free). Zero-mean form:
  // paper (k/n), ink (k/n - 1).
  const double t_var = k * (1 - k / n);  // sum of squared deviations
  const double min_var = min_window_std * min_window_std * n;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double s = double(integ.sum(x, y, x + t.width - 1, y + t.height - 1));
      const double s2 = double(integ.sum_sq(x, y, x + t.width - 1, y + t.height - 1));
      const double w_var = s2 - s * s / n;
      if (w_var < min_var) continue;
      double ink = 0;
      for (const auto& r : t.ink_rects) ink += double(integ.sum(x + r.x0, y + r.y0, x + r.x1, y + r.y1));
      // sum(I * (T - mean T)) with T = 1 on paper: (s - ink) - s * (n - k) / n.
      const double num = (s - ink) - s * (n - k) / n;
      out[std::size_t(y) * ow + x] = float(num / std::sqrt(w_var * t_var));
    }
  }
  return out;
}

inline std::vector<Detection> non_max_suppression(std::vector<Peak> peaks, double iou_limit,
                                                  double containment) {
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.detection.score != b.detection.score) return a.detection.score > b.detection.score;
    return a.area > b.area;
  });
  std::vector<Detection> kept;
  for (const auto& p : peaks) {
    bool suppressed = false;
    for (const auto& k : kept) {
      const double inter = intersection_area(p.detection.bbox, k.bbox);
      if (iou(p.detection.bbox, k.bbox) > iou_limit ||
          inter > containment * std::min(p.detection.bbox.area(), k.bbox.area())) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(p.detection);
  }
  return kept;
}

// Correlates every template with the image, keeps local maxima above the
// threshold and suppresses overlaps across all classes.
inline std::vector<Detection> template_detect(const GrayImage& img,
                                              const std::vector<Template>& templates,
                                              const TemplateParams& p = {}) {
  std::vector<Peak> peaks;
  if (img.empty()) return {};
  const detail::Integral integ(img);
  for (const auto& t : templates) {
    const auto map = ncc_map(integ, img.width(), img.height(), t, p.min_window_std);
    if (map.empty()) continue;
    const int ow = img.width() - t.width + 1, oh = img.height() - t.height + 1;
    auto at = [&](int x, int y) { return map[std::size_t(y) * ow + x]; };
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const float v = at(x, y);
        if (v < p.threshold) continue;
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if ((dx || dy) && nx >= 0 && ny >= 0 && nx < ow && ny < oh) {
              const float u = at(nx, ny);
              // Plateaus resolve to their first (top-left) pixel.
              if (u > v || (u == v && (dy < 0 || (dy == 0 && dx < 0)))) {
                is_max = false;
                break;
              }
            }
          }
        if (!is_max) continue;
        const draw::PixelRect r{x + t.ink_box.x0, y + t.ink_box.y0, x + t.ink_box.x1, y + t.ink_box.y1};
        const Box b = r.box();
        peaks.push_back({{t.cls, b, std::min(1.0, double(v))}, b.area()});
      }
  }
  return non_max_suppression(std::move(peaks), p.nms_iou, p.containment);
}

inline std::vector<Detection> filter_by_score(const std::vector<Detection>& ds, double min_score) {
  std::vector<Detection> out;
  for (const auto& d : ds)
    if (d.score >= min_score) out.push_back(d);
  return out;
}

}  // namespace audiogram::detect
