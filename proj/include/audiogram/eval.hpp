#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "audiogram/detection.hpp"
#include "audiogram/draw.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/grid.hpp"
#include "audiogram/image.hpp"
#include "audiogram/interpret.hpp"
#include "audiogram/serialize.hpp"

namespace audiogram::eval {

struct Matching {
  std::vector<std::pair<AudiogramMark, AudiogramMark>> pairs;  // (gt, pred)
  std::vector<AudiogramMark> unmatched_gt;
  std::vector<AudiogramMark> unmatched_pred;
};

// Pairs marks sharing (ear, frequency); each side has at most one per key.
inline Matching match_marks(const DigitalAudiogram& pred, const DigitalAudiogram& gt) {
  Matching m;
  for (const auto& g : gt.marks()) {
    if (const auto hl = pred.hl_at(g.ear, g.frequency))
      m.pairs.push_back({g, {g.frequency, *hl, g.ear}});
    else
      m.unmatched_gt.push_back(g);
  }
  for (const auto& p : pred.marks())
    if (!gt.hl_at(p.ear, p.frequency)) m.unmatched_pred.push_back(p);
  return m;
}

struct Counts {
  std::size_t gt = 0;
  std::size_t pred = 0;
  std::size_t exact = 0;      // same (ear, frequency, hl)
  std::size_t frequency = 0;  // same (ear, frequency)
  std::size_t within5 = 0;    // same key, |hl difference| <= 5

  Counts& operator+=(const Counts& o) {
    gt += o.gt;
    pred += o.pred;
    exact += o.exact;
    frequency += o.frequency;
    within5 += o.within5;
    return *this;
  }
};

inline Counts count(const Matching& m) {
  Counts c;
  c.gt = m.pairs.size() + m.unmatched_gt.size();
  c.pred = m.pairs.size() + m.unmatched_pred.size();
  c.frequency = m.pairs.size();
  for (const auto& [g, p] : m.pairs) {
    c.exact += g.hl == p.hl;
    c.within5 += std::abs(g.hl - p.hl) <= 5;
  }
  return c;
}

struct Rates {
  std::optional<double> recall;     // absent when there is no ground truth
  std::optional<double> precision;  // absent when nothing was predicted
};

inline Rates rates(std::size_t correct, const Counts& c) {
  Rates r;
  if (c.gt > 0) r.recall = double(correct) / double(c.gt);
  if (c.pred > 0) r.precision = double(correct) / double(c.pred);
  return r;
}

struct ImageReport {
  std::string id;
  Counts counts;
  std::optional<std::string> error;
  std::vector<std::string> warnings;
};

struct EvalReport {
  Counts totals;
  Rates exact;       // "label total accuracy": recall and precision
  Rates frequency;
  Rates hl;          // exact-tuple rates
  Rates within5;
  Rates macro_exact;  // mean over images with a defined rate
  std::vector<ImageReport> images;
  Json config = Json::object();
  std::size_t failures = 0;
};

inline EvalReport compute_metrics(std::vector<ImageReport> images, Json config = Json::object()) {
  EvalReport r;
  r.images = std::move(images);
  r.config = std::move(config);
  double macro_r = 0, macro_p = 0;
  int nr = 0, np = 0;
  for (const auto& im : r.images) {
    r.totals += im.counts;
    r.failures += im.error.has_value();
    const Rates e = rates(im.counts.exact, im.counts);
    if (e.recall) {
      macro_r += *e.recall;
      ++nr;
    }
    if (e.precision) {
      macro_p += *e.precision;
      ++np;
    }
  }
  r.exact = rates(r.totals.exact, r.totals);
  r.frequency = rates(r.totals.frequency, r.totals);
  r.hl = rates(r.totals.exact, r.totals);
  r.within5 = rates(r.totals.within5, r.totals);
  if (nr) r.macro_exact.recall = macro_r / nr;
  if (np) r.macro_exact.precision = macro_p / np;
  return r;
}

inline EvalReport compute_metrics(const std::vector<std::pair<DigitalAudiogram, DigitalAudiogram>>& pred_gt) {
  std::vector<ImageReport> images;
  for (std::size_t i = 0; i < pred_gt.size(); ++i)
    images.push_back({std::to_string(i), count(match_marks(pred_gt[i].first, pred_gt[i].second)), {}, {}});
  return compute_metrics(std::move(images));
}

inline Json to_json(const Rates& r) {
  Json j = Json::object();
  j["recall"] = r.recall ? Json(*r.recall) : Json(nullptr);
  j["precision"] = r.precision ? Json(*r.precision) : Json(nullptr);
  return j;
}

inline Json to_json(const Counts& c) {
  return {{"gt_marks", c.gt},
          {"pred_marks", c.pred},
          {"exact", c.exact},
          {"frequency", c.frequency},
          {"within_5db", c.within5}};
}

inline Json to_json(const EvalReport& r) {
  Json images = Json::array();
  for (const auto& im : r.images) {
    Json j{{"id", im.id}, {"counts", to_json(im.counts)},
           {"exact", to_json(rates(im.counts.exact, im.counts))}};
    if (im.error) j["error"] = *im.error;
    if (!im.warnings.empty()) j["warnings"] = im.warnings;
    images.push_back(j);
  }
  return {{"averaging", "micro (pooled over all marks); macro exact rates included"},
          {"images_evaluated", r.images.size()},
          {"failures", r.failures},
          {"counts", to_json(r.totals)},
          {"label_total_accuracy", to_json(r.exact)},
          {"frequency_accuracy", to_json(r.frequency)},
          {"hl_accuracy", to_json(r.hl)},
          {"label_total_accuracy_pm5", to_json(r.within5)},
          {"macro_label_total_accuracy", to_json(r.macro_exact)},
          {"per_image", images},
          {"config", r.config}};
}

// ---- Overlay ----

inline draw::PixelRect pixel_rect(const Box& b) {
  return {int(std::lround(b.x_min + 0.5)), int(std::lround(b.y_min + 0.5)),
          int(std::lround(b.x_max - 0.5)), int(std::lround(b.y_max - 0.5))};
}

inline void draw_full_line(GrayImage& img, const Line& l, std::uint8_t v) {
  // Span of the line over the image, from projections of the corners.
  const Point p0 = l.project({0, 0});
  const Point d = l.direction();
  double lo = 1e300, hi = -1e300;
  for (const Point& c : {Point{0, 0}, Point{double(img.width() - 1), 0},
                         Point{0, double(img.height() - 1)},
                         Point{double(img.width() - 1), double(img.height() - 1)}}) {
    const double t = (c - p0).dot(d);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  draw::line(img, p0 + d * lo, p0 + d * hi, v);
}

struct OverlayStyle {
  std::uint8_t box_value = 0;
  std::uint8_t axis_value = 96;
  std::uint8_t text_value = 0;
  int origin_half = 3;
  int text_scale = 1;
};

// Boxes, both fitted axes, the origin and each kept mark's snapped values
// (frequency above the box, HL below).
inline GrayImage render_overlay(const GrayImage& img, const std::vector<Detection>& detections,
                                const interpret::OverlayGeometry& geom, const OverlayStyle& s = {}) {
  GrayImage out = img;
  if (geom.freq_axis) draw_full_line(out, *geom.freq_axis, s.axis_value);
  if (geom.hl_axis) draw_full_line(out, *geom.hl_axis, s.axis_value);
  for (const auto& d : detections) draw::rect_outline(out, pixel_rect(d.bbox), s.box_value);
  if (geom.origin) {
    const int ox = int(std::lround(geom.origin->x)), oy = int(std::lround(geom.origin->y));
    draw::fill_rect(out, {ox - s.origin_half, oy - s.origin_half, ox + s.origin_half, oy + s.origin_half},
                    s.box_value);
  }
  for (const auto& m : geom.marks) {
    const std::string f = std::to_string(m.mark.frequency), h = std::to_string(m.mark.hl);
    const auto mf = draw::measure_text(f, s.text_scale, 1);
    const auto mh = draw::measure_text(h, s.text_scale, 1);
    const int cx = int(std::lround(m.center.x)), cy = int(std::lround(m.center.y));
    draw::text(out, f, cx - mf.cell_width / 2, cy - 10 - mf.cell_height, s.text_scale, 1, s.text_value);
    draw::text(out, h, cx - mh.cell_width / 2, cy + 11, s.text_scale, 1, s.text_value);
  }
  return out;
}

inline interpret::OverlayGeometry overlay_geometry(const interpret::Interpretation& r) {
  interpret::OverlayGeometry g;
  g.freq_axis = r.diagnostics.freq_axis.line;
  g.hl_axis = r.diagnostics.hl_axis.line;
  g.origin = r.diagnostics.frame.origin;
  for (const auto& m : r.diagnostics.marks)
    if (m.status == interpret::MarkStatus::kept) g.marks.push_back({m.center, m.snapped});
  return g;
}

}  // namespace audiogram::eval
