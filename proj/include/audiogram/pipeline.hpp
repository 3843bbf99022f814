#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "audiogram/detect.hpp"
#include "audiogram/eval.hpp"
#include "audiogram/interpret.hpp"
#include "audiogram/png_io.hpp"
#include "audiogram/rectify.hpp"
#include "audiogram/serialize.hpp"
#include "audiogram/synthgen.hpp"

namespace audiogram::pipeline {

enum class RectifyMethod { none, lines, quad };
enum class DetectMethod { simulate, template_match };

inline RectifyMethod rectify_method_from_string(std::string_view s) {
  if (s == "none") return RectifyMethod::none;
  if (s == "lines") return RectifyMethod::lines;
  if (s == "quad") return RectifyMethod::quad;
  throw ParameterError("rectify method must be none, lines or quad");
}

inline DetectMethod detect_method_from_string(std::string_view s) {
  if (s == "simulate") return DetectMethod::simulate;
  if (s == "template") return DetectMethod::template_match;
  throw ParameterError("detect method must be template or simulate");
}

inline std::string_view to_string(RectifyMethod m) {
  return m == RectifyMethod::none ? "none" : (m == RectifyMethod::lines ? "lines" : "quad");
}
inline std::string_view to_string(DetectMethod m) {
  return m == DetectMethod::simulate ? "simulate" : "template";
}

// Rounding applied to ground-truth chart polygons to stand in for a
// segmentation mask.
struct PolygonRounding {
  double radius = 6.0;
  int arc_vertices = 5;
  double spacing = 2.0;
  double jitter = 0.3;
};

struct PipelineConfig {
  RectifyMethod rectify = RectifyMethod::lines;
  DetectMethod detect = DetectMethod::simulate;
  rectify::LineRectificationParams lines;
  rectify::QuadParams quad;
  PolygonRounding rounding;
  detect::DetectorNoise noise;
  detect::TemplateParams templates;
  interpret::InterpretConfig interpret;
  synth::RenderStyle style;
  bool fallback_to_identity = true;  // on rectification failure
  int canvas_margin = 16;
  std::uint64_t seed = 0;
};

inline Json to_json(const PipelineConfig& c) {
  return {{"rectify", std::string(to_string(c.rectify))},
          {"detect", std::string(to_string(c.detect))},
          {"vp_iterations", c.lines.iterations},
          {"noise", detect::to_json(c.noise)},
          {"template_threshold", c.templates.threshold},
          {"nms_iou", c.templates.nms_iou},
          {"interpret", interpret::to_json(c.interpret)},
          {"fallback_to_identity", c.fallback_to_identity},
          {"seed", c.seed}};
}

// Where the rectified frame lives: a homography from full-image pixels plus
// the raster size used when an image is actually warped.
struct RectifiedFrame {
  Homography to_frame;
  int width = 0;
  int height = 0;
  std::vector<std::string> warnings;
};

namespace detail {

// Translates so the mapped region starts at `margin`, sizing the canvas.
inline RectifiedFrame fit_canvas(const Homography& h, const Box& region, int margin, int max_dim) {
  std::array<Point, 4> cs = region.corners();
  for (auto& c : cs) c = apply_homography(h, c);
  const Box bb = Box::hull(cs);
  const int w = int(std::ceil(bb.width())) + 2 * margin, hgt = int(std::ceil(bb.height())) + 2 * margin;
  if (w > max_dim || hgt > max_dim) throw RectificationFailed("rectified image would be too large");
  const Homography t = Homography::translation(margin - bb.x_min, margin - bb.y_min);
  return {(t * h).with_provenance(h.provenance()), w, hgt, {}};
}

// Shifts a line-rectified frame by under half a pixel per axis so the
// detected gridlines sit on the integer lattice.
inline RectifiedFrame align_to_lattice(RectifiedFrame f, const rectify::LineRectification& lr,
                                       const Homography& full_to_crop) {
  const Point ph = rectify::lattice_phase(lr, f.to_frame * full_to_crop.inverse());
  f.to_frame = (Homography::translation(-ph.x, -ph.y) * f.to_frame).with_provenance(f.to_frame.provenance());
  return f;
}

}  // namespace detail

inline RectifiedFrame rectified_frame(const GrayImage& img, const AnnotationBundle& ann,
                                      const PipelineConfig& cfg, std::uint64_t seed) {
  const GridSpec& grid = GridSpec::standard();
  const synth::ChartLayout layout(cfg.style, grid);
  const int max_dim = 4 * std::max(img.width(), img.height());
  switch (cfg.rectify) {
    case RectifyMethod::none:
      return {Homography::identity(), img.width(), img.height(), {}};
    case RectifyMethod::lines: {
      const auto crop = detect::crop_gram(img, ann.level2);
      auto p = cfg.lines;
      p.seed = seed;
      p.hough.seed = derive_seed(seed, 3);
      const auto lr = rectify::estimate_rectification_detailed(crop.image, p);
      Homography h = lr.homography * crop.to_crop_transform();
      const bool raster = cfg.detect == DetectMethod::template_match;
      if (raster) h = rectify::grid_scale_fit(lr, cfg.style.octave_spacing, cfg.style.tick_spacing) * h;
      const Box crop_box{double(crop.offset_x), double(crop.offset_y),
                         double(crop.offset_x + crop.image.width() - 1),
                         double(crop.offset_y + crop.image.height() - 1)};
      auto f = detail::fit_canvas(h.with_provenance(Provenance::line_detection), crop_box,
                                  cfg.canvas_margin, max_dim);
      return raster ? detail::align_to_lattice(std::move(f), lr, crop.to_crop_transform()) : f;
    }
    case RectifyMethod::quad: {
      const auto poly = synth::round_polygon_corners(ann.level3, cfg.rounding.radius,
                                                     cfg.rounding.arc_vertices, cfg.rounding.spacing,
                                                     cfg.rounding.jitter, derive_seed(seed, 4));
      const auto quad = rectify::approx_quadrilateral(poly, cfg.quad);
      RectifiedFrame f{rectify::rectify_quad_to_box(quad, layout.chart_box()), cfg.style.width,
                       cfg.style.height, {}};
      if (!quad.convex) f.warnings.push_back("approximated quadrilateral is not convex");
      return f;
    }
  }
  return {Homography::identity(), img.width(), img.height(), {}};
}

struct ImageOutcome {
  DigitalAudiogram prediction;
  std::vector<Detection> detections;  // in the rectified frame
  std::optional<interpret::Interpretation> interpretation;
  RectifiedFrame frame;
  std::optional<std::string> error;
  std::vector<std::string> warnings;
};

inline std::vector<Detection> detections_in_frame(const GrayImage& img, const AnnotationBundle& ann,
                                                  const RectifiedFrame& frame, const PipelineConfig& cfg,
                                                  const std::vector<detect::Template>& templates,
                                                  std::uint64_t seed) {
  if (cfg.detect == DetectMethod::simulate) {
    std::vector<Detection> gt;
    for (const auto& d : ann.level4) gt.push_back({d.cls, apply_homography(frame.to_frame, d.bbox), d.score});
    auto noise = cfg.noise;
    noise.seed = derive_seed(seed, 5);
    return detect::simulate_detections(gt, noise);
  }
  const bool identity = frame.to_frame.matrix().isIdentity(0.0);
  const GrayImage rect = identity ? img : warp_image(img, frame.to_frame, frame.width, frame.height);
  return detect::template_detect(rect, templates, cfg.templates);
}

// One image through rectification, detection and interpretation. Stage
// failures are recorded, not thrown.
inline ImageOutcome run_image(const GrayImage& img, const AnnotationBundle& ann,
                              const PipelineConfig& cfg, std::uint64_t seed,
                              const std::vector<detect::Template>& templates) {
  ImageOutcome out;
  try {
    try {
      out.frame = rectified_frame(img, ann, cfg, seed);
    } catch (const StageError& e) {
      if (!cfg.fallback_to_identity) throw;
      out.warnings.push_back(std::string("rectification failed, using identity: ") + e.what());
      out.frame = {Homography::identity(), img.width(), img.height(), {}};
    }
    for (const auto& w : out.frame.warnings) out.warnings.push_back(w);
    out.detections = detections_in_frame(img, ann, out.frame, cfg, templates, seed);
    auto icfg = cfg.interpret;
    icfg.seed = derive_seed(seed, 6);
    out.interpretation = interpret::interpret(out.detections, GridSpec::standard(), icfg);
    out.prediction = out.interpretation->audiogram;
    for (const auto& w : out.interpretation->diagnostics.warnings) out.warnings.push_back(w);
  } catch (const StageError& e) {
    out.error = e.what();
  }
  return out;
}

struct DatasetOutcome {
  eval::EvalReport report;
  std::vector<ImageOutcome> images;
};

inline DatasetOutcome run_dataset(const synth::Manifest& manifest, const PipelineConfig& cfg,
                                  bool keep_images = false) {
  DatasetOutcome out;
  const auto templates = cfg.detect == DetectMethod::template_match
                             ? detect::make_templates(cfg.style, GridSpec::standard(), cfg.templates)
                             : std::vector<detect::Template>{};
  std::vector<eval::ImageReport> reports;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const GrayImage img = read_png(e.image);
    const AnnotationBundle ann = load_annotation(e.annotation);
    auto r = run_image(img, ann, cfg, derive_seed(cfg.seed, i), templates);
    reports.push_back({e.image.filename().string(),
                       eval::count(eval::match_marks(r.prediction, ann.level1)), r.error, r.warnings});
    if (keep_images) out.images.push_back(std::move(r));
  }
  out.report = eval::compute_metrics(std::move(reports), to_json(cfg));
  return out;
}

}  // namespace audiogram::pipeline
