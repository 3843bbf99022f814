#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "audiogram/detection.hpp"
#include "audiogram/errors.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/grid.hpp"
#include "audiogram/random.hpp"
#include "audiogram/serialize.hpp"

namespace audiogram::interpret {

inline Point centroid(const Detection& d) { return d.bbox.center(); }

struct LabelGroups {
  std::vector<Detection> freq_labels;
  std::vector<Detection> hl_labels;
  std::vector<Detection> marks;
  // Positions of each entry in the input list.
  std::vector<std::size_t> freq_index, hl_index, mark_index;
};

inline LabelGroups group_labels(std::span<const Detection> ds) {
  LabelGroups g;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& d = ds[i];
    if (d.cls.is_freq_tick()) {
      g.freq_labels.push_back(d);
      g.freq_index.push_back(i);
    } else if (d.cls.is_hl_tick()) {
      g.hl_labels.push_back(d);
      g.hl_index.push_back(i);
    } else {
      g.marks.push_back(d);
      g.mark_index.push_back(i);
    }
  }
  return g;
}

struct AxisFit {
  Line line;
  std::vector<std::size_t> inliers;
  bool low_support = false;
};

inline Line fit_total_least_squares(std::span<const Point> pts, std::span<const std::size_t> idx) {
  Point c;
  for (std::size_t i : idx) c = c + pts[i];
  c = c * (1.0 / double(idx.size()));
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t i : idx) {
    const Eigen::Vector2d d(pts[i].x - c.x, pts[i].y - c.y);
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const Eigen::Vector2d dir = es.eigenvectors().col(1);
  return Line::from_point_direction(c, {dir.x(), dir.y()});
}

inline AxisFit fit_axis(std::span<const Point> pts, double threshold, int iterations,
                        std::uint64_t seed) {
  if (pts.size() < 2) throw InsufficientDataError("axis fit needs at least 2 points");
  if (iterations < 1 || !(threshold > 0)) throw ParameterError("invalid axis fit parameters");
  Rng rng(seed);
  std::vector<std::size_t> best;
  double best_cost = 0;
  for (int it = 0; it < iterations; ++it) {
    const std::size_t a = std::size_t(rng.index(pts.size()));
    std::size_t b = std::size_t(rng.index(pts.size() - 1));
    if (b >= a) ++b;
    if (distance(pts[a], pts[b]) == 0) continue;
    const Line l = Line::through(pts[a], pts[b]);
    std::vector<std::size_t> in;
    double cost = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = l.distance(pts[i]);
      if (d <= threshold) {
        in.push_back(i);
        cost += d * d;
      }
    }
    if (in.size() > best.size() || (in.size() == best.size() && cost < best_cost)) {
      best = std::move(in);
      best_cost = cost;
    }
  }
  if (best.size() < 2) throw DegenerateError("axis points are all coincident");
  AxisFit fit;
  fit.line = fit_total_least_squares(pts, best);
  fit.inliers = std::move(best);
  const double needed = std::max(2.0, 0.6 * double(pts.size()));
  fit.low_support = double(fit.inliers.size()) < needed;
  return fit;
}

// Unit direction of the axis with a fixed sign (larger component positive).
inline Point axis_direction(const Line& l) {
  Point d = l.direction();
  if (std::abs(d.x) >= std::abs(d.y) ? d.x < 0 : d.y < 0) d = d * -1.0;
  return d;
}

inline Point axis_origin(const Line& a, const Line& b, double min_angle_deg = 15.0) {
  if (undirected_angle_deg(a.direction(), b.direction()) < min_angle_deg)
    throw DegenerateError("axes are nearly parallel");
  return to_point(a.intersect(b));
}

enum class Projection { orthogonal, oblique };

inline Projection projection_from_string(std::string_view s) {
  if (s == "orthogonal") return Projection::orthogonal;
  if (s == "oblique") return Projection::oblique;
  throw ParameterError("projection must be 'orthogonal' or 'oblique'");
}

struct ProjectedMark {
  double p_frequency = 0;
  double p_hl = 0;
  std::size_t source = 0;
};

// Signed coordinates of a point relative to the axes' origin. Orthogonal:
// distance to the foot of the perpendicular on each axis. Oblique:
// coefficients in the (frequency, hl) direction basis.
struct AxisFrame {
  Point origin;
  Point freq_dir;
  Point hl_dir;

  ProjectedMark project(const Point& p, Projection mode, std::size_t source = 0) const {
    const Point v = p - origin;
    if (mode == Projection::orthogonal) return {v.dot(freq_dir), v.dot(hl_dir), source};
    const double det = freq_dir.cross(hl_dir);
    return {v.cross(hl_dir) / det, freq_dir.cross(v) / det, source};
  }
};

inline AxisFrame make_frame(const AxisFit& hl_axis, const AxisFit& f_axis) {
  return {axis_origin(hl_axis.line, f_axis.line), axis_direction(f_axis.line),
          axis_direction(hl_axis.line)};
}

inline std::vector<ProjectedMark> project_marks(std::span<const Point> marks, const AxisFit& hl_axis,
                                                const AxisFit& f_axis, Projection mode) {
  const AxisFrame frame = make_frame(hl_axis, f_axis);
  std::vector<ProjectedMark> out;
  for (std::size_t i = 0; i < marks.size(); ++i) out.push_back(frame.project(marks[i], mode, i));
  return out;
}

enum class CalibrationSpace { linear, log2 };

struct Calibration {
  double slope = 0;
  double intercept = 0;
  CalibrationSpace space = CalibrationSpace::linear;
  std::vector<std::size_t> inliers;
  bool low_support = false;

  double target(double p) const { return slope * p + intercept; }
  double value(double p) const {
    const double t = target(p);
    return space == CalibrationSpace::log2 ? std::exp2(t) : t;
  }
};

struct Sample {
  double p;
  double value;
};

inline Calibration fit_calibration(std::span<const Sample> samples, CalibrationSpace space,
                                   double threshold, int iterations, std::uint64_t seed) {
  if (iterations < 1 || !(threshold > 0)) throw ParameterError("invalid calibration parameters");
  std::vector<double> t;
  for (const auto& s : samples) {
    if (space == CalibrationSpace::log2 && !(s.value > 0))
      throw DomainError("log2 calibration needs positive values");
    t.push_back(space == CalibrationSpace::log2 ? std::log2(s.value) : s.value);
  }
  const std::size_t n = samples.size();
  bool distinct = false;
  for (std::size_t i = 1; i < n && !distinct; ++i) distinct = samples[i].p != samples[0].p;
  if (n < 2 || !distinct) throw InsufficientDataError("calibration needs 2 samples with distinct positions");

  Rng rng(seed);
  std::vector<std::size_t> best;
  double best_cost = 0;
  for (int it = 0; it < iterations; ++it) {
    const std::size_t a = std::size_t(rng.index(n));
    std::size_t b = std::size_t(rng.index(n - 1));
    if (b >= a) ++b;
    if (samples[a].p == samples[b].p) continue;
    const double slope = (t[b] - t[a]) / (samples[b].p - samples[a].p);
    const double icpt = t[a] - slope * samples[a].p;
    std::vector<std::size_t> in;
    double cost = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::abs(t[i] - (slope * samples[i].p + icpt));
      if (r <= threshold) {
        in.push_back(i);
        cost += r * r;
      }
    }
    if (in.size() > best.size() || (in.size() == best.size() && cost < best_cost)) {
      best = std::move(in);
      best_cost = cost;
    }
  }
  // Ordinary least squares on the consensus set.
  double sp = 0, st = 0;
  for (std::size_t i : best) {
    sp += samples[i].p;
    st += t[i];
  }
  const double mp = sp / double(best.size()), mt = st / double(best.size());
  double spp = 0, spt = 0;
  for (std::size_t i : best) {
    spp += (samples[i].p - mp) * (samples[i].p - mp);
    spt += (samples[i].p - mp) * (t[i] - mt);
  }
  if (best.size() < 2 || !(spp > 0)) throw InsufficientDataError("calibration inliers are degenerate");
  Calibration c;
  c.slope = spt / spp;
  c.intercept = mt - c.slope * mp;
  c.space = space;
  double scale = 0;
  for (double v : t) scale = std::max(scale, std::abs(v));
  if (std::abs(c.slope) <= 1e-9 * std::max(1.0, scale)) throw DegenerateError("calibration slope is zero");
  c.inliers = std::move(best);
  c.low_support = double(c.inliers.size()) < std::max(2.0, 0.6 * double(n));
  return c;
}

struct InterpretConfig {
  double min_score = 0.5;
  double axis_threshold = 3.0;  // px
  int axis_iterations = 500;
  double hl_threshold = 5.0;     // dB
  double freq_threshold = 0.25;  // log2 units
  int calibration_iterations = 500;
  Projection projection = Projection::orthogonal;
  // Tick-classed boxes far from their axis but inside the chart range are
  // taken to be misclassified marks.
  bool recover_marks = true;
  // Estimates beyond the grid by more than this share of a tick step are
  // discarded rather than clamped onto the edge.
  double range_margin = 0.25;
  // All marks take the majority ear.
  bool single_ear = true;
  std::uint64_t seed = 0;
};

inline Json to_json(const InterpretConfig& c) {
  return {{"min_score", c.min_score},
          {"axis_threshold", c.axis_threshold},
          {"axis_iterations", c.axis_iterations},
          {"hl_threshold", c.hl_threshold},
          {"freq_threshold", c.freq_threshold},
          {"calibration_iterations", c.calibration_iterations},
          {"projection", c.projection == Projection::orthogonal ? "orthogonal" : "oblique"},
          {"recover_marks", c.recover_marks},
          {"range_margin", c.range_margin},
          {"single_ear", c.single_ear},
          {"seed", c.seed}};
}

inline InterpretConfig interpret_config_from_json(const Json& j, InterpretConfig c = {}) {
  try {
    c.min_score = j.value("min_score", c.min_score);
    c.axis_threshold = j.value("axis_threshold", c.axis_threshold);
    c.axis_iterations = j.value("axis_iterations", c.axis_iterations);
    c.hl_threshold = j.value("hl_threshold", c.hl_threshold);
    c.freq_threshold = j.value("freq_threshold", c.freq_threshold);
    c.calibration_iterations = j.value("calibration_iterations", c.calibration_iterations);
    if (j.contains("projection")) c.projection = projection_from_string(j["projection"].get<std::string>());
    c.recover_marks = j.value("recover_marks", c.recover_marks);
    c.range_margin = j.value("range_margin", c.range_margin);
    c.single_ear = j.value("single_ear", c.single_ear);
    c.seed = j.value("seed", c.seed);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("interpret config: ") + e.what());
  }
  return c;
}

enum class MarkStatus { kept, duplicate, out_of_range };

inline std::string_view to_string(MarkStatus s) {
  switch (s) {
    case MarkStatus::kept: return "kept";
    case MarkStatus::duplicate: return "duplicate";
    case MarkStatus::out_of_range: return "out_of_range";
  }
  return "kept";
}

struct MarkEstimate {
  std::size_t source = 0;  // index into the input detections
  Point center;
  ProjectedMark projected;
  double frequency = 0;  // real-valued, Hz
  double hl = 0;
  AudiogramMark snapped;
  bool recovered = false;  // came from a tick-classed box
  double residual = 0;     // snap distance in tick steps
  MarkStatus status = MarkStatus::kept;
};

struct Diagnostics {
  AxisFit freq_axis, hl_axis;
  std::vector<std::size_t> freq_label_sources, hl_label_sources;
  AxisFrame frame;
  Calibration freq_calibration, hl_calibration;
  std::vector<MarkEstimate> marks;
  std::vector<std::string> warnings;
};

struct Interpretation {
  DigitalAudiogram audiogram;
  Diagnostics diagnostics;
};

// Snap distance in units of one grid step on each axis.
inline double snap_residual(double frequency, double hl, const GridValue& g, const GridSpec& grid) {
  const double df = std::log2(frequency) - std::log2(double(g.frequency));
  const double step = grid.hl_mark_values.size() > 1 ? grid.hl_mark_values[1] - grid.hl_mark_values[0] : 5.0;
  const double dh = (hl - g.hl) / step;
  return std::hypot(df, dh);
}

inline Interpretation interpret(std::span<const Detection> input, const GridSpec& grid = GridSpec::standard(),
                                const InterpretConfig& cfg = {}) {
  Interpretation out;
  auto& diag = out.diagnostics;

  std::vector<std::size_t> used;
  std::vector<Detection> ds;
  for (std::size_t i = 0; i < input.size(); ++i)
    if (input[i].score >= cfg.min_score) {
      ds.push_back(input[i]);
      used.push_back(i);
    }
  const LabelGroups groups = group_labels(ds);
  if (groups.freq_labels.size() < 2) throw InterpretationFailed("fewer than 2 frequency labels");
  if (groups.hl_labels.size() < 2) throw InterpretationFailed("fewer than 2 hearing-level labels");

  std::vector<Point> fpts, hpts;
  for (const auto& d : groups.freq_labels) fpts.push_back(centroid(d));
  for (const auto& d : groups.hl_labels) hpts.push_back(centroid(d));
  diag.freq_axis = fit_axis(fpts, cfg.axis_threshold, cfg.axis_iterations, derive_seed(cfg.seed, 11));
  diag.hl_axis = fit_axis(hpts, cfg.axis_threshold, cfg.axis_iterations, derive_seed(cfg.seed, 12));
  for (std::size_t i : groups.freq_index) diag.freq_label_sources.push_back(used[i]);
  for (std::size_t i : groups.hl_index) diag.hl_label_sources.push_back(used[i]);
  if (diag.freq_axis.low_support) diag.warnings.push_back("frequency axis fit has low support");
  if (diag.hl_axis.low_support) diag.warnings.push_back("hearing-level axis fit has low support");

  diag.frame = make_frame(diag.hl_axis, diag.freq_axis);
  {
    std::vector<Point> corners;
    for (const auto& d : ds) {
      corners.push_back({d.bbox.x_min, d.bbox.y_min});
      corners.push_back({d.bbox.x_max, d.bbox.y_max});
    }
    const Box region = Box::hull(corners);
    const Point c = region.center();
    const Box wide{c.x - 1.5 * region.width(), c.y - 1.5 * region.height(),
                   c.x + 1.5 * region.width(), c.y + 1.5 * region.height()};
    if (!wide.contains(diag.frame.origin)) diag.warnings.push_back("axis origin lies far outside the detections; low confidence");
  }

  auto calibrate = [&](const AxisFit& axis, const std::vector<Detection>& labels,
                       const std::vector<Point>& pts, CalibrationSpace space, double thr,
                       std::uint64_t salt, bool along_freq) {
    std::vector<Sample> samples;
    for (std::size_t i : axis.inliers) {
      const ProjectedMark pm = diag.frame.project(pts[i], cfg.projection);
      samples.push_back({along_freq ? pm.p_frequency : pm.p_hl, double(labels[i].cls.value())});
    }
    try {
      return fit_calibration(samples, space, thr, cfg.calibration_iterations, derive_seed(cfg.seed, salt));
    } catch (const InsufficientDataError& e) {
      throw InterpretationFailed(std::string(along_freq ? "frequency" : "hearing-level") +
                                 " calibration: " + e.what());
    }
  };
  diag.freq_calibration = calibrate(diag.freq_axis, groups.freq_labels, fpts, CalibrationSpace::log2,
                                    cfg.freq_threshold, 21, true);
  diag.hl_calibration = calibrate(diag.hl_axis, groups.hl_labels, hpts, CalibrationSpace::linear,
                                  cfg.hl_threshold, 22, false);
  // Make both maps increasing along their axis direction.
  if (diag.freq_calibration.slope < 0) {
    diag.frame.freq_dir = diag.frame.freq_dir * -1.0;
    diag.freq_calibration.slope = -diag.freq_calibration.slope;
  }
  if (diag.hl_calibration.slope < 0) {
    diag.frame.hl_dir = diag.frame.hl_dir * -1.0;
    diag.hl_calibration.slope = -diag.hl_calibration.slope;
  }
  if (diag.freq_calibration.low_support) diag.warnings.push_back("frequency calibration has low support");
  if (diag.hl_calibration.low_support) diag.warnings.push_back("hearing-level calibration has low support");

  // Candidate marks: mark-classed boxes, plus tick-classed axis outliers.
  struct Candidate {
    std::size_t local;
    bool recovered;
  };
  std::vector<Candidate> cands;
  for (std::size_t i : groups.mark_index) cands.push_back({i, false});
  if (cfg.recover_marks) {
    auto outliers = [&](const AxisFit& axis, const std::vector<std::size_t>& index) {
      std::vector<bool> in(index.size(), false);
      for (std::size_t k : axis.inliers) in[k] = true;
      for (std::size_t k = 0; k < index.size(); ++k)
        if (!in[k]) cands.push_back({index[k], true});
    };
    outliers(diag.freq_axis, groups.freq_index);
    outliers(diag.hl_axis, groups.hl_index);
  }

  const double f_lo = std::log2(double(grid.frequencies.front())) - cfg.range_margin;
  const double f_hi = std::log2(double(grid.frequencies.back())) + cfg.range_margin;
  const double tick_step = grid.hl_ticks.size() > 1 ? grid.hl_ticks[1] - grid.hl_ticks[0] : 10.0;
  const double h_lo = grid.hl_ticks.front() - cfg.range_margin * tick_step;
  const double h_hi = grid.hl_ticks.back() + cfg.range_margin * tick_step;

  int left_votes = 0, right_votes = 0;
  for (const auto& c : cands) {
    const Detection& d = ds[c.local];
    MarkEstimate m;
    m.source = used[c.local];
    m.center = centroid(d);
    m.projected = diag.frame.project(m.center, cfg.projection, m.source);
    const double lf = diag.freq_calibration.target(m.projected.p_frequency);
    m.frequency = std::exp2(lf);
    m.hl = diag.hl_calibration.value(m.projected.p_hl);
    m.recovered = c.recovered;
    const Ear ear = d.cls.is_mark() ? d.cls.ear() : Ear::left;
    if (!(lf >= f_lo && lf <= f_hi && m.hl >= h_lo && m.hl <= h_hi) || !std::isfinite(m.frequency)) {
      m.status = MarkStatus::out_of_range;
      m.snapped = {0, 0, ear};
    } else {
      const GridValue g = snap_to_grid(m.frequency, m.hl, grid);
      m.snapped = {g.frequency, g.hl, ear};
      m.residual = snap_residual(m.frequency, m.hl, g, grid);
      if (!c.recovered) (ear == Ear::left ? left_votes : right_votes)++;
    }
    diag.marks.push_back(m);
  }

  const Ear majority = right_votes > left_votes ? Ear::right : Ear::left;
  for (auto& m : diag.marks) {
    if (m.recovered || cfg.single_ear) m.snapped.ear = majority;
  }

  // Keep one mark per (frequency, ear).
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < diag.marks.size(); ++i)
    if (diag.marks[i].status == MarkStatus::kept) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ma = diag.marks[a];
    const auto& mb = diag.marks[b];
    const double sa = input[ma.source].score, sb = input[mb.source].score;
    if (sa != sb) return sa > sb;
    if (ma.recovered != mb.recovered) return !ma.recovered;
    return ma.residual < mb.residual;
  });
  int duplicates = 0, out_of_range = 0;
  for (std::size_t i : order) {
    auto& m = diag.marks[i];
    if (out.audiogram.hl_at(m.snapped.ear, m.snapped.frequency)) {
      m.status = MarkStatus::duplicate;
      ++duplicates;
    } else {
      out.audiogram.add(m.snapped, grid);
    }
  }
  for (const auto& m : diag.marks) out_of_range += m.status == MarkStatus::out_of_range;
  if (duplicates > 0)
    diag.warnings.push_back(std::to_string(duplicates) + " duplicate mark(s) dropped");
  if (out_of_range > 0)
    diag.warnings.push_back(std::to_string(out_of_range) + " candidate mark(s) outside the chart range");
  return out;
}

inline Json to_json(const AxisFit& a) {
  Json in = Json::array();
  for (std::size_t i : a.inliers) in.push_back(i);
  return {{"line", {a.line.coeffs.x(), a.line.coeffs.y(), a.line.coeffs.z()}},
          {"inliers", in},
          {"low_support", a.low_support}};
}

inline Json to_json(const Calibration& c) {
  return {{"slope", c.slope},
          {"intercept", c.intercept},
          {"space", c.space == CalibrationSpace::log2 ? "log2" : "linear"},
          {"inlier_count", c.inliers.size()},
          {"low_support", c.low_support}};
}

inline Json to_json(const Diagnostics& d) {
  Json marks = Json::array();
  for (const auto& m : d.marks) {
    Json j{{"source", m.source},
           {"centroid", {m.center.x, m.center.y}},
           {"p_frequency", m.projected.p_frequency},
           {"p_hl", m.projected.p_hl},
           {"frequency_estimate", m.frequency},
           {"hl_estimate", m.hl},
           {"recovered", m.recovered},
           {"status", std::string(to_string(m.status))}};
    if (m.status != MarkStatus::out_of_range)
      j["snapped"] = {{"frequency", m.snapped.frequency}, {"hl", m.snapped.hl},
                      {"ear", std::string(to_string(m.snapped.ear))}};
    marks.push_back(j);
  }
  return {{"frequency_axis", to_json(d.freq_axis)},
          {"hl_axis", to_json(d.hl_axis)},
          {"frequency_label_sources", d.freq_label_sources},
          {"hl_label_sources", d.hl_label_sources},
          {"origin", {d.frame.origin.x, d.frame.origin.y}},
          {"frequency_direction", {d.frame.freq_dir.x, d.frame.freq_dir.y}},
          {"hl_direction", {d.frame.hl_dir.x, d.frame.hl_dir.y}},
          {"frequency_calibration", to_json(d.freq_calibration)},
          {"hl_calibration", to_json(d.hl_calibration)},
          {"marks", marks},
          {"warnings", d.warnings}};
}

inline Json to_json(const Interpretation& r) {
  return {{"marks", json_io::audiogram_marks(r.audiogram)}, {"diagnostics", to_json(r.diagnostics)}};
}

// Overlay-relevant geometry read back from an interpretation JSON.
struct OverlayGeometry {
  std::optional<Line> freq_axis, hl_axis;
  std::optional<Point> origin;
  struct Labelled {
    Point center;
    AudiogramMark mark;
  };
  std::vector<Labelled> marks;
};

inline OverlayGeometry overlay_geometry(const Json& j) {
  OverlayGeometry g;
  if (!j.is_object()) throw SchemaError("interpretation: expected an object");
  if (!j.contains("diagnostics")) return g;
  const auto& d = j["diagnostics"];
  try {
    auto line = [](const Json& a) {
      return Line(Eigen::Vector3d(a["line"][0].get<double>(), a["line"][1].get<double>(),
                                  a["line"][2].get<double>()));
    };
    if (d.contains("frequency_axis")) g.freq_axis = line(d["frequency_axis"]);
    if (d.contains("hl_axis")) g.hl_axis = line(d["hl_axis"]);
    if (d.contains("origin")) g.origin = Point{d["origin"][0].get<double>(), d["origin"][1].get<double>()};
    if (d.contains("marks"))
      for (const auto& m : d["marks"]) {
        if (m.value("status", std::string()) != "kept" || !m.contains("snapped")) continue;
        g.marks.push_back({{m["centroid"][0].get<double>(), m["centroid"][1].get<double>()},
                           {m["snapped"]["frequency"].get<int>(), m["snapped"]["hl"].get<int>(),
                            ear_from_string(m["snapped"]["ear"].get<std::string>())}});
      }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("interpretation diagnostics: ") + e.what());
  }
  return g;
}

}  // namespace audiogram::interpret
