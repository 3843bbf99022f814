#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "audiogram/audiogram.hpp"

using namespace audiogram;
using namespace audiogram::interpret;

namespace {

Detection box_at(MarkClass cls, Point c, double half = 6) {
  return {cls, {c.x - half, c.y - half, c.x + half, c.y + half}, 1.0};
}

// A hand-built chart: frequency labels along y = 500 spaced 100 px per
// octave from x = 50, HL labels along x = 20 at 4 px per dB from y = 80.
std::vector<Detection> synthetic_axes() {
  std::vector<Detection> ds;
  for (int f : GridSpec::standard().frequencies)
    ds.push_back(box_at(MarkClass::freq_tick(f), {50 + 100 * std::log2(f / 125.0), 500}));
  for (int hl : GridSpec::standard().hl_ticks) ds.push_back(box_at(MarkClass::hl_tick(hl), {20, 80 + 4.0 * (hl + 10)}));
  return ds;
}

Point chart_point(double f, double hl) { return {50 + 100 * std::log2(f / 125.0), 80 + 4.0 * (hl + 10)}; }

std::vector<Detection> transformed(const std::vector<Detection>& ds, const Homography& h) {
  std::vector<Detection> out;
  for (const auto& d : ds) {
    const Point c = apply_homography(h, d.bbox.center());
    out.push_back(box_at(d.cls, c, d.bbox.width() / 2));
  }
  return out;
}

}  // namespace

TEST(Centroid, BoxCenters) {
  EXPECT_EQ(centroid({MarkClass::mark(Ear::left), {0, 0, 2, 2}, 1}), (Point{1, 1}));
  EXPECT_EQ(centroid({MarkClass::mark(Ear::left), {10, 20, 14, 26}, 1}), (Point{12, 23}));
}

TEST(Centroid, UndistortedMarksSitOnGridIntersections) {
  const auto s = synth::make_sample(3, 0, GridSpec::standard(), {}, {0, 0, 0, 0, 0, 0, 0});
  const synth::ChartLayout layout({}, GridSpec::standard());
  for (const auto& d : s.annotation.level4) {
    if (!d.cls.is_mark()) continue;
    const Point c = centroid(d);
    double best = 1e300;
    for (const auto& m : s.annotation.level1.marks())
      best = std::min(best, distance(c, {double(layout.x_of(m.frequency)), double(layout.y_of(m.hl))}));
    EXPECT_LE(best, 0.5);
  }
}

TEST(Grouping, CountsByRole) {
  const auto s = synth::make_sample(3, 1, GridSpec::standard(), {}, {});
  const auto g = group_labels(s.annotation.level4);
  EXPECT_EQ(g.freq_labels.size(), 8u);
  EXPECT_EQ(g.hl_labels.size(), 14u);
  EXPECT_EQ(g.marks.size(), s.annotation.level1.marks().size());
  const auto e = group_labels(std::vector<Detection>{});
  EXPECT_TRUE(e.freq_labels.empty() && e.hl_labels.empty() && e.marks.empty());
  std::vector<Detection> only{box_at(MarkClass::mark(Ear::right), {5, 5})};
  const auto o = group_labels(only);
  EXPECT_TRUE(o.freq_labels.empty() && o.hl_labels.empty());
  EXPECT_EQ(o.marks.size(), 1u);
}

TEST(AxisFitTest, CollinearAndOutliers) {
  std::vector<Point> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({10.0 * i, 3.0 + 2.0 * i});
  const auto a = fit_axis(pts, 3, 100, 1);
  EXPECT_EQ(a.inliers.size(), 5u);
  for (const auto& p : pts) EXPECT_LT(a.line.distance(p), 1e-9);

  std::vector<Point> many;
  for (int i = 0; i < 12; ++i) many.push_back({30.0 * i, 100 + 0.5 * i});
  const auto clean = fit_axis(many, 3, 200, 2);
  many.push_back({40, 300});
  many.push_back({200, -80});
  const auto noisy = fit_axis(many, 3, 200, 2);
  EXPECT_EQ(noisy.inliers.size(), 12u);
  EXPECT_LT(undirected_angle_deg(noisy.line.direction(), clean.line.direction()), 1e-9);
  EXPECT_LT(noisy.line.distance(many[0]), 1e-9);
  EXPECT_FALSE(noisy.low_support);
}

TEST(AxisFitTest, SyntheticHearingLevelLabelsAreVertical) {
  const auto s = synth::make_sample(8, 0, GridSpec::standard(), {}, {0, 0, 0, 0, 0, 0, 0});
  std::vector<Point> pts;
  for (const auto& d : s.annotation.level4)
    if (d.cls.is_hl_tick()) pts.push_back(centroid(d));
  ASSERT_EQ(pts.size(), 14u);
  const auto a = fit_axis(pts, 3, 500, 1);
  EXPECT_LT(undirected_angle_deg(a.line.direction(), {0, 1}), 0.2);
}

TEST(AxisFitTest, TooFewPoints) {
  const std::vector<Point> one{{0, 0}};
  EXPECT_THROW(fit_axis(one, 3, 10, 0), InsufficientDataError);
}

TEST(ProjectionTest, RightAngleAxes) {
  AxisFit hl{Line::through(Point{0, 0}, Point{0, 10}), {}, false};
  AxisFit f{Line::through(Point{0, 0}, Point{10, 0}), {}, false};
  const std::vector<Point> marks{{0, 0}, {30, -40}};
  for (auto mode : {Projection::orthogonal, Projection::oblique}) {
    const auto p = project_marks(marks, hl, f, mode);
    EXPECT_NEAR(p[0].p_frequency, 0, 1e-12);
    EXPECT_NEAR(p[0].p_hl, 0, 1e-12);
    EXPECT_NEAR(std::abs(p[1].p_frequency), 30, 1e-12);
    EXPECT_NEAR(std::abs(p[1].p_hl), 40, 1e-12);
  }
}

TEST(ProjectionTest, ObliqueRecoversShearedCoordinates) {
  const double a = 80 * std::numbers::pi / 180;
  const Point hl_dir{std::cos(a), std::sin(a)};
  AxisFit hl{Line::from_point_direction({0, 0}, hl_dir), {}, false};
  AxisFit f{Line::through(Point{0, 0}, Point{10, 0}), {}, false};
  const Point p = Point{1, 0} * 25 + hl_dir * 40;
  const auto ob = project_marks(std::vector<Point>{p}, hl, f, Projection::oblique)[0];
  EXPECT_NEAR(ob.p_frequency, 25, 1e-9);
  EXPECT_NEAR(ob.p_hl, 40, 1e-9);
  const auto orth = project_marks(std::vector<Point>{p}, hl, f, Projection::orthogonal)[0];
  EXPECT_GT(std::abs(orth.p_frequency - 25), 1.0);
}

TEST(CalibrationTest, LinearAndLogExamples) {
  const std::vector<Sample> lin{{0, -10}, {10, 0}, {20, 10}};
  const auto c = fit_calibration(lin, CalibrationSpace::linear, 5, 50, 1);
  EXPECT_NEAR(c.slope, 1, 1e-12);
  EXPECT_NEAR(c.intercept, -10, 1e-12);
  const std::vector<Sample> lg{{0, 125}, {10, 250}, {20, 500}};
  const auto l = fit_calibration(lg, CalibrationSpace::log2, 0.25, 50, 1);
  EXPECT_NEAR(l.slope, 0.1, 1e-12);
  EXPECT_NEAR(l.intercept, std::log2(125.0), 1e-12);
  EXPECT_NEAR(l.value(15), 125 * std::pow(2.0, 1.5), 1e-9);
}

TEST(CalibrationTest, CorruptedLabelsDoNotMoveTheFit) {
  auto ds = synth::make_sample(6, 0, GridSpec::standard(), {}, {0, 0, 0, 0, 0, 0, 0}).annotation.level4;
  std::vector<Sample> clean, bad;
  for (const auto& d : ds)
    if (d.cls.is_hl_tick()) clean.push_back({centroid(d).y, double(d.cls.value())});
  ASSERT_EQ(clean.size(), 14u);
  bad = clean;
  bad[3].value = 90;
  bad[10].value = -10;
  const auto a = fit_calibration(clean, CalibrationSpace::linear, 5, 500, 3);
  const auto b = fit_calibration(bad, CalibrationSpace::linear, 5, 500, 3);
  EXPECT_NEAR(b.slope, a.slope, 0.01 * std::abs(a.slope));
  EXPECT_NEAR(b.intercept, a.intercept, 0.01 * std::abs(a.intercept));
  EXPECT_EQ(b.inliers.size(), 12u);
}

TEST(CalibrationTest, Degenerate) {
  const std::vector<Sample> same{{5, 10}, {5, 20}};
  EXPECT_THROW(fit_calibration(same, CalibrationSpace::linear, 5, 10, 0), InsufficientDataError);
  const std::vector<Sample> neg{{0, -1}, {1, 2}};
  EXPECT_THROW(fit_calibration(neg, CalibrationSpace::log2, 0.25, 10, 0), DomainError);
}

TEST(Interpret, WorkedSnapExample) {
  auto ds = synthetic_axes();
  ds.push_back(box_at(MarkClass::mark(Ear::left), chart_point(130, 14)));
  const auto r = interpret::interpret(ds);
  ASSERT_EQ(r.diagnostics.marks.size(), 1u);
  const auto& m = r.diagnostics.marks[0];
  EXPECT_NEAR(m.frequency, 130, 1e-6);
  EXPECT_NEAR(m.hl, 14, 1e-6);
  EXPECT_EQ(m.snapped.frequency, 125);
  EXPECT_EQ(m.snapped.hl, 15);
  EXPECT_EQ(r.audiogram.hl_at(Ear::left, 125), 15);
}

TEST(Interpret, GroundTruthRoundTrip) {
  for (std::size_t i = 0; i < 25; ++i) {
    const auto s = synth::make_sample(1, i, GridSpec::standard(), {}, {0, 0, 0, 0, 0, 0, 0});
    const auto r = interpret::interpret(s.annotation.level4);
    EXPECT_EQ(r.audiogram, s.annotation.level1) << i;
  }
}

TEST(Interpret, SimilarityInvariance) {
  const auto s = synth::make_sample(12, 0, GridSpec::standard(), {}, {0, 0, 0, 0, 0, 0, 0});
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const double a = rng.uniform(-std::numbers::pi, std::numbers::pi), sc = rng.uniform(0.5, 2.0);
    Eigen::Matrix3d m;
    m << sc * std::cos(a), -sc * std::sin(a), rng.uniform(-300, 300), sc * std::sin(a), sc * std::cos(a),
        rng.uniform(-300, 300), 0, 0, 1;
    const auto r = interpret::interpret(transformed(s.annotation.level4, Homography(m)));
    EXPECT_EQ(r.audiogram, s.annotation.level1) << k;
  }
}

TEST(Interpret, AxisRolesUseOnlyTheirOwnLabels) {
  const auto s = synth::make_sample(13, 0, GridSpec::standard(), {}, {});
  const auto& ds = s.annotation.level4;
  const auto r = interpret::interpret(ds);
  for (std::size_t i : r.diagnostics.freq_label_sources) EXPECT_TRUE(ds[i].cls.is_freq_tick());
  for (std::size_t i : r.diagnostics.hl_label_sources) EXPECT_TRUE(ds[i].cls.is_hl_tick());
}

TEST(Interpret, MonotoneInHearingLevelPosition) {
  const auto r = interpret::interpret(synthetic_axes());
  const auto& cal = r.diagnostics.hl_calibration;
  int last = -1000;
  for (double p = -100; p < 700; p += 0.37) {
    const int hl = snap_to_grid(1000, std::clamp(cal.value(p), -10.0, 120.0)).hl;
    EXPECT_GE(hl, last);
    last = hl;
  }
}

TEST(Interpret, DeterministicIncludingDiagnostics) {
  const auto s = synth::make_sample(14, 0, GridSpec::standard(), {}, {});
  detect::DetectorNoise n{2, 0.1, 0.05, 1, 8, 40, 3};
  const auto ds = detect::simulate_detections(s.annotation.level4, n);
  EXPECT_EQ(to_json(interpret::interpret(ds)).dump(), to_json(interpret::interpret(ds)).dump());
}

TEST(Interpret, FrequencyCalibrationRoundTrip) {
  const auto s = synth::make_sample(15, 0, GridSpec::standard(), {}, {0, 0, 0, 0, 0, 0, 0});
  const auto r = interpret::interpret(s.annotation.level4);
  const auto& d = r.diagnostics;
  for (std::size_t k : d.freq_axis.inliers) {
    const auto& det = s.annotation.level4[d.freq_label_sources[k]];
    const auto pm = d.frame.project(centroid(det), Projection::orthogonal);
    const double f = d.freq_calibration.value(pm.p_frequency);
    EXPECT_LE(std::abs(f - det.cls.value()) / det.cls.value(), 0.02);
  }
}

TEST(Interpret, ObliqueModeUndoesResidualShear) {
  // Shear that leaves axes 80 degrees apart.
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 1) = std::tan(10 * std::numbers::pi / 180);
  const Homography shear(m);
  int oblique_exact = 0, orth_exact = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto s = synth::make_sample(16, i, GridSpec::standard(), {}, {0, 0, 0, 0, 0, 0, 0});
    const auto ds = transformed(s.annotation.level4, shear);
    InterpretConfig cfg;
    cfg.projection = Projection::oblique;
    oblique_exact += interpret::interpret(ds, GridSpec::standard(), cfg).audiogram == s.annotation.level1;
    cfg.projection = Projection::orthogonal;
    orth_exact += interpret::interpret(ds, GridSpec::standard(), cfg).audiogram == s.annotation.level1;
  }
  EXPECT_EQ(oblique_exact, 10);
  RecordProperty("orthogonal_exact_of_10", orth_exact);
  std::printf("orthogonal projection exact on %d of 10 sheared charts\n", orth_exact);
}

TEST(Interpret, MissingLabelsFail) {
  std::vector<Detection> ds{box_at(MarkClass::freq_tick(125), {0, 0}), box_at(MarkClass::hl_tick(10), {0, 50}),
                            box_at(MarkClass::hl_tick(20), {0, 90})};
  EXPECT_THROW(interpret::interpret(ds), InterpretationFailed);
}

TEST(Interpret, ScoreFilterAndDuplicates) {
  auto ds = synthetic_axes();
  auto a = box_at(MarkClass::mark(Ear::left), chart_point(1000, 40));
  auto b = box_at(MarkClass::mark(Ear::left), chart_point(1000, 50));
  a.score = 0.9;
  b.score = 0.7;
  auto weak = box_at(MarkClass::mark(Ear::left), chart_point(2000, 20));
  weak.score = 0.3;
  ds.insert(ds.end(), {a, b, weak});
  const auto r = interpret::interpret(ds);
  EXPECT_EQ(r.audiogram.hl_at(Ear::left, 1000), 40);
  EXPECT_FALSE(r.audiogram.hl_at(Ear::left, 2000));
  bool warned = false;
  for (const auto& w : r.diagnostics.warnings) warned |= w.find("duplicate") != std::string::npos;
  EXPECT_TRUE(warned);
}

TEST(Interpret, JsonShape) {
  auto ds = synthetic_axes();
  ds.push_back(box_at(MarkClass::mark(Ear::right), chart_point(500, 30)));
  const Json j = to_json(interpret::interpret(ds));
  ASSERT_TRUE(j.contains("marks"));
  ASSERT_TRUE(j.contains("diagnostics"));
  EXPECT_EQ(j["marks"][0]["frequency"], 500);
  EXPECT_EQ(j["marks"][0]["hl"], 30);
  EXPECT_EQ(j["marks"][0]["ear"], "right");
  const auto geom = overlay_geometry(j);
  EXPECT_TRUE(geom.origin.has_value());
  EXPECT_EQ(geom.marks.size(), 1u);
}
