#include <gtest/gtest.h>

#include <filesystem>

#include "audiogram/audiogram.hpp"

using namespace audiogram;
using namespace audiogram::synth;

namespace {

DigitalAudiogram example_audiogram() {
  DigitalAudiogram g;
  const int hls[] = {10, 15, 20, 35, 50, 65, 80, 95};
  int i = 0;
  for (int f : GridSpec::standard().frequencies) g.add({f, hls[i++], Ear::right});
  return g;
}

int ink_in(const GrayImage& img, const Box& b) {
  int n = 0;
  for (int y = int(std::ceil(b.y_min)); y <= int(std::floor(b.y_max)); ++y)
    for (int x = int(std::ceil(b.x_min)); x <= int(std::floor(b.x_max)); ++x)
      n += img.contains(x, y) && img(x, y) < 128;
  return n;
}

}  // namespace

TEST(Render, AnnotationsAreConsistentWithLayout) {
  const RenderStyle style;
  const ChartLayout layout(style, GridSpec::standard());
  const auto r = render_audiogram(example_audiogram(), style);
  const auto& ann = r.annotation;
  EXPECT_EQ(ann.level1, example_audiogram());
  ASSERT_EQ(ann.level3.size(), 4u);
  EXPECT_EQ(ann.level3[0], (Point{double(layout.left()), double(layout.top())}));
  EXPECT_EQ(ann.level3[2], (Point{double(layout.right()), double(layout.bottom())}));
  EXPECT_EQ(ann.level4.size(), 8u + 14u + 8u);
  for (const auto& d : ann.level4) {
    EXPECT_TRUE(ann.level2.contains(d.bbox)) << d.cls.name();
    EXPECT_GT(ink_in(r.image, d.bbox), 0) << d.cls.name();
  }
  for (const auto& d : ann.level4) {
    if (!d.cls.is_mark()) continue;
    const Point c{(d.bbox.x_min + d.bbox.x_max) / 2, (d.bbox.y_min + d.bbox.y_max) / 2};
    bool matched = false;
    for (const auto& m : ann.level1.marks())
      matched |= std::abs(c.x - layout.x_of(m.frequency)) < 1e-9 && std::abs(c.y - layout.y_of(m.hl)) < 1e-9;
    EXPECT_TRUE(matched);
  }
  EXPECT_TRUE(ann.true_homography.matrix().isIdentity(0.0));
}

TEST(Render, LayoutIsLogLinear) {
  const ChartLayout layout(RenderStyle{}, GridSpec::standard());
  for (std::size_t i = 1; i < GridSpec::standard().frequencies.size(); ++i)
    EXPECT_EQ(layout.x_of(GridSpec::standard().frequencies[i]) - layout.x_of(GridSpec::standard().frequencies[i - 1]),
              RenderStyle{}.octave_spacing);
  EXPECT_EQ(layout.y_of(10) - layout.y_of(0), RenderStyle{}.tick_spacing);
  EXPECT_EQ(layout.y_of(15) - layout.y_of(10), RenderStyle{}.tick_spacing / 2);
}

TEST(Render, IsDeterministic) {
  const auto a = render_audiogram(example_audiogram(), {});
  const auto b = render_audiogram(example_audiogram(), {});
  EXPECT_EQ(a.image, b.image);
}

TEST(Render, RejectsLayoutThatDoesNotFit) {
  RenderStyle s;
  s.width = 300;
  EXPECT_THROW(render_audiogram(example_audiogram(), s), LayoutError);
}

TEST(Distort, AnnotationsFollowTheTrueHomography) {
  const RenderStyle style;
  const auto clean = render_audiogram(example_audiogram(), style);
  DistortionParams p;
  p.camera_angle_deg = 35;
  p.inplane_rotation_deg = 5;
  p.noise_sigma = 3;
  p.lighting_magnitude = 0.2;
  p.seed = 4;
  const auto d = distort(clean.image, clean.annotation, p);
  const Homography& h = d.annotation.true_homography;
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_LT(distance(d.annotation.level3[i], apply_homography(h, clean.annotation.level3[i])), 1e-9);
  for (std::size_t i = 0; i < clean.annotation.level4.size(); ++i) {
    const Box got = d.annotation.level4[i].bbox;
    const Box want = apply_homography(h, clean.annotation.level4[i].bbox);
    EXPECT_NEAR(got.x_min, want.x_min, 1e-9);
    EXPECT_NEAR(got.y_max, want.y_max, 1e-9);
  }
  EXPECT_EQ(d.annotation.level1, clean.annotation.level1);
  const Box frame{-0.5, -0.5, style.width - 0.5, style.height - 0.5};
  EXPECT_TRUE(frame.contains(d.annotation.level2));
  // The mapped grid stays dark where it should be.
  const Point corner = d.annotation.level3[0];
  EXPECT_LT(d.image(int(std::lround(corner.x)), int(std::lround(corner.y))), 200);
}

TEST(Distort, ZeroDistortionIsIdentity) {
  const auto clean = render_audiogram(example_audiogram(), {});
  DistortionParams p;
  p.tilt_axis_deg = 0;
  p.frame_margin = 0;
  const auto d = distort(clean.image, clean.annotation, p);
  EXPECT_TRUE(d.annotation.true_homography.matrix().isIdentity(1e-12));
  EXPECT_EQ(d.image, clean.image);
}

TEST(Distort, RejectsBadParameters) {
  const auto clean = render_audiogram(example_audiogram(), {});
  DistortionParams p;
  p.camera_angle_deg = 60;
  EXPECT_THROW(distort(clean.image, clean.annotation, p), ParameterError);
  p.camera_angle_deg = 10;
  p.noise_sigma = -1;
  EXPECT_THROW(distort(clean.image, clean.annotation, p), ParameterError);
}

TEST(RoundCorners, StaysNearOriginalBoundaryAndCutsCorners) {
  const std::vector<Point> quad{{0, 0}, {200, 10}, {210, 150}, {-5, 140}};
  const auto r = round_polygon_corners(quad, 8.0, 5, 2.0, 0.3, 1);
  EXPECT_GT(r.size(), 100u);
  for (const auto& p : r) {
    double best = 1e300;
    for (std::size_t i = 0; i < 4; ++i) {
      const Line l = Line::through(quad[i], quad[(i + 1) % 4]);
      best = std::min(best, std::abs(l.signed_distance(p)));
    }
    EXPECT_LT(best, 8.0);
  }
  for (const auto& c : quad)
    for (const auto& p : r) EXPECT_GT(distance(c, p), 2.0);
}

TEST(Sampling, SamplesAreDeterministicAndOnGrid) {
  const auto a = make_sample(9, 3, GridSpec::standard(), {}, {});
  const auto b = make_sample(9, 3, GridSpec::standard(), {}, {});
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.annotation.level1, b.annotation.level1);
  const auto c = make_sample(9, 4, GridSpec::standard(), {}, {});
  EXPECT_NE(a.image, c.image);
  EXPECT_FALSE(a.annotation.level1.marks().empty());
}

TEST(Dataset, WritesManifestAndFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "audiogram_dataset_test";
  std::filesystem::remove_all(dir);
  DistortionRanges r;
  r.angle_max = 20;
  const auto manifest_path = generate_dataset(3, GridSpec::standard(), {}, r, 5, dir);
  const auto m = load_manifest(manifest_path);
  EXPECT_EQ(m.seed, 5u);
  ASSERT_EQ(m.entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto s = make_sample(5, i, GridSpec::standard(), {}, r);
    EXPECT_EQ(read_png(m.entries[i].image), s.image);
    EXPECT_EQ(load_annotation(m.entries[i].annotation).level1, s.annotation.level1);
  }
  EXPECT_THROW(generate_dataset(0, GridSpec::standard(), {}, r, 5, dir), ParameterError);
  std::filesystem::remove_all(dir);
}
