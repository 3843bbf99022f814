#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "audiogram/audiogram.hpp"

using namespace audiogram;

namespace {

// Snap by exhaustive scan over every grid point with a combined score.
GridValue brute_force_snap(double f, double hl) {
  const auto& g = GridSpec::standard();
  GridValue best{};
  double best_df = 1e300, best_dh = 1e300;
  for (int c : g.frequencies) {
    const double d = std::abs(std::log2(f) - std::log2(c));
    if (d < best_df - 1e-15) best_df = d, best.frequency = c;
  }
  for (int c : g.hl_mark_values) {
    const double d = std::abs(hl - c);
    if (d < best_dh - 1e-15) best_dh = d, best.hl = c;
  }
  return best;
}

Homography random_homography(Rng& rng) {
  Eigen::Matrix3d m;
  m << rng.uniform(0.7, 1.3), rng.uniform(-0.3, 0.3), rng.uniform(-50, 50),
      rng.uniform(-0.3, 0.3), rng.uniform(0.7, 1.3), rng.uniform(-50, 50),
      rng.uniform(-4e-4, 4e-4), rng.uniform(-4e-4, 4e-4), 1.0;
  return Homography(m);
}

}  // namespace

TEST(Snap, WorkedExampleFromTheMethod) {
  const auto s = snap_to_grid(130, 14);
  EXPECT_EQ(s.frequency, 125);
  EXPECT_EQ(s.hl, 15);
}

TEST(Snap, MatchesExhaustiveScan) {
  Rng rng(42);
  for (int i = 0; i < 20000; ++i) {
    const double f = std::exp2(rng.uniform(5.0, 16.0));
    const double hl = rng.uniform(-40, 160);
    EXPECT_EQ(snap_to_grid(f, hl), brute_force_snap(f, hl)) << f << " " << hl;
  }
}

TEST(Snap, IdempotentAndTotalOverGrid) {
  for (int f : GridSpec::standard().frequencies)
    for (int hl : GridSpec::standard().hl_mark_values) {
      const auto s = snap_to_grid(f, hl);
      EXPECT_EQ(s, (GridValue{f, hl}));
      EXPECT_EQ(snap_to_grid(s.frequency, s.hl), s);
    }
}

TEST(Snap, TiesGoToSmallerValue) {
  EXPECT_EQ(snap_to_grid(1000, 12.5).hl, 10);
  EXPECT_EQ(snap_to_grid(1000 * std::sqrt(2.0), 0).frequency, 1000);
}

TEST(Snap, RejectsNonFiniteAndNonPositive) {
  EXPECT_THROW(snap_to_grid(std::nan(""), 0), DomainError);
  EXPECT_THROW(snap_to_grid(0, 0), DomainError);
  EXPECT_THROW(snap_to_grid(-5, 0), DomainError);
  EXPECT_THROW(snap_to_grid(1000, INFINITY), DomainError);
}

TEST(DigitalAudiogramTest, RejectsOffGridAndDuplicates) {
  DigitalAudiogram g;
  g.add({1000, 20, Ear::left});
  EXPECT_THROW(g.add({1000, 25, Ear::left}), DomainError);
  EXPECT_NO_THROW(g.add({1000, 25, Ear::right}));
  EXPECT_THROW(g.add({1100, 25, Ear::right}), DomainError);
  EXPECT_THROW(g.add({2000, 22, Ear::right}), DomainError);
  EXPECT_EQ(g.hl_at(Ear::left, 1000), 20);
  EXPECT_FALSE(g.hl_at(Ear::left, 2000));
}

TEST(MarkClassTest, TwentyFourClassesRoundTripByName) {
  ASSERT_EQ(MarkClass::all().size(), 24u);
  for (std::size_t i = 0; i < 24; ++i) {
    const auto c = MarkClass::from_index(i);
    EXPECT_EQ(c.index(), i);
    EXPECT_EQ(MarkClass::from_name(c.name()), c);
  }
  EXPECT_THROW(MarkClass::hl_tick(15), DomainError);
  EXPECT_THROW(MarkClass::freq_tick(3000), DomainError);
}

TEST(HomographyTest, PointRoundTripWithinTolerance) {
  Rng rng(7);
  for (int k = 0; k < 200; ++k) {
    const Homography h = random_homography(rng);
    const Homography inv = h.inverse();
    for (int i = 0; i < 50; ++i) {
      const Point p{rng.uniform(0, 800), rng.uniform(0, 600)};
      const Point q = apply_homography(inv, apply_homography(h, p));
      EXPECT_LT(distance(p, q), 1e-6);
    }
  }
}

TEST(HomographyTest, CompositionAppliesRightOperandFirst) {
  const Homography a = Homography::translation(5, 0);
  const Homography b = Homography::scaling(2, 2);
  const Point p = apply_homography(a * b, Point{1, 1});
  EXPECT_DOUBLE_EQ(p.x, 7);
  EXPECT_DOUBLE_EQ(p.y, 2);
}

TEST(HomographyTest, FromCorrespondencesReproducesKnownMap) {
  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    const Homography h = random_homography(rng);
    const std::array<Point, 4> src{Point{10, 20}, Point{500, 30}, Point{520, 400}, Point{20, 380}};
    std::array<Point, 4> dst;
    for (int i = 0; i < 4; ++i) dst[i] = apply_homography(h, src[i]);
    const Homography est = homography_from_correspondences(src, dst);
    for (int i = 0; i < 20; ++i) {
      const Point p{rng.uniform(0, 600), rng.uniform(0, 450)};
      EXPECT_LT(distance(apply_homography(est, p), apply_homography(h, p)), 1e-6);
    }
  }
}

TEST(HomographyTest, CollinearCorrespondencesAreDegenerate) {
  const std::array<Point, 4> src{Point{0, 0}, Point{1, 1}, Point{2, 2}, Point{0, 5}};
  const std::array<Point, 4> dst{Point{0, 0}, Point{1, 0}, Point{1, 1}, Point{0, 1}};
  EXPECT_THROW(homography_from_correspondences(src, dst), DegenerateError);
}

TEST(HomographyTest, SingularMatrixRejected) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 0) = 1;
  EXPECT_THROW(Homography{m}, DegenerateError);
}

TEST(HomographyTest, IdealPointsStayIdealUnderAffineMaps) {
  const Homography a = Homography::scaling(2, 3) * Homography::translation(4, 5);
  const HPoint v = apply_homography(a, ideal_point(1, 1));
  EXPECT_TRUE(is_ideal(v));
  EXPECT_NEAR(v.y() / v.x(), 1.5, 1e-12);
}

TEST(BoxTest, IouAndHull) {
  const Box a{0, 0, 10, 10}, b{5, 0, 15, 10};
  EXPECT_DOUBLE_EQ(intersection_area(a, b), 50);
  EXPECT_DOUBLE_EQ(iou(a, b), 50.0 / 150.0);
  const std::vector<Point> pts{{1, 5}, {-2, 3}, {4, -1}};
  const Box h = Box::hull(pts);
  EXPECT_EQ(h, (Box{-2, -1, 4, 5}));
}

TEST(RngTest, SameSeedSameStream) {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(RngTest, DistributionMoments) {
  Rng rng(5);
  const int n = 200000;
  double s = 0, s2 = 0, ps = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
    ps += rng.poisson(3.0);
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.015);
  EXPECT_NEAR(ps / n, 3.0, 0.02);
}

TEST(Serialization, AnnotationRoundTrip) {
  const auto sample = synth::make_sample(3, 0, GridSpec::standard(), {}, {});
  const auto path = std::filesystem::temp_directory_path() / "audiogram_ann_roundtrip.json";
  save_annotation(path, sample.annotation);
  const auto back = load_annotation(path);
  EXPECT_EQ(back.level1, sample.annotation.level1);
  EXPECT_EQ(back.level2, sample.annotation.level2);
  EXPECT_EQ(back.level4, sample.annotation.level4);
  ASSERT_EQ(back.level3.size(), sample.annotation.level3.size());
  EXPECT_TRUE(back.true_homography.matrix().isApprox(sample.annotation.true_homography.matrix()));
  std::filesystem::remove(path);
}

TEST(Serialization, MalformedDetectionsAreSchemaErrors) {
  EXPECT_THROW(json_io::detections(Json::parse(R"([{"class": "nope", "bbox": [0,0,1,1]}])")),
               SchemaError);
  EXPECT_THROW(json_io::detections(Json::parse(R"([{"class": "mark_left", "bbox": [3,0,1,1]}])")),
               SchemaError);
}

TEST(PngIo, RoundTripIsLossless) {
  GrayImage img(37, 21);
  Rng rng(1);
  for (auto& p : img.pixels()) p = std::uint8_t(rng.index(256));
  const auto path = std::filesystem::temp_directory_path() / "audiogram_png_roundtrip.png";
  write_png(path, img);
  EXPECT_EQ(read_png(path), img);
  std::filesystem::remove(path);
  EXPECT_THROW(read_png("/nonexistent/file.png"), IoError);
}
