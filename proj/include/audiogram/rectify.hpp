#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "audiogram/errors.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/image.hpp"
#include "audiogram/imgproc.hpp"
#include "audiogram/random.hpp"
#include "audiogram/warp.hpp"

namespace audiogram::rectify {

using audiogram::warp_image;

inline Point vertex_centroid(std::span<const Point> pts) {
  Point c;
  for (const auto& p : pts) c = c + p;
  return c * (1.0 / double(pts.size()));
}

inline Line fit_line_tls(std::span<const Point> pts) {
  const Point c = vertex_centroid(pts);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector2d d(p.x - c.x, p.y - c.y);
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const Eigen::Vector2d dir = es.eigenvectors().col(1);
  return Line::from_point_direction(c, {dir.x(), dir.y()});
}

// Refits each segment to the foreground pixels within `halfwidth` of it.
// Hough chords can sit aslant inside a stroke a few pixels thick; the band
// fit recovers the stroke's center line.
inline std::vector<LineSegment> refine_segments(const BinaryImage& bin, std::vector<LineSegment> segments,
                                                double halfwidth, int passes = 2) {
  for (auto& s : segments) {
    for (int pass = 0; pass < passes; ++pass) {
      const double len = s.length();
      if (!(len > 0)) break;
      const Point d = s.direction(), n{-d.y, d.x};
      const int x0 = std::max(0, int(std::floor(std::min(s.p1.x, s.p2.x) - halfwidth)));
      const int x1 = std::min(bin.width() - 1, int(std::ceil(std::max(s.p1.x, s.p2.x) + halfwidth)));
      const int y0 = std::max(0, int(std::floor(std::min(s.p1.y, s.p2.y) - halfwidth)));
      const int y1 = std::min(bin.height() - 1, int(std::ceil(std::max(s.p1.y, s.p2.y) + halfwidth)));
      std::vector<Point> band;
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          if (!bin(x, y)) continue;
          const Point r = Point{double(x), double(y)} - s.p1;
          const double t = r.dot(d);
          if (t >= 0 && t <= len && std::abs(r.dot(n)) <= halfwidth) band.push_back({double(x), double(y)});
        }
      if (band.size() < 10) break;
      const Line l = fit_line_tls(band);
      s = {l.project(s.p1), l.project(s.p2)};
    }
  }
  return segments;
}

inline constexpr double default_vote_angle_deg = 5.0;

// Direction from the segment midpoint towards vp; for an ideal vp this is
// the vp's own direction.
inline Point direction_to(const HPoint& vp, const Point& from) {
  return {vp.x() - from.x * vp.z(), vp.y() - from.y * vp.z()};
}

inline double vote(const LineSegment& s, const HPoint& vp,
                   double max_angle_deg = default_vote_angle_deg) {
  const double len = s.length();
  if (!(len > 0)) return 0.0;
  const Point d = direction_to(vp, s.midpoint());
  if (d.norm() <= 1e-12 * std::max(1.0, vp.norm())) return 0.0;
  const double angle = undirected_angle_deg(s.p2 - s.p1, d);
  return angle < max_angle_deg ? len : 0.0;
}

inline double vote(const LineSegment& s, const Point& vp,
                   double max_angle_deg = default_vote_angle_deg) {
  return vote(s, vp.homogeneous(), max_angle_deg);
}

// Unit vector with a canonical sign: w >= 0, or for ideal points the
// larger-magnitude component positive.
inline HPoint canonical(const HPoint& p) {
  HPoint q = p.normalized();
  const bool flip = q.z() != 0.0 ? q.z() < 0.0
                                 : (std::abs(q.x()) >= std::abs(q.y()) ? q.x() < 0 : q.y() < 0);
  return flip ? HPoint(-q) : q;
}

struct VanishingPointModel {
  HPoint vp{0, 0, 0};
  std::vector<std::size_t> inliers;
  double total_vote = 0.0;
  bool low_support = false;
};

inline void score_model(std::span<const LineSegment> segments, std::span<const std::size_t> pool,
                        VanishingPointModel& m, double max_angle_deg) {
  m.inliers.clear();
  m.total_vote = 0.0;
  for (std::size_t i : pool) {
    const double v = vote(segments[i], m.vp, max_angle_deg);
    if (v > 0) {
      m.inliers.push_back(i);
      m.total_vote += v;
    }
  }
  m.low_support = m.inliers.size() < 3;
}

namespace detail {

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace detail

// RANSAC over segment pairs drawn from `pool` (indices into segments).
inline VanishingPointModel ransac_vanishing_point(std::span<const LineSegment> segments,
                                                  std::span<const std::size_t> pool,
                                                  int iterations, std::uint64_t seed,
                                                  double max_angle_deg = default_vote_angle_deg) {
  if (pool.size() < 2) throw InsufficientDataError("vanishing point needs at least 2 segments");
  if (iterations < 1) throw ParameterError("iterations must be >= 1");
  Rng rng(seed);
  VanishingPointModel best;
  bool found = false;
  for (int it = 0; it < iterations; ++it) {
    const std::size_t a = std::size_t(rng.index(pool.size()));
    std::size_t b = std::size_t(rng.index(pool.size() - 1));
    if (b >= a) ++b;
    const HPoint x = Line::through(segments[pool[a]]).coeffs.cross(Line::through(segments[pool[b]]).coeffs);
    if (x.isZero(1e-12)) continue;  // same supporting line
    VanishingPointModel m;
    m.vp = canonical(x);
    score_model(segments, pool, m, max_angle_deg);
    if (!found || m.total_vote > best.total_vote) {
      best = std::move(m);
      found = true;
    }
  }
  if (!found) throw InsufficientDataError("all sampled segment pairs were collinear");
  return best;
}

inline VanishingPointModel ransac_vanishing_point(std::span<const LineSegment> segments,
                                                  int iterations, std::uint64_t seed,
                                                  double max_angle_deg = default_vote_angle_deg) {
  const auto pool = detail::all_indices(segments.size());
  return ransac_vanishing_point(segments, pool, iterations, seed, max_angle_deg);
}

// Length-weighted least-squares vanishing point of the given segments: the
// point minimizing the sum of weighted squared (normalized) incidences, in
// coordinates centered on `center` and scaled by `scale`.
inline HPoint fit_vanishing_point(std::span<const LineSegment> segments,
                                  std::span<const std::size_t> idx, Point center, double scale) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  for (std::size_t i : idx) {
    const auto& s = segments[i];
    const Point a = (s.p1 - center) * (1.0 / scale), b = (s.p2 - center) * (1.0 / scale);
    Eigen::Vector3d l = a.homogeneous().cross(b.homogeneous());
    const double n = l.head<2>().norm();
    if (!(n > 0)) continue;
    l /= n;
    m += s.length() * l * l.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  const Eigen::Vector3d v = es.eigenvectors().col(0);
  // Undo the normalization: x = scale * x' + center * w'.
  return canonical(HPoint(scale * v.x() + center.x * v.z(), scale * v.y() + center.y * v.z(), v.z()));
}

// Alternates least-squares refitting and inlier re-selection. Keeps the
// RANSAC model if refinement loses support.
inline VanishingPointModel refine_vanishing_point(std::span<const LineSegment> segments,
                                                  std::span<const std::size_t> pool,
                                                  const VanishingPointModel& initial, Point center,
                                                  double scale,
                                                  double max_angle_deg = default_vote_angle_deg,
                                                  int rounds = 3) {
  VanishingPointModel cur = initial;
  for (int r = 0; r < rounds && cur.inliers.size() >= 2; ++r) {
    VanishingPointModel next;
    next.vp = fit_vanishing_point(segments, cur.inliers, center, scale);
    score_model(segments, pool, next, max_angle_deg);
    if (next.total_vote < 0.95 * initial.total_vote) break;
    const bool same = next.inliers == cur.inliers;
    cur = std::move(next);
    if (same) break;
  }
  return cur;
}

// Angle in degrees, modulo 180, between the directions of two (possibly
// ideal) points seen from `center`.
inline double angular_error_deg(const HPoint& a, const HPoint& b, Point center) {
  return undirected_angle_deg(direction_to(a, center), direction_to(b, center));
}

// Maps v1 to the ideal point on +x and v2 to the ideal point on +y. The
// vanishing line goes to infinity and the map is the identity to first
// order at `center`, up to an affine correction that makes the rectified
// directions orthogonal; each axis keeps unit stretch at the center.
inline Homography homography_from_vanishing_points(const HPoint& v1, const HPoint& v2,
                                                   Point center, double min_separation_deg = 15.0) {
  const Eigen::Matrix3d to_center = Homography::translation(-center.x, -center.y).matrix();
  const Eigen::Vector3d c1 = to_center * v1, c2 = to_center * v2;
  if (c1.head<2>().norm() == 0 || c2.head<2>().norm() == 0)
    throw DegenerateError("vanishing point coincides with the image center");
  const double sep = undirected_angle_deg({c1.x(), c1.y()}, {c2.x(), c2.y()});
  if (!(sep >= min_separation_deg))
    throw DegenerateError("vanishing points are too close in direction");

  Eigen::Vector3d l = c1.normalized().cross(c2.normalized());
  Eigen::Matrix3d proj = Eigen::Matrix3d::Identity();
  if (l.head<2>().norm() > 1e-12 * std::abs(l.z())) {
    if (std::abs(l.z()) < 1e-12 * l.head<2>().norm())
      throw DegenerateError("vanishing line passes through the image center");
    proj(2, 0) = l.x() / l.z();
    proj(2, 1) = l.y() / l.z();
  }
  auto unit_dir = [&](const Eigen::Vector3d& c) {
    const Eigen::Vector3d q = proj * c;
    Eigen::Vector2d d = q.head<2>().normalized();
    if (std::abs(d.x()) >= std::abs(d.y()) ? d.x() < 0 : d.y() < 0) d = -d;
    return d;
  };
  Eigen::Matrix2d basis;
  basis.col(0) = unit_dir(c1);
  basis.col(1) = unit_dir(c2);
  Eigen::Matrix3d affine = Eigen::Matrix3d::Identity();
  affine.topLeftCorner<2, 2>() = basis.inverse();
  const Eigen::Matrix3d from_center = Homography::translation(center.x, center.y).matrix();
  const Eigen::Matrix3d m = from_center * affine * proj * to_center;
  return Homography(m / m(2, 2), Provenance::line_detection);
}

inline Homography homography_from_vanishing_points(const Point& v1, const Point& v2, Point center) {
  return homography_from_vanishing_points(v1.homogeneous(), v2.homogeneous(), center);
}

struct LineRectificationParams {
  imgproc::BinarizeParams binarize;
  imgproc::HoughParams hough;
  int iterations = 500;
  std::uint64_t seed = 0;
  double vote_angle_deg = default_vote_angle_deg;
  double min_support = 0.5;   // share of total segment length voting for either vp
  double refine_halfwidth = 3.0;  // band for refitting segments; 0 disables
};

struct LineRectification {
  Homography homography;
  std::vector<LineSegment> segments;
  VanishingPointModel x_model;  // vp of the horizontal family
  VanishingPointModel y_model;
  double support = 0.0;
};

// Mean angle of a family's segments from horizontal, in degrees.
inline double mean_angle_from_horizontal(std::span<const LineSegment> segments,
                                         std::span<const std::size_t> idx) {
  double sum = 0;
  for (std::size_t i : idx) sum += undirected_angle_deg(segments[i].p2 - segments[i].p1, {1, 0});
  return idx.empty() ? 90.0 : sum / double(idx.size());
}

// Rectifies from two vanishing points found in an existing segment set.
inline LineRectification rectification_from_segments(std::vector<LineSegment> segments, Point center,
                                                     double scale,
                                                     const LineRectificationParams& p) {
  if (segments.size() < 4) throw RectificationFailed("too few line segments for two vanishing points");
  LineRectification out;
  out.segments = std::move(segments);
  const std::span<const LineSegment> segs(out.segments);
  const auto pool = detail::all_indices(segs.size());

  VanishingPointModel first;
  try {
    first = ransac_vanishing_point(segs, pool, p.iterations, derive_seed(p.seed, 1), p.vote_angle_deg);
  } catch (const InsufficientDataError& e) {
    throw RectificationFailed(std::string("first vanishing point: ") + e.what());
  }
  first = refine_vanishing_point(segs, pool, first, center, scale, p.vote_angle_deg);
  if (first.low_support) throw RectificationFailed("first vanishing point has fewer than 3 inliers");

  // All inliers of the first model leave the pool.
  std::vector<std::size_t> rest;
  for (std::size_t i : pool)
    if (!std::binary_search(first.inliers.begin(), first.inliers.end(), i)) rest.push_back(i);
  VanishingPointModel second;
  try {
    second = ransac_vanishing_point(segs, rest, p.iterations, derive_seed(p.seed, 2), p.vote_angle_deg);
  } catch (const InsufficientDataError& e) {
    throw RectificationFailed(std::string("second vanishing point: ") + e.what());
  }
  second = refine_vanishing_point(segs, rest, second, center, scale, p.vote_angle_deg);
  if (second.low_support) throw RectificationFailed("second vanishing point has fewer than 3 inliers");

  double total = 0;
  for (const auto& s : segs) total += s.length();
  out.support = (first.total_vote + second.total_vote) / total;
  if (out.support < p.min_support)
    throw RectificationFailed("vanishing points explain too little of the detected line length");

  const bool first_is_x = mean_angle_from_horizontal(segs, first.inliers) <=
                          mean_angle_from_horizontal(segs, second.inliers);
  out.x_model = first_is_x ? first : second;
  out.y_model = first_is_x ? second : first;
  try {
    out.homography = homography_from_vanishing_points(out.x_model.vp, out.y_model.vp, center);
  } catch (const DegenerateError& e) {
    throw RectificationFailed(e.what());
  }
  return out;
}

inline LineRectification estimate_rectification_detailed(const GrayImage& img,
                                                         const LineRectificationParams& p = {}) {
  if (img.empty()) throw RectificationFailed("empty image");
  const BinaryImage bin = imgproc::binarize(img, p.binarize);
  auto segments = imgproc::hough_segments(bin, p.hough);
  if (p.refine_halfwidth > 0) segments = refine_segments(bin, std::move(segments), p.refine_halfwidth);
  const Point center{(img.width() - 1) / 2.0, (img.height() - 1) / 2.0};
  return rectification_from_segments(std::move(segments), center,
                                     double(std::max(img.width(), img.height())), p);
}

inline Homography estimate_rectification_from_lines(const GrayImage& img,
                                                    const imgproc::HoughParams& hough,
                                                    int iterations, std::uint64_t seed) {
  LineRectificationParams p;
  p.hough = hough;
  p.iterations = iterations;
  p.seed = seed;
  return estimate_rectification_detailed(img, p).homography;
}

// ---- Polygon path ----

inline double perimeter(std::span<const Point> poly) {
  double sum = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) sum += distance(poly[i], poly[(i + 1) % poly.size()]);
  return sum;
}

// Twice the signed area (positive for ascending-atan2 order in image axes).
inline double signed_area2(std::span<const Point> poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) a += poly[i].cross(poly[(i + 1) % poly.size()]);
  return a;
}

namespace detail {

inline double segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 == 0) return distance(p, a);
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

// Open-chain simplification of pts[from..to] (indices taken modulo n).
inline void dp_chain(std::span<const Point> pts, std::size_t from, std::size_t to, double eps,
                     std::vector<std::size_t>& keep) {
  const std::size_t n = pts.size();
  const std::size_t span_len = (to + n - from) % n;
  if (span_len < 2) return;
  double best = -1;
  std::size_t best_k = from;
  for (std::size_t k = 1; k < span_len; ++k) {
    const std::size_t i = (from + k) % n;
    const double d = segment_distance(pts[i], pts[from], pts[to]);
    if (d > best) {
      best = d;
      best_k = i;
    }
  }
  if (best > eps) {
    dp_chain(pts, from, best_k, eps, keep);
    keep.push_back(best_k);
    dp_chain(pts, best_k, to, eps, keep);
  }
}

}  // namespace detail

// Closed-polygon Douglas-Peucker. Returns indices of kept vertices in order.
inline std::vector<std::size_t> douglas_peucker_indices(std::span<const Point> poly, double eps) {
  const std::size_t n = poly.size();
  if (n < 3) throw ParameterError("douglas_peucker needs at least 3 vertices");
  if (!(eps >= 0)) throw ParameterError("douglas_peucker epsilon must be >= 0");
  if (n == 3) return {0, 1, 2};
  std::size_t far = 1;
  for (std::size_t i = 1; i < n; ++i)
    if (distance(poly[i], poly[0]) > distance(poly[far], poly[0])) far = i;
  std::vector<std::size_t> keep{0};
  detail::dp_chain(poly, 0, far, eps, keep);
  keep.push_back(far);
  detail::dp_chain(poly, far, 0, eps, keep);
  if (keep.size() < 3) {
    // Both chains collapsed; keep the farthest vertex from the chord too.
    double best = -1;
    std::size_t best_i = 1;
    for (std::size_t i = 1; i < n; ++i) {
      if (i == far) continue;
      const double d = detail::segment_distance(poly[i], poly[0], poly[far]);
      if (d > best) {
        best = d;
        best_i = i;
      }
    }
    keep.push_back(best_i);
    std::sort(keep.begin(), keep.end());
  }
  return keep;
}

inline std::vector<Point> douglas_peucker(std::span<const Point> poly, double eps) {
  std::vector<Point> out;
  for (std::size_t i : douglas_peucker_indices(poly, eps)) out.push_back(poly[i]);
  return out;
}

struct Quadrilateral {
  std::array<Point, 4> corners;  // ascending atan2 about the centroid
  bool convex = true;
};

inline bool is_convex(std::span<const Point> q) {
  const std::size_t n = q.size();
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double o = orient(q[i], q[(i + 1) % n], q[(i + 2) % n]);
    const int s = o > 0 ? 1 : (o < 0 ? -1 : 0);
    if (s == 0) return false;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

inline std::array<Point, 4> order_ccw(std::array<Point, 4> pts) {
  const Point c = vertex_centroid(pts);
  std::sort(pts.begin(), pts.end(), [&](const Point& a, const Point& b) {
    return std::atan2(a.y - c.y, a.x - c.x) < std::atan2(b.y - c.y, b.x - c.x);
  });
  return pts;
}

struct QuadParams {
  double simplify_fraction = 0.005;   // DP epsilon as a share of the perimeter
  double proximity_fraction = 0.01;   // edge-removal distance as a share of the perimeter
  double refit_inlier_px = 1.0;       // second-pass residual cutoff for side refits
};

// Four dominant sides, intersected. Each side's line is refit by total least
// squares to the original vertices the simplified edge spans, so corners
// are not pulled onto rounded arcs.
inline Quadrilateral approx_quadrilateral(std::span<const Point> poly, const QuadParams& p = {}) {
  const std::size_t n = poly.size();
  if (n < 4) throw ApproximationFailed("polygon needs at least 4 vertices");
  const double per = perimeter(poly);
  if (!(per > 0)) throw ApproximationFailed("polygon has zero perimeter");
  const auto kept = douglas_peucker_indices(poly, p.simplify_fraction * per);
  const double delta = p.proximity_fraction * per;

  struct Edge {
    std::size_t from, to;  // indices into poly
    bool live = true;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < kept.size(); ++i) edges.push_back({kept[i], kept[(i + 1) % kept.size()]});

  std::vector<Line> lines;
  for (int round = 0; round < 4; ++round) {
    Edge* best = nullptr;
    for (auto& e : edges)
      if (e.live && (!best || distance(poly[e.from], poly[e.to]) > distance(poly[best->from], poly[best->to])))
        best = &e;
    if (!best) throw ApproximationFailed("fewer than 4 sides found");

    std::vector<Point> support;
    for (std::size_t i = best->from;; i = (i + 1) % n) {
      support.push_back(poly[i]);
      if (i == best->to) break;
    }
    Line line = fit_line_tls(support);
    std::vector<Point> close;
    for (const auto& q : support)
      if (line.distance(q) <= p.refit_inlier_px) close.push_back(q);
    if (close.size() >= 2 && close.size() < support.size()) line = fit_line_tls(close);
    lines.push_back(line);

    for (auto& e : edges)
      if (e.live && line.distance(poly[e.from]) <= delta && line.distance(poly[e.to]) <= delta)
        e.live = false;
    best->live = false;
  }

  const Point c = vertex_centroid(poly);
  struct Candidate {
    Point p;
    double dist;
  };
  std::vector<Candidate> cands;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const HPoint x = lines[std::size_t(i)].intersect(lines[std::size_t(j)]);
      if (is_ideal(x, 1e9))
        cands.push_back({{0, 0}, std::numeric_limits<double>::infinity()});
      else
        cands.push_back({to_point(x), distance(to_point(x), c)});
    }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.dist < b.dist; });
  if (!std::isfinite(cands[3].dist)) throw ApproximationFailed("sides do not form a quadrilateral");
  Quadrilateral q;
  q.corners = order_ccw({cands[0].p, cands[1].p, cands[2].p, cands[3].p});
  q.convex = is_convex(q.corners);
  return q;
}

// Baseline: Douglas-Peucker with epsilon searched until 4 vertices remain.
inline std::array<Point, 4> naive_quadrilateral(std::span<const Point> poly) {
  if (poly.size() < 4) throw ApproximationFailed("polygon needs at least 4 vertices");
  double lo = 0, hi = perimeter(poly);
  std::vector<std::size_t> best;
  for (int it = 0; it < 60; ++it) {
    const double mid = (lo + hi) / 2;
    auto k = douglas_peucker_indices(poly, mid);
    if (k.size() >= 4) {
      best = std::move(k);
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (best.empty()) best = douglas_peucker_indices(poly, 0);
  // Drop the least significant vertices if the search could not land on 4.
  while (best.size() > 4) {
    std::size_t drop = 0;
    double least = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < best.size(); ++i) {
      const auto& a = poly[best[(i + best.size() - 1) % best.size()]];
      const auto& b = poly[best[(i + 1) % best.size()]];
      const double d = detail::segment_distance(poly[best[i]], a, b);
      if (d < least) {
        least = d;
        drop = i;
      }
    }
    best.erase(best.begin() + std::ptrdiff_t(drop));
  }
  return order_ccw({poly[best[0]], poly[best[1]], poly[best[2]], poly[best[3]]});
}

// Rotates corners so the first is the top-left one (smallest x + y).
inline std::array<Point, 4> top_left_first(std::array<Point, 4> q) {
  std::size_t tl = 0;
  for (std::size_t i = 1; i < 4; ++i)
    if (q[i].x + q[i].y < q[tl].x + q[tl].y) tl = i;
  std::rotate(q.begin(), q.begin() + std::ptrdiff_t(tl), q.end());
  return q;
}

// Maps corners in order onto (0,0), (side,0), (side,side), (0,side).
inline Homography rectify_from_quad(const Quadrilateral& quad, double side) {
  if (!(side > 0)) throw ParameterError("square side must be positive");
  const std::array<Point, 4> dst{Point{0, 0}, Point{side, 0}, Point{side, side}, Point{0, side}};
  return homography_from_correspondences(quad.corners, dst).with_provenance(Provenance::quad);
}

// Maps the quad (top-left first) onto an axis-aligned target rectangle.
inline Homography rectify_quad_to_box(const Quadrilateral& quad, const Box& target) {
  return homography_from_correspondences(top_left_first(quad.corners), target.corners())
      .with_provenance(Provenance::quad);
}

namespace detail {

// Distinct line positions along one axis: segment midpoint coordinates
// merged within `merge_px`, weighted by segment length. Clusters with less
// than `min_share` of the strongest cluster's length are dropped.
inline std::vector<double> line_positions(std::vector<std::pair<double, double>> pos_len,
                                          double merge_px = 3.0, double min_share = 0.25) {
  std::sort(pos_len.begin(), pos_len.end());
  std::vector<std::pair<double, double>> clusters;  // (weighted sum, weight)
  double last = -1e300;
  for (const auto& [pos, len] : pos_len) {
    if (clusters.empty() || pos - last > merge_px) clusters.push_back({0, 0});
    clusters.back().first += pos * len;
    clusters.back().second += len;
    last = pos;
  }
  double strongest = 0;
  for (const auto& c : clusters) strongest = std::max(strongest, c.second);
  std::vector<double> out;
  for (const auto& c : clusters)
    if (c.second >= min_share * strongest) out.push_back(c.first / c.second);
  return out;
}

// Spacing of a mostly regular set of sorted positions: the median gap,
// refined over all gaps as multiples of it.
inline std::optional<double> regular_spacing(const std::vector<double>& pos) {
  if (pos.size() < 3) return std::nullopt;
  std::vector<double> gaps;
  for (std::size_t i = 1; i < pos.size(); ++i) gaps.push_back(pos[i] - pos[i - 1]);
  std::vector<double> sorted = gaps;
  std::nth_element(sorted.begin(), sorted.begin() + std::ptrdiff_t(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  double sum = 0, steps = 0;
  for (double g : gaps) {
    const double k = std::round(g / median);
    if (k >= 1 && std::abs(g - k * median) <= 0.2 * median) {
      sum += g;
      steps += k;
    }
  }
  if (steps == 0) return std::nullopt;
  return sum / steps;
}

}  // namespace detail

// After line rectification, maps the evenly spaced gridlines onto spacings
// `column_spacing` and `row_spacing`. Starts from a per-axis rescale, then
// fits a full homography by least squares over the
// segment endpoints at their integer line index. Returns a correction to
// apply after `r.homography`; the caller chooses the final translation.
inline Homography grid_scale_fit(const LineRectification& r, double column_spacing,
                                 double row_spacing) {
  std::vector<std::pair<double, double>> rows, cols;
  for (std::size_t i : r.x_model.inliers) {
    const auto& s = r.segments[i];
    rows.push_back({apply_homography(r.homography, s.midpoint()).y, s.length()});
  }
  for (std::size_t i : r.y_model.inliers) {
    const auto& s = r.segments[i];
    cols.push_back({apply_homography(r.homography, s.midpoint()).x, s.length()});
  }
  const auto row_lines = detail::line_positions(rows), col_lines = detail::line_positions(cols);
  const auto dy = detail::regular_spacing(row_lines);
  const auto dx = detail::regular_spacing(col_lines);
  if (!dx || !dy) throw RectificationFailed("gridline spacing could not be measured");
  const Homography scale =
      Homography::scaling(column_spacing / *dx, row_spacing / *dy, Provenance::line_detection);

  // Endpoint constraints in centered rectified coordinates: a vertical line
  // with index k satisfies a*x + b*y + c = k*column_spacing*(g*x + h*y + 1).
  struct Row {
    Point a;
    bool vertical;
    double target, weight;
  };
  Point c{0, 0};
  double total = 0;
  std::vector<Row> eqs;
  auto add = [&](const std::vector<std::size_t>& idx, bool vertical) {
    const auto& lines = vertical ? col_lines : row_lines;
    const double step = vertical ? *dx : *dy, target_step = vertical ? column_spacing : row_spacing;
    for (std::size_t i : idx) {
      const auto& s = r.segments[i];
      const Point m = apply_homography(r.homography, s.midpoint());
      const double k = std::round(((vertical ? m.x : m.y) - lines.front()) / step);
      for (const Point& e : {s.p1, s.p2}) {
        const Point q = apply_homography(r.homography, e);
        eqs.push_back({q, vertical, k * target_step, s.length()});
        c = c + q * s.length();
        total += s.length();
      }
    }
  };
  add(r.y_model.inliers, true);
  add(r.x_model.inliers, false);
  c = c * (1.0 / total);

  using Vec8 = Eigen::Matrix<double, 8, 1>;
  auto solve = [&](const std::vector<bool>& use) -> std::optional<Vec8> {
    Eigen::Matrix<double, 8, 8> ata = Eigen::Matrix<double, 8, 8>::Zero();
    Vec8 atb = Vec8::Zero();
    int n_v = 0, n_h = 0;
    for (std::size_t i = 0; i < eqs.size(); ++i) {
      if (!use[i]) continue;
      const auto& e = eqs[i];
      const double x = e.a.x - c.x, y = e.a.y - c.y;
      Vec8 row;
      if (e.vertical)
        row << x, y, 1, 0, 0, 0, -e.target * x, -e.target * y;
      else
        row << 0, 0, 0, x, y, 1, -e.target * x, -e.target * y;
      ata += e.weight * row * row.transpose();
      atb += e.weight * e.target * row;
      (e.vertical ? n_v : n_h)++;
    }
    if (n_v < 8 || n_h < 8) return std::nullopt;
    Eigen::LDLT<Eigen::Matrix<double, 8, 8>> ldlt(ata);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
    Vec8 u = ldlt.solve(atb);
    if (!u.allFinite()) return std::nullopt;
    return u;
  };
  auto to_h = [&](const Vec8& u) {
    Eigen::Matrix3d m;
    m << u(0), u(1), u(2), u(3), u(4), u(5), u(6), u(7), 1;
    return Homography(m) * Homography::translation(-c.x, -c.y);
  };
  std::vector<bool> use(eqs.size(), true);
  auto u = solve(use);
  if (!u) return scale;
  const Homography first = to_h(*u);
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    const Point q = apply_homography(first, eqs[i].a);
    use[i] = std::abs((eqs[i].vertical ? q.x : q.y) - eqs[i].target) <= 1.5;
  }
  if (auto refit = solve(use)) u = refit;
  const Homography fit = to_h(*u);
  // Must agree with the plain rescale to within a few percent at the center.
  const Point probe = apply_homography(fit, c + Point{*dx, *dy}) - apply_homography(fit, c);
  if (std::abs(probe.x / column_spacing - 1) > 0.05 || std::abs(probe.y / row_spacing - 1) > 0.05) return scale;
  return fit.with_provenance(Provenance::line_detection);
}

// Subpixel offset of the gridlines from the integer lattice once the crop is
// mapped by `crop_to_frame`, as a length-weighted circular mean per axis.
// Translating by the negated offset puts gridline centers on pixel centers,
// which is where a raster template expects strokes.
inline Point lattice_phase(const LineRectification& r, const Homography& crop_to_frame) {
  auto phase = [&](const std::vector<std::size_t>& idx, bool use_x) {
    double s = 0, c = 0;
    for (std::size_t i : idx) {
      const auto& seg = r.segments[i];
      const Point m = apply_homography(crop_to_frame, seg.midpoint());
      const double a = 2 * std::numbers::pi * (use_x ? m.x : m.y);
      s += seg.length() * std::sin(a);
      c += seg.length() * std::cos(a);
    }
    return s == 0 && c == 0 ? 0.0 : std::atan2(s, c) / (2 * std::numbers::pi);
  };
  return {phase(r.y_model.inliers, true), phase(r.x_model.inliers, false)};
}

}  // namespace audiogram::rectify
