#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "audiogram/errors.hpp"

namespace audiogram {

// Pixel coordinates. Pixel (col, row) has its center at (col, row).
struct Point {
  double x = 0.0;
  double y = 0.0;

  Point operator+(const Point& o) const { return {x + o.x, y + o.y}; }
  Point operator-(const Point& o) const { return {x - o.x, y - o.y}; }
  Point operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Point&) const = default;

  double dot(const Point& o) const { return x * o.x + y * o.y; }
  double cross(const Point& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  Eigen::Vector3d homogeneous() const { return {x, y, 1.0}; }
};

inline double distance(const Point& a, const Point& b) { return (a - b).norm(); }

// Homogeneous 2D point; w == 0 is an ideal point (a direction).
using HPoint = Eigen::Vector3d;

inline HPoint ideal_point(double dx, double dy) { return {dx, dy, 0.0}; }

// True when the point is at infinity relative to the given pixel scale.
inline bool is_ideal(const HPoint& p, double scale = 1e6) {
  return std::abs(p.z()) * scale <= p.head<2>().norm();
}

inline Point to_point(const HPoint& p) {
  if (p.z() == 0.0) throw DegenerateError("ideal point has no finite coordinates");
  return {p.x() / p.z(), p.y() / p.z()};
}

struct LineSegment {
  Point p1;
  Point p2;

  double length() const { return distance(p1, p2); }
  Point midpoint() const { return {(p1.x + p2.x) / 2, (p1.y + p2.y) / 2}; }
  Point direction() const {
    const double len = length();
    return {(p2.x - p1.x) / len, (p2.y - p1.y) / len};
  }
  bool operator==(const LineSegment&) const = default;
};

// Homogeneous line a*x + b*y + c = 0, kept with (a, b) unit length.
struct Line {
  Eigen::Vector3d coeffs{0.0, 0.0, 0.0};

  Line() = default;
  explicit Line(const Eigen::Vector3d& v) : coeffs(v) {
    const double n = v.head<2>().norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateError("line vector is degenerate");
    coeffs /= n;
  }

  static Line through(const Point& a, const Point& b) {
    return Line(a.homogeneous().cross(b.homogeneous()));
  }
  static Line through(const LineSegment& s) { return through(s.p1, s.p2); }

  // Line through p along the unit direction d.
  static Line from_point_direction(const Point& p, const Point& d) {
    return through(p, p + d);
  }

  Point normal() const { return {coeffs.x(), coeffs.y()}; }
  Point direction() const { return {-coeffs.y(), coeffs.x()}; }

  double signed_distance(const Point& p) const {
    return coeffs.x() * p.x + coeffs.y() * p.y + coeffs.z();
  }
  double distance(const Point& p) const { return std::abs(signed_distance(p)); }

  Point project(const Point& p) const { return p - normal() * signed_distance(p); }

  HPoint intersect(const Line& other) const { return coeffs.cross(other.coeffs); }
};

// Angle between two undirected directions, in [0, 90] degrees.
inline double undirected_angle_deg(const Point& a, const Point& b) {
  const double c = std::abs(a.dot(b)) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, 0.0, 1.0)) * 180.0 / std::numbers::pi;
}

struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  Point center() const { return {(x_min + x_max) / 2, (y_min + y_max) / 2}; }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  std::array<Point, 4> corners() const {
    return {Point{x_min, y_min}, Point{x_max, y_min}, Point{x_max, y_max}, Point{x_min, y_max}};
  }
  Box translated(double dx, double dy) const {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }
  bool contains(const Box& o) const {
    return o.x_min >= x_min && o.y_min >= y_min && o.x_max <= x_max && o.y_max <= y_max;
  }
  bool contains(const Point& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  bool operator==(const Box&) const = default;

  static Box hull(std::span<const Point> pts) {
    Box b{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
    for (const auto& p : pts) {
      b.x_min = std::min(b.x_min, p.x);
      b.y_min = std::min(b.y_min, p.y);
      b.x_max = std::max(b.x_max, p.x);
      b.y_max = std::max(b.y_max, p.y);
    }
    return b;
  }
};

inline double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return (w > 0 && h > 0) ? w * h : 0.0;
}

inline double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

enum class Provenance { ground_truth, line_detection, quad, identity };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::ground_truth: return "ground_truth";
    case Provenance::line_detection: return "line_detection";
    case Provenance::quad: return "quad";
    case Provenance::identity: return "identity";
  }
  return "identity";
}

inline Provenance provenance_from_string(std::string_view s) {
  if (s == "ground_truth") return Provenance::ground_truth;
  if (s == "line_detection") return Provenance::line_detection;
  if (s == "quad") return Provenance::quad;
  if (s == "identity") return Provenance::identity;
  throw SchemaError("unknown homography provenance '" + std::string(s) + "'");
}

// Invertible projective transform of the image plane.
class Homography {
 public:
  Homography() = default;

  explicit Homography(const Eigen::Matrix3d& m, Provenance provenance = Provenance::identity)
      : matrix_(m), provenance_(provenance) {
    if (!m.allFinite()) throw DegenerateError("homography has non-finite entries");
    // Pixel-space homographies mix entries of order 1e-3 and 1e5, so the
    // test is on the singular-value ratio rather than the raw determinant.
    const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(m).singularValues();
    if (!(sv(0) > 0.0) || sv(2) / sv(0) <= 1e-12) {
      throw DegenerateError("homography is singular");
    }
  }

  static Homography identity() { return Homography(); }

  static Homography translation(double dx, double dy,
                                Provenance provenance = Provenance::identity) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 2) = dx;
    m(1, 2) = dy;
    return Homography(m, provenance);
  }

  static Homography scaling(double sx, double sy, Provenance provenance = Provenance::identity) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 0) = sx;
    m(1, 1) = sy;
    return Homography(m, provenance);
  }

  const Eigen::Matrix3d& matrix() const { return matrix_; }
  Provenance provenance() const { return provenance_; }

  Homography inverse() const { return Homography(matrix_.inverse(), provenance_); }

  // Scaled so the largest-magnitude entry is 1 with a positive sign on m(2,2)
  // when it is nonzero.
  Eigen::Matrix3d normalized() const {
    Eigen::Matrix3d m = matrix_ / matrix_.cwiseAbs().maxCoeff();
    if (m(2, 2) < 0) m = -m;
    return m;
  }

  Homography with_provenance(Provenance p) const { return Homography(matrix_, p); }

  // (a * b) applies b first.
  friend Homography operator*(const Homography& a, const Homography& b) {
    return Homography(a.matrix_ * b.matrix_, a.provenance_);
  }

 private:
  Eigen::Matrix3d matrix_ = Eigen::Matrix3d::Identity();
  Provenance provenance_ = Provenance::identity;
};

// Ideal results are returned with unit-length (x, y); finite ones with w = 1.
inline HPoint apply_homography(const Homography& h, const HPoint& p) {
  HPoint q = h.matrix() * p;
  if (q.isZero(0.0) || !q.allFinite()) throw DegenerateError("homography maps point to zero");
  if (q.z() != 0.0 && !is_ideal(q, 1e12)) return q / q.z();
  const double n = q.head<2>().norm();
  if (n == 0.0) throw DegenerateError("homography maps point to zero");
  return {q.x() / n, q.y() / n, q.z() / n};
}

inline Point apply_homography(const Homography& h, const Point& p) {
  const HPoint q = apply_homography(h, p.homogeneous());
  if (q.z() != 1.0) throw DegenerateError("finite point maps to infinity");
  return {q.x(), q.y()};
}

inline Box apply_homography(const Homography& h, const Box& b) {
  std::array<Point, 4> mapped;
  const auto corners = b.corners();
  for (std::size_t i = 0; i < 4; ++i) mapped[i] = apply_homography(h, corners[i]);
  return Box::hull(mapped);
}

// Twice the signed area of triangle abc.
inline double orient(const Point& a, const Point& b, const Point& c) {
  return (b - a).cross(c - a);
}

namespace detail {

inline void require_no_collinear_triple(std::span<const Point, 4> pts, const char* which) {
  double scale = 0.0;
  for (const auto& p : pts)
    for (const auto& q : pts) scale = std::max(scale, distance(p, q));
  if (!(scale > 0.0)) throw DegenerateError(std::string(which) + " points coincide");
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (std::abs(orient(pts[i], pts[j], pts[k])) <= 1e-9 * scale * scale)
          throw DegenerateError(std::string(which) + " points contain a collinear triple");
}

// Similarity taking the points to zero centroid and mean distance sqrt(2).
inline Eigen::Matrix3d normalizing_transform(std::span<const Point, 4> pts) {
  Point c{};
  for (const auto& p : pts) c = c + p;
  c = c * 0.25;
  double mean = 0.0;
  for (const auto& p : pts) mean += distance(p, c);
  mean /= 4.0;
  const double s = std::sqrt(2.0) / mean;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x, 0, s, -s * c.y, 0, 0, 1;
  return t;
}

}  // namespace detail

// Exact four-point homography from the 8x8 linear system with h33 = 1,
// solved in normalized coordinates.
inline Homography homography_from_correspondences(std::span<const Point, 4> src,
                                                  std::span<const Point, 4> dst,
                                                  Provenance provenance = Provenance::identity) {
  detail::require_no_collinear_triple(src, "source");
  detail::require_no_collinear_triple(dst, "destination");
  const Eigen::Matrix3d ts = detail::normalizing_transform(src);
  const Eigen::Matrix3d td = detail::normalizing_transform(dst);

  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d s = ts * src[i].homogeneous();
    const Eigen::Vector3d d = td * dst[i].homogeneous();
    const double x = s.x(), y = s.y(), u = d.x(), v = d.y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  const Eigen::Matrix3d m = td.inverse() * hn * ts;
  return Homography(m / m.cwiseAbs().maxCoeff(), provenance);
}

inline Homography homography_from_correspondences(const std::array<Point, 4>& src,
                                                  const std::array<Point, 4>& dst,
                                                  Provenance provenance = Provenance::identity) {
  return homography_from_correspondences(std::span<const Point, 4>(src),
                                         std::span<const Point, 4>(dst), provenance);
}

}  // namespace audiogram
