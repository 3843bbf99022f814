#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "audiogram/errors.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/image.hpp"
#include "audiogram/random.hpp"

namespace audiogram::imgproc {

// Half-sample symmetric reflection: ... c b a | a b c ... | c b a ...
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> k(std::size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[std::size_t(i + radius)] = std::exp(-double(i * i) / (2.0 * sigma * sigma));
    sum += k[std::size_t(i + radius)];
  }
  for (auto& w : k) w /= sum;
  return k;
}

// Separable Gaussian blur, radius ceil(3 sigma), reflected borders. The
// symmetric reflection makes the operator mass-preserving before rounding.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian_blur: sigma must be positive");
  const int w = img.width(), h = img.height();
  if (w == 0 || h == 0) return img;
  const auto kernel = gaussian_kernel(sigma);
  const int radius = int(kernel.size() / 2);

  std::vector<double> tmp(std::size_t(w) * std::size_t(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[std::size_t(k + radius)] * img(reflect_index(x + k, w), y);
      tmp[std::size_t(y) * w + x] = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[std::size_t(k + radius)] * tmp[std::size_t(reflect_index(y + k, h)) * w + x];
      out(x, y) = clamp_u8(acc);
    }
  }
  return out;
}

// Foreground iff value < (window mean) - c, with the window mean taken over
// the reflected image through an integral image.
inline BinaryImage adaptive_threshold(const GrayImage& img, int window, double c) {
  if (window < 3 || window % 2 == 0)
    throw ParameterError("adaptive_threshold: window must be odd and >= 3");
  const int w = img.width(), h = img.height();
  BinaryImage out(w, h, 0);
  if (w == 0 || h == 0) return out;
  const int half = window / 2;
  const int pw = w + 2 * half, ph = h + 2 * half;

  // integral[(y) * (pw + 1) + x] = sum of padded pixels above-left of (x, y).
  std::vector<std::int64_t> integral(std::size_t(pw + 1) * std::size_t(ph + 1), 0);
  for (int y = 0; y < ph; ++y) {
    std::int64_t row = 0;
    const int sy = reflect_index(y - half, h);
    for (int x = 0; x < pw; ++x) {
      row += img(reflect_index(x - half, w), sy);
      integral[std::size_t(y + 1) * (pw + 1) + (x + 1)] =
          integral[std::size_t(y) * (pw + 1) + (x + 1)] + row;
    }
  }
  const double area = double(window) * double(window);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Window in padded coordinates spans [x, x + window) x [y, y + window).
      const auto at = [&](int xx, int yy) { return integral[std::size_t(yy) * (pw + 1) + xx]; };
      const std::int64_t sum = at(x + window, y + window) - at(x, y + window) -
                               at(x + window, y) + at(x, y);
      if (double(img(x, y)) * area < double(sum) - c * area) out(x, y) = 255;
    }
  }
  return out;
}

struct BinarizeParams {
  double blur_sigma = 1.5;
  int window = 25;
  double offset = 10.0;
};

inline BinaryImage binarize(const GrayImage& img, const BinarizeParams& p = {}) {
  return adaptive_threshold(gaussian_blur(img, p.blur_sigma), p.window, p.offset);
}

struct HoughParams {
  double rho = 1.0;           // px
  double theta_deg = 1.0;     // degrees
  int threshold = 30;         // votes
  std::optional<double> min_length;  // px; defaults to 0.15 * min(width, height)
  int max_gap = 4;            // px
  int erase_halfwidth = 0;    // extra px erased either side of an accepted segment
  std::uint64_t seed = 0;

  double resolved_min_length(int width, int height) const {
    return min_length ? *min_length : 0.15 * double(std::min(width, height));
  }
};

inline void validate(const HoughParams& p) {
  if (!(p.rho > 0) || !(p.theta_deg > 0) || p.threshold <= 0 || p.max_gap < 0 ||
      p.erase_halfwidth < 0 || (p.min_length && !(*p.min_length > 0)))
    throw ParameterError("hough: parameters must be positive");
}

// Progressive probabilistic Hough transform. Foreground pixels are visited in
// seeded random order; each votes into the (rho, theta) accumulator and, when
// its strongest bin reaches the threshold, the line through it is walked in
// both directions, bridging gaps up to max_gap. Walked pixels leave the pool;
// runs at least min_length long are emitted with their endpoints snapped to
// the total-least-squares line of the walked pixels.
inline std::vector<LineSegment> hough_segments(const BinaryImage& bin, const HoughParams& params) {
  validate(params);
  const int w = bin.width(), h = bin.height();
  std::vector<LineSegment> segments;
  if (w == 0 || h == 0) return segments;

  const int num_angle = int(std::lround(180.0 / params.theta_deg));
  const int num_rho = int(std::lround(((w + h) * 2 + 1) / params.rho));
  const double min_length = params.resolved_min_length(w, h);
  const double theta = params.theta_deg * std::numbers::pi / 180.0;

  std::vector<double> cos_tab(static_cast<std::size_t>(num_angle)), sin_tab(static_cast<std::size_t>(num_angle));
  for (int n = 0; n < num_angle; ++n) {
    cos_tab[std::size_t(n)] = std::cos(n * theta) / params.rho;
    sin_tab[std::size_t(n)] = std::sin(n * theta) / params.rho;
  }
  std::vector<int> accum(std::size_t(num_angle) * std::size_t(num_rho), 0);
  auto rho_index = [&](int x, int y, int n) {
    return int(std::lround(x * cos_tab[std::size_t(n)] + y * sin_tab[std::size_t(n)])) +
           (num_rho - 1) / 2;
  };
  auto vote = [&](int x, int y, int delta) {
    for (int n = 0; n < num_angle; ++n) accum[std::size_t(n) * num_rho + rho_index(x, y, n)] += delta;
  };

  // 1 = available, 0 = consumed or background.
  std::vector<std::uint8_t> mask(std::size_t(w) * std::size_t(h), 0);
  std::vector<std::uint8_t> voted(mask.size(), 0);
  std::vector<std::pair<int, int>> pool;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (bin(x, y)) {
        mask[std::size_t(y) * w + x] = 1;
        pool.emplace_back(x, y);
      }

  Rng rng(params.seed);
  auto consume = [&](int x, int y, bool unvote) {
    const std::size_t i = std::size_t(y) * w + x;
    if (!mask[i]) return;
    mask[i] = 0;
    if (unvote && voted[i]) {
      vote(x, y, -1);
      voted[i] = 0;
    }
  };

  for (std::size_t count = pool.size(); count > 0; --count) {
    const std::size_t pick = std::size_t(rng.index(count));
    const auto [px, py] = pool[pick];
    pool[pick] = pool[count - 1];
    if (!mask[std::size_t(py) * w + px]) continue;

    int best_val = params.threshold - 1, best_n = 0;
    for (int n = 0; n < num_angle; ++n) {
      const int val = ++accum[std::size_t(n) * num_rho + rho_index(px, py, n)];
      if (val > best_val) {
        best_val = val;
        best_n = n;
      }
    }
    voted[std::size_t(py) * w + px] = 1;
    if (best_val < params.threshold) continue;

    // Line direction for normal angle best_n.
    const double dir_x = -std::sin(best_n * theta), dir_y = std::cos(best_n * theta);
    const bool step_x = std::abs(dir_x) > std::abs(dir_y);
    const double sx = step_x ? (dir_x > 0 ? 1.0 : -1.0) : dir_x / std::abs(dir_y);
    const double sy = step_x ? dir_y / std::abs(dir_x) : (dir_y > 0 ? 1.0 : -1.0);

    auto pixel_at = [&](int k) {
      const double fx = px + k * sx, fy = py + k * sy;
      return std::pair<int, int>{int(std::floor(fx + 0.5)), int(std::floor(fy + 0.5))};
    };

    int end_k[2] = {0, 0};
    double sum_x = 0, sum_y = 0, sum_xx = 0, sum_yy = 0, sum_xy = 0;
    int n_on = 0;
    for (int side = 0; side < 2; ++side) {
      const int dk = side == 0 ? 1 : -1;
      int gap = 0;
      for (int k = dk;; k += dk) {
        const auto [x, y] = pixel_at(k);
        if (x < 0 || y < 0 || x >= w || y >= h) break;
        if (mask[std::size_t(y) * w + x]) {
          gap = 0;
          end_k[side] = k;
        } else if (++gap > params.max_gap) {
          break;
        }
      }
    }
    const auto [x1, y1] = pixel_at(end_k[1]);
    const auto [x2, y2] = pixel_at(end_k[0]);
    const bool good = std::hypot(double(x2 - x1), double(y2 - y1)) >= min_length;

    // Second pass: consume the run (and its band when accepted).
    for (int k = end_k[1]; k <= end_k[0]; ++k) {
      const auto [x, y] = pixel_at(k);
      if (mask[std::size_t(y) * w + x]) {
        sum_x += x;
        sum_y += y;
        sum_xx += double(x) * x;
        sum_yy += double(y) * y;
        sum_xy += double(x) * y;
        ++n_on;
      }
      consume(x, y, good);
      if (good) {
        for (int o = 1; o <= params.erase_halfwidth; ++o) {
          const int ox = step_x ? 0 : o, oy = step_x ? o : 0;
          for (int s : {-1, 1}) {
            const int nx = x + s * ox, ny = y + s * oy;
            if (nx >= 0 && ny >= 0 && nx < w && ny < h) consume(nx, ny, true);
          }
        }
      }
    }
    if (!good) continue;

    Point a{double(x1), double(y1)}, b{double(x2), double(y2)};
    if (n_on >= 2) {
      const double mx = sum_x / n_on, my = sum_y / n_on;
      Eigen::Matrix2d cov;
      cov << sum_xx / n_on - mx * mx, sum_xy / n_on - mx * my, sum_xy / n_on - mx * my,
          sum_yy / n_on - my * my;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
      const Eigen::Vector2d d = es.eigenvectors().col(1);
      const Line fitted = Line::from_point_direction({mx, my}, {d.x(), d.y()});
      a = fitted.project(a);
      b = fitted.project(b);
    }
    if (distance(a, b) > 0) segments.push_back({a, b});
  }
  return segments;
}

}  // namespace audiogram::imgproc
