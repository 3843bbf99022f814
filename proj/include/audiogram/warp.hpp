#pragma once

#include "audiogram/errors.hpp"
#include "audiogram/geometry.hpp"
#include "audiogram/image.hpp"

namespace audiogram {

// Warps img by h (source -> destination) into an out_width x out_height
// raster: inverse mapping with bilinear sampling, white outside the source.
inline GrayImage warp_image(const GrayImage& img, const Homography& h, int out_width,
                            int out_height) {
  const Eigen::Matrix3d inv = h.inverse().matrix();
  GrayImage out(out_width, out_height, 255);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Eigen::Vector3d s = inv * Eigen::Vector3d(x, y, 1.0);
      if (!(s.z() > 0.0) && !(s.z() < 0.0)) continue;
      out(x, y) = clamp_u8(sample_bilinear(img, s.x() / s.z(), s.y() / s.z()));
    }
  }
  return out;
}

}  // namespace audiogram
