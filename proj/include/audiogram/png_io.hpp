#pragma once

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "audiogram/errors.hpp"
#include "audiogram/image.hpp"

namespace audiogram {

// Writes an 8-bit grayscale PNG. Output bytes depend only on the pixels.
template <typename Tag>
void write_png(const std::filesystem::path& path, const ImageT<Tag>& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(img.width());
  image.height = png_uint_32(img.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels().data(), 0,
                               nullptr)) {
    throw IoError("failed writing PNG '" + path.string() + "': " + image.message);
  }
}

// Reads any PNG and converts it to 8-bit luminance.
inline GrayImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("failed decoding PNG '" + path.string() + "': " + image.message);
  }
  return GrayImage(int(image.width), int(image.height), std::move(buffer));
}

}  // namespace audiogram
