#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fontid/error.hpp"

namespace fontid {

struct gray_tag {};
struct binary_tag {};

// Row-major 8-bit raster. The tag keeps grayscale and binary images from
// being mixed up at call sites; both store one byte per pixel.
template <typename Kind>
class Image {
 public:
  Image() = default;

  Image(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(Errc::invalid_image, "negative image dimensions");
    }
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  Image(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 0 || height < 0 ||
        pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(Errc::invalid_image, "pixel buffer does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }
  std::size_t size() const noexcept { return pixels_.size(); }

  std::uint8_t& at(int x, int y) {
    return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
  }
  std::uint8_t at(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
  }

  // Edge-replicated read.
  std::uint8_t clamped(int x, int y) const {
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& pixels() noexcept { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

using GrayImage = Image<gray_tag>;
using BinaryImage = Image<binary_tag>;  // 1 = ink, 0 = background

template <typename Kind>
void require_nonempty(const Image<Kind>& img, const char* what) {
  if (img.empty()) {
    throw Error(Errc::invalid_image, std::string(what) + ": image has a zero dimension");
  }
}

inline std::size_t count_foreground(const BinaryImage& img) {
  return static_cast<std::size_t>(std::count(img.pixels().begin(), img.pixels().end(), std::uint8_t{1}));
}

}  // namespace fontid
