#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "fontid/image.hpp"
#include "fontid/random.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("fontid_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline fontid::GrayImage random_gray(fontid::Rng& rng, int w, int h) {
  fontid::GrayImage img(w, h);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(fontid::uniform_index(rng, 256));
  return img;
}

// Black ink on white paper.
inline fontid::GrayImage fill_rect(fontid::GrayImage img, int x0, int y0, int w, int h, std::uint8_t value = 0) {
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) img.at(x, y) = value;
    }
  }
  return img;
}

}  // namespace testing_support
