#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "fontid/error.hpp"
#include "fontid/image.hpp"

namespace fontid {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint8_t luma(double r, double g, double b) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(0.299 * r + 0.587 * g + 0.114 * b), 0L, 255L));
}

// PNG/TIFF bytes -> 8-bit gray. RGB(A) goes through the 0.299/0.587/0.114
// luma with round-to-nearest; alpha is ignored; 16-bit samples keep the high byte.
inline GrayImage decode_image(const std::vector<std::uint8_t>& bytes, const std::string& name = "image") {
  if (bytes.empty()) throw Error(Errc::invalid_image, name + ": empty file");
  cv::Mat raw;
  try {
    raw = cv::imdecode(cv::Mat(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data())),
                       cv::IMREAD_UNCHANGED | cv::IMREAD_IGNORE_ORIENTATION);
  } catch (const cv::Exception& e) {
    throw Error(Errc::invalid_image, name + ": " + e.what());
  }
  if (raw.empty()) throw Error(Errc::invalid_image, name + ": not a decodable PNG/TIFF image");
  if (raw.depth() == CV_16U) raw.convertTo(raw, CV_8U, 1.0 / 256.0);
  if (raw.depth() != CV_8U) throw Error(Errc::invalid_image, name + ": unsupported sample depth");

  const int w = raw.cols;
  const int h = raw.rows;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  const int ch = raw.channels();
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = raw.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* p = row + static_cast<std::ptrdiff_t>(x) * ch;
      std::uint8_t v = 0;
      if (ch == 1 || ch == 2) v = p[0];
      else v = luma(p[2], p[1], p[0]);  // OpenCV order is BGR(A)
      px[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] = v;
    }
  }
  return GrayImage(w, h, std::move(px));
}

inline GrayImage load_image(const std::string& path) { return decode_image(read_file_bytes(path), path); }

inline std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  require_nonempty(img, "encode_png");
  cv::Mat mat(img.height(), img.width(), CV_8UC1, const_cast<std::uint8_t*>(img.pixels().data()));
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", mat, out)) throw Error(Errc::io, "PNG encoding failed");
  return out;
}

inline void save_png(const GrayImage& img, const std::string& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace fontid
