#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <vector>

#include "fontid/error.hpp"
#include "fontid/image.hpp"

namespace fontid {

struct DetectedLine {
  double rho = 0.0;    // signed distance from the origin (top-left pixel), px
  double theta = 0.0;  // normal angle in degrees, [0, 180)
  int votes = 0;
};

struct PreprocessParams {
  int target_height = 400;
  int median_window = 3;
  double deskew_max_angle = 15.0;
  double deskew_step = 0.25;
};

struct DeskewResult {
  GrayImage image;
  double angle = 0.0;  // rotation applied to straighten the input, degrees
};

namespace detail {

inline double deg2rad(double degrees) { return degrees * std::numbers::pi / 180.0; }

inline std::uint8_t to_pixel(double value) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(value), 0, 255));
}

// Separable convolution with edge replication.
inline std::vector<double> convolve_separable(const std::vector<double>& src, int width, int height,
                                              const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(src.size());
  std::vector<double> out(src.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int xx = std::clamp(x + k, 0, width - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] * src[static_cast<std::size_t>(y) * width + xx];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int yy = std::clamp(y + k, 0, height - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(yy) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

inline double bilinear(const GrayImage& img, double fx, double fy) {
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double tx = fx - x0;
  const double ty = fy - y0;
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double top = (1.0 - tx) * img.at(x0, y0) + tx * img.at(x1, y0);
  const double bottom = (1.0 - tx) * img.at(x0, y1) + tx * img.at(x1, y1);
  return (1.0 - ty) * top + ty * bottom;
}

}  // namespace detail

// Bilinear resize to `target_height`, keeping the aspect ratio.
inline GrayImage normalize_height(const GrayImage& img, int target_height = 400) {
  require_nonempty(img, "normalize_height");
  if (target_height <= 0) throw Error(Errc::parameter, "normalize_height: target height must be positive");
  const int out_h = target_height;
  const int out_w = std::max(1, static_cast<int>(std::lround(static_cast<double>(img.width()) * out_h / img.height())));
  const double sx = static_cast<double>(img.width()) / out_w;
  const double sy = static_cast<double>(img.height()) / out_h;

  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
      out.at(x, y) = detail::to_pixel(detail::bilinear(img, fx, fy));
    }
  }
  return out;
}

inline GrayImage median_filter(const GrayImage& img, int window = 3) {
  if (window < 1 || window % 2 == 0) {
    throw Error(Errc::parameter, "median_filter: window must be odd and >= 1, got " + std::to_string(window));
  }
  require_nonempty(img, "median_filter");
  const int r = window / 2;
  GrayImage out(img.width(), img.height());
  std::vector<std::uint8_t> neighborhood(static_cast<std::size_t>(window) * window);
  const auto mid = neighborhood.begin() + static_cast<std::ptrdiff_t>(neighborhood.size() / 2);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::size_t n = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) neighborhood[n++] = img.clamped(x + dx, y + dy);
      }
      std::nth_element(neighborhood.begin(), mid, neighborhood.end());
      out.at(x, y) = *mid;
    }
  }
  return out;
}

// Otsu's global threshold. Pixels strictly darker than the threshold are ink.
// Images with a single intensity have no split and come back all background.
inline BinaryImage binarize(const GrayImage& img) {
  require_nonempty(img, "binarize");
  std::array<long long, 256> hist{};
  for (auto v : img.pixels()) ++hist[v];
  const long long total = static_cast<long long>(img.size());
  long long total_sum = 0;
  for (int v = 0; v < 256; ++v) total_sum += hist[static_cast<std::size_t>(v)] * v;

  int threshold = -1;
  double best = -1.0;
  long long below = 0;
  long long below_sum = 0;
  for (int t = 1; t < 256; ++t) {
    below += hist[static_cast<std::size_t>(t - 1)];
    below_sum += hist[static_cast<std::size_t>(t - 1)] * (t - 1);
    const long long above = total - below;
    if (below == 0 || above == 0) continue;
    const double mu0 = static_cast<double>(below_sum) / below;
    const double mu1 = static_cast<double>(total_sum - below_sum) / above;
    const double between = static_cast<double>(below) * static_cast<double>(above) * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      threshold = t;
    }
  }

  BinaryImage out(img.width(), img.height());
  if (threshold < 0) return out;
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.pixels()[i] = img.pixels()[i] < threshold ? 1 : 0;
  }
  return out;
}

// Most frequent intensity along the image border; lowest value wins ties.
inline std::uint8_t modal_border_intensity(const GrayImage& img) {
  std::array<long, 256> hist{};
  for (int x = 0; x < img.width(); ++x) {
    ++hist[img.at(x, 0)];
    if (img.height() > 1) ++hist[img.at(x, img.height() - 1)];
  }
  for (int y = 1; y + 1 < img.height(); ++y) {
    ++hist[img.at(0, y)];
    if (img.width() > 1) ++hist[img.at(img.width() - 1, y)];
  }
  return static_cast<std::uint8_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
}

// Rotates about the image center, keeping the frame size. A source point p
// lands at R(angle) * (p - c) + c; uncovered output pixels take `fill`.
inline GrayImage rotate(const GrayImage& img, double angle_degrees, std::uint8_t fill) {
  require_nonempty(img, "rotate");
  const double a = detail::deg2rad(angle_degrees);
  const double c = std::cos(a);
  const double s = std::sin(a);
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  constexpr double eps = 1e-9;
  GrayImage out(img.width(), img.height(), fill);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      if (sx < -eps || sy < -eps || sx > img.width() - 1 + eps || sy > img.height() - 1 + eps) continue;
      out.at(x, y) = detail::to_pixel(detail::bilinear(
          img, std::clamp(sx, 0.0, img.width() - 1.0), std::clamp(sy, 0.0, img.height() - 1.0)));
    }
  }
  return out;
}

// Projection-profile deskew: tries every angle on the grid and keeps the one
// whose horizontal ink profile has the largest variance. The ink total is
// fixed, so the sum of squared row counts is an equivalent score.
inline DeskewResult deskew(const GrayImage& img, double max_angle = 15.0, double step = 0.25) {
  require_nonempty(img, "deskew");
  if (step <= 0.0 || max_angle < 0.0) throw Error(Errc::parameter, "deskew: invalid angle grid");
  const BinaryImage ink = binarize(img);
  std::vector<std::pair<double, double>> points;
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;
  for (int y = 0; y < ink.height(); ++y) {
    for (int x = 0; x < ink.width(); ++x) {
      if (ink.at(x, y)) points.emplace_back(x - cx, y - cy);
    }
  }
  if (points.empty()) return {img, 0.0};

  const int diag = static_cast<int>(std::ceil(std::hypot(img.width(), img.height()))) + 2;
  std::vector<long> profile(static_cast<std::size_t>(2 * diag + 1));
  auto score = [&](double angle) {
    std::fill(profile.begin(), profile.end(), 0);
    const double a = detail::deg2rad(angle);
    const double s = std::sin(a);
    const double c = std::cos(a);
    for (const auto& [dx, dy] : points) {
      const long row = std::lround(s * dx + c * dy) + diag;
      ++profile[static_cast<std::size_t>(row)];
    }
    double sum_sq = 0.0;
    for (long v : profile) sum_sq += static_cast<double>(v) * static_cast<double>(v);
    return sum_sq;
  };

  // Visit 0, +step, -step, +2 step, ... so that ties resolve toward zero.
  const int steps = static_cast<int>(std::floor(max_angle / step + 1e-9));
  double best_angle = 0.0;
  double best_score = score(0.0);
  for (int k = 1; k <= steps; ++k) {
    for (int sign : {+1, -1}) {
      const double angle = sign * k * step;
      const double value = score(angle);
      if (value > best_score) {
        best_score = value;
        best_angle = angle;
      }
    }
  }
  if (best_angle == 0.0) return {img, 0.0};
  return {rotate(img, best_angle, modal_border_intensity(img)), best_angle};
}

inline GrayImage preprocess_word(const GrayImage& crop, const PreprocessParams& params = {}) {
  GrayImage img = normalize_height(crop, params.target_height);
  img = median_filter(img, params.median_window);
  return deskew(img, params.deskew_max_angle, params.deskew_step).image;
}

struct CannyParams {
  double low = 0.1;   // fraction of the maximum gradient magnitude
  double high = 0.2;
  double sigma = 1.4;
  int kernel_size = 5;
};

inline BinaryImage canny_edges(const GrayImage& img, const CannyParams& params = {}) {
  if (!(params.low > 0.0 && params.low < params.high && params.high <= 1.0)) {
    throw Error(Errc::parameter, "canny_edges: thresholds must satisfy 0 < low < high <= 1");
  }
  if (params.kernel_size < 1 || params.kernel_size % 2 == 0 || params.sigma <= 0.0) {
    throw Error(Errc::parameter, "canny_edges: kernel size must be odd and sigma positive");
  }
  require_nonempty(img, "canny_edges");
  const int w = img.width();
  const int h = img.height();

  std::vector<double> kernel(static_cast<std::size_t>(params.kernel_size));
  const int radius = params.kernel_size / 2;
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-(i * i) / (2.0 * params.sigma * params.sigma));
    ksum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= ksum;

  std::vector<double> src(img.pixels().begin(), img.pixels().end());
  const std::vector<double> smooth = detail::convolve_separable(src, w, h, kernel);
  auto at = [&](int x, int y) {
    return smooth[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };

  std::vector<double> mag(smooth.size());
  std::vector<std::uint8_t> dir(smooth.size());
  double max_mag = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      mag[i] = std::hypot(gx, gy);
      max_mag = std::max(max_mag, mag[i]);
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      // 0: horizontal gradient, 1: down-right diagonal, 2: vertical, 3: down-left diagonal
      dir[i] = angle < 22.5 || angle >= 157.5 ? 0 : angle < 67.5 ? 1 : angle < 112.5 ? 2 : 3;
    }
  }

  BinaryImage edges(w, h);
  if (max_mag <= 0.0) return edges;

  static constexpr int offsets[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  auto mag_at = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };
  const double hi = params.high * max_mag;
  const double lo = params.low * max_mag;
  // 0 = suppressed, 1 = weak, 2 = strong
  std::vector<std::uint8_t> cls(mag.size(), 0);
  std::deque<std::pair<int, int>> frontier;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double m = mag[i];
      if (m < lo) continue;
      const auto& o = offsets[dir[i]];
      // Asymmetric comparison keeps exactly one pixel of a two-pixel plateau.
      if (!(m > mag_at(x + o[0], y + o[1]) && m >= mag_at(x - o[0], y - o[1]))) continue;
      if (m >= hi) {
        cls[i] = 2;
        frontier.emplace_back(x, y);
      } else {
        cls[i] = 1;
      }
    }
  }
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop_front();
    edges.at(x, y) = 1;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (cls[j] == 1) {
          cls[j] = 2;
          frontier.emplace_back(nx, ny);
        }
      }
    }
  }
  return edges;
}

inline BinaryImage canny_edges(const GrayImage& img, double low, double high) {
  CannyParams params;
  params.low = low;
  params.high = high;
  return canny_edges(img, params);
}

// Standard Hough transform in normal form rho = x cos(theta) + y sin(theta),
// theta on a 1 degree grid over [0, 180), rho quantized to 1 px.
inline std::vector<DetectedLine> hough_lines(const BinaryImage& edges, int vote_threshold) {
  if (vote_threshold < 1) throw Error(Errc::parameter, "hough_lines: vote threshold must be >= 1");
  std::vector<DetectedLine> lines;
  if (edges.empty()) return lines;

  constexpr int n_theta = 180;
  const int diag = static_cast<int>(std::ceil(std::hypot(edges.width(), edges.height())));
  const int n_rho = 2 * diag + 1;
  std::array<double, n_theta> cos_t{};
  std::array<double, n_theta> sin_t{};
  for (int t = 0; t < n_theta; ++t) {
    cos_t[static_cast<std::size_t>(t)] = std::cos(detail::deg2rad(t));
    sin_t[static_cast<std::size_t>(t)] = std::sin(detail::deg2rad(t));
  }

  std::vector<int> acc(static_cast<std::size_t>(n_theta) * n_rho, 0);
  bool any = false;
  for (int y = 0; y < edges.height(); ++y) {
    for (int x = 0; x < edges.width(); ++x) {
      if (!edges.at(x, y)) continue;
      any = true;
      for (int t = 0; t < n_theta; ++t) {
        const long r = std::lround(x * cos_t[static_cast<std::size_t>(t)] + y * sin_t[static_cast<std::size_t>(t)]) + diag;
        ++acc[static_cast<std::size_t>(t) * n_rho + static_cast<std::size_t>(r)];
      }
    }
  }
  if (!any) return lines;

  auto votes = [&](int t, int r) { return acc[static_cast<std::size_t>(t) * n_rho + static_cast<std::size_t>(r)]; };
  for (int t = 0; t < n_theta; ++t) {
    for (int r = 0; r < n_rho; ++r) {
      const int v = votes(t, r);
      if (v < vote_threshold) continue;
      bool peak = true;
      for (int dt = -1; dt <= 1 && peak; ++dt) {
        for (int dr = -1; dr <= 1; ++dr) {
          if (dt == 0 && dr == 0) continue;
          const int nt = t + dt;
          const int nr = r + dr;
          if (nt < 0 || nt >= n_theta || nr < 0 || nr >= n_rho) continue;
          const int nv = votes(nt, nr);
          // On a plateau only the first cell in scan order survives.
          const bool earlier = dt < 0 || (dt == 0 && dr < 0);
          if (nv > v || (nv == v && earlier)) {
            peak = false;
            break;
          }
        }
      }
      if (peak) lines.push_back({static_cast<double>(r - diag), static_cast<double>(t), v});
    }
  }
  std::stable_sort(lines.begin(), lines.end(),
                   [](const DetectedLine& a, const DetectedLine& b) { return a.votes > b.votes; });
  return lines;
}

// Default Hough threshold for a word image: max(10, 0.4 * height).
inline int default_vote_threshold(int image_height, double fraction = 0.4, int floor_votes = 10) {
  return std::max(floor_votes, static_cast<int>(std::ceil(fraction * image_height)));
}

}  // namespace fontid
