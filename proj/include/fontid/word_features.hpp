#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fontid/error.hpp"
#include "fontid/image.hpp"
#include "fontid/imgproc.hpp"

namespace fontid {

inline constexpr std::size_t kNumZernike = 15;
inline constexpr std::size_t kNumWordFeatures = 18;

struct StrokeStats {
  double trimmed_mean = 0.0;
  double iqr = 0.0;
};

// [trimmed stroke width, stroke width IQR, slant line density, |Z_nm| x 15]
struct WordFeatureVector {
  std::array<double, kNumWordFeatures> values{};

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  friend bool operator==(const WordFeatureVector&, const WordFeatureVector&) = default;
};

struct ZernikeOrder {
  int n;
  int m;
};

// All (n, m) with 1 <= n <= 6, 0 <= m <= n and n - m even, lexicographic.
inline constexpr std::array<ZernikeOrder, kNumZernike> kZernikeOrders = {{
    {1, 1}, {2, 0}, {2, 2}, {3, 1}, {3, 3}, {4, 0}, {4, 2}, {4, 4},
    {5, 1}, {5, 3}, {5, 5}, {6, 0}, {6, 2}, {6, 4}, {6, 6},
}};

inline const std::array<std::string, kNumWordFeatures>& word_feature_names() {
  static const std::array<std::string, kNumWordFeatures> names = [] {
    std::array<std::string, kNumWordFeatures> out;
    out[0] = "stroke_trimmed_mean";
    out[1] = "stroke_iqr";
    out[2] = "slant_density";
    for (std::size_t i = 0; i < kNumZernike; ++i) {
      out[3 + i] = "zm_" + std::to_string(kZernikeOrders[i].n) + "_" + std::to_string(kZernikeOrders[i].m);
    }
    return out;
  }();
  return names;
}

// Column subsets used for word-level evaluation.
enum class FeatureSubset { all, zernike, slant_and_width };

inline std::vector<std::size_t> feature_columns(FeatureSubset subset) {
  std::vector<std::size_t> cols;
  switch (subset) {
    case FeatureSubset::all:
      for (std::size_t i = 0; i < kNumWordFeatures; ++i) cols.push_back(i);
      break;
    case FeatureSubset::zernike:
      for (std::size_t i = 3; i < kNumWordFeatures; ++i) cols.push_back(i);
      break;
    case FeatureSubset::slant_and_width:
      cols = {0, 1, 2};
      break;
  }
  return cols;
}

inline FeatureSubset parse_feature_subset(std::string_view name) {
  if (name == "ALL") return FeatureSubset::all;
  if (name == "ZM") return FeatureSubset::zernike;
  if (name == "SLD-CW") return FeatureSubset::slant_and_width;
  throw Error(Errc::parameter, "unknown feature subset '" + std::string(name) + "' (expected ALL, ZM or SLD-CW)");
}

// ---------------------------------------------------------------------------
// Robust statistics

// Mean after dropping floor(fraction * n) values from each tail.
inline double trimmed_mean(std::vector<double> values, double fraction = 0.1) {
  if (values.empty()) throw Error(Errc::insufficient_data, "trimmed_mean: no values");
  std::sort(values.begin(), values.end());
  const auto trim = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(values.size())));
  double sum = 0.0;
  for (std::size_t i = trim; i < values.size() - trim; ++i) sum += values[i];
  return sum / static_cast<double>(values.size() - 2 * trim);
}

// Linear-interpolation quantile of sorted data (the usual "type 7" rule).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error(Errc::insufficient_data, "quantile: no values");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double interquartile_range(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
}

// ---------------------------------------------------------------------------
// Stroke width

struct StrokeParams {
  int half_band = 20;  // rows scanned: middle row +/- half_band
  double trim_fraction = 0.1;
};

// Horizontal ink run lengths of one row. Pixels beyond the image edge count
// as background, so a run touching the border is still closed.
inline std::vector<double> row_run_lengths(const BinaryImage& img, int y) {
  std::vector<double> runs;
  int start = -1;
  for (int x = 0; x < img.width(); ++x) {
    if (img.at(x, y)) {
      if (start < 0) start = x;
    } else if (start >= 0) {
      runs.push_back(x - start);
      start = -1;
    }
  }
  if (start >= 0) runs.push_back(img.width() - start);
  return runs;
}

inline StrokeStats stroke_width_stats(const BinaryImage& img, const StrokeParams& params = {}) {
  const int band = 2 * params.half_band + 1;
  if (img.height() < band) {
    throw Error(Errc::invalid_image, "stroke_width_stats: image height " + std::to_string(img.height()) +
                                         " is below the scanned band of " + std::to_string(band) + " rows");
  }
  const int mid = img.height() / 2;
  std::vector<std::vector<double>> rows;
  std::size_t c_max = 0;
  for (int y = mid - params.half_band; y <= mid + params.half_band; ++y) {
    rows.push_back(row_run_lengths(img, y));
    c_max = std::max(c_max, rows.back().size());
  }
  if (c_max == 0) throw Error(Errc::no_strokes, "stroke_width_stats: no ink in the scanned band");

  std::vector<double> pooled;
  for (const auto& runs : rows) {
    if (runs.size() == c_max) pooled.insert(pooled.end(), runs.begin(), runs.end());
  }
  return {trimmed_mean(pooled, params.trim_fraction), interquartile_range(pooled)};
}

// ---------------------------------------------------------------------------
// Slant line density

struct SlantParams {
  CannyParams canny{};
  double vote_fraction = 0.4;  // Hough threshold = max(min_votes, fraction * height)
  int min_votes = 10;
  std::optional<int> vote_threshold;  // overrides the height-based default
  double slope_center = 45.0;
  double slope_tolerance = 5.0;
};

// A line of slope angle a (measured from the x axis) has Hough normal angle
// a + 90 (mod 180), so +/-45 degree slopes sit at theta 135 and 45.
inline bool is_slanted(const DetectedLine& line, const SlantParams& params = {}) {
  const double lo = params.slope_center - params.slope_tolerance;
  const double hi = params.slope_center + params.slope_tolerance;
  return (line.theta >= lo && line.theta <= hi) || (line.theta >= 180.0 - hi && line.theta <= 180.0 - lo);
}

inline double slant_line_density(const GrayImage& word, int char_count, const SlantParams& params = {}) {
  if (char_count < 1) {
    throw Error(Errc::parameter, "slant_line_density: char_count must be >= 1, got " + std::to_string(char_count));
  }
  require_nonempty(word, "slant_line_density");
  const BinaryImage edges = canny_edges(word, params.canny);
  const int threshold = params.vote_threshold.value_or(
      default_vote_threshold(word.height(), params.vote_fraction, params.min_votes));
  const auto lines = hough_lines(edges, threshold);
  const auto slanted = std::count_if(lines.begin(), lines.end(),
                                     [&](const DetectedLine& l) { return is_slanted(l, params); });
  return static_cast<double>(slanted) / char_count;
}

// ---------------------------------------------------------------------------
// Zernike moments

inline constexpr int kZernikeGrid = 64;

// Nearest-neighbour resample of the mask onto a square grid.
inline BinaryImage resample_square(const BinaryImage& img, int size = kZernikeGrid) {
  require_nonempty(img, "resample_square");
  BinaryImage out(size, size);
  for (int y = 0; y < size; ++y) {
    const int sy = std::min(img.height() - 1, static_cast<int>(std::floor((y + 0.5) * img.height() / size)));
    for (int x = 0; x < size; ++x) {
      const int sx = std::min(img.width() - 1, static_cast<int>(std::floor((x + 0.5) * img.width() / size)));
      out.at(x, y) = img.at(sx, sy);
    }
  }
  return out;
}

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Zernike radial polynomial R_nm(rho).
inline double zernike_radial(int n, int m, double rho) {
  double value = 0.0;
  for (int s = 0; s <= (n - m) / 2; ++s) {
    const double coeff = ((s % 2) ? -1.0 : 1.0) * factorial(n - s) /
                         (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s));
    value += coeff * std::pow(rho, n - 2 * s);
  }
  return value;
}

// |Z_nm| = |(n+1)/pi * sum_{x,y} I(x,y) conj(V_nm(x,y))| over pixel centers
// inside the unit disk inscribed in the resampled grid.
//
// The angular factor is evaluated as (conj(z)/|z|)^m by repeated complex
// multiplication rather than through atan2. A quarter turn of the grid
// multiplies z by i exactly, which keeps the magnitudes bit-stable under
// 90 degree rotations up to summation order.
inline std::array<double, kNumZernike> zernike_features(const BinaryImage& img) {
  const BinaryImage grid = resample_square(img);
  std::array<std::complex<long double>, kNumZernike> sums{};
  const double half = kZernikeGrid / 2.0;
  for (int y = 0; y < kZernikeGrid; ++y) {
    for (int x = 0; x < kZernikeGrid; ++x) {
      if (!grid.at(x, y)) continue;
      const double xn = (x + 0.5 - half) / half;
      const double yn = (half - (y + 0.5)) / half;
      const double r2 = xn * xn + yn * yn;
      if (r2 > 1.0) continue;
      const double rho = std::sqrt(r2);
      const std::complex<double> unit = std::complex<double>(xn, -yn) / rho;
      std::array<std::complex<double>, 7> powers;
      powers[0] = 1.0;
      for (int k = 1; k <= 6; ++k) powers[static_cast<std::size_t>(k)] = powers[static_cast<std::size_t>(k - 1)] * unit;
      for (std::size_t i = 0; i < kNumZernike; ++i) {
        const auto [n, m] = kZernikeOrders[i];
        const std::complex<double> term = zernike_radial(n, m, rho) * powers[static_cast<std::size_t>(m)];
        sums[i] += std::complex<long double>(term.real(), term.imag());
      }
    }
  }
  std::array<double, kNumZernike> out{};
  for (std::size_t i = 0; i < kNumZernike; ++i) {
    const long double scale = (kZernikeOrders[i].n + 1) / std::numbers::pi_v<long double>;
    out[i] = static_cast<double>(std::abs(sums[i] * scale));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct WordFeatureParams {
  StrokeParams stroke{};
  SlantParams slant{};
};

// `word` is expected to be preprocessed already (height-normalized, filtered,
// deskewed). Throws Errc::no_strokes for words without ink in the band.
inline WordFeatureVector extract_word_features(const GrayImage& word, int char_count,
                                               const WordFeatureParams& params = {}) {
  require_nonempty(word, "extract_word_features");
  const BinaryImage ink = binarize(word);
  const StrokeStats stroke = stroke_width_stats(ink, params.stroke);
  WordFeatureVector f;
  f[0] = stroke.trimmed_mean;
  f[1] = stroke.iqr;
  f[2] = slant_line_density(word, char_count, params.slant);
  const auto zm = zernike_features(ink);
  std::copy(zm.begin(), zm.end(), f.values.begin() + 3);
  return f;
}

}  // namespace fontid
