#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fontid/error.hpp"
#include "fontid/random.hpp"
#include "fontid/word_features.hpp"

namespace fontid {

inline constexpr int kDefaultCodebookSize = 20;
inline constexpr int kCodebookFormatVersion = 1;

using FeatureRow = std::array<double, kNumWordFeatures>;

// Normalized page histogram over codebook bins.
struct BofVector {
  std::vector<double> bins;

  std::size_t size() const noexcept { return bins.size(); }
  double operator[](std::size_t i) const { return bins[i]; }
  friend bool operator==(const BofVector&, const BofVector&) = default;
};

struct Standardizer {
  FeatureRow mean{};
  FeatureRow stddev{};

  FeatureRow apply(const WordFeatureVector& f) const {
    FeatureRow z;
    for (std::size_t d = 0; d < kNumWordFeatures; ++d) z[d] = (f[d] - mean[d]) / stddev[d];
    return z;
  }
  WordFeatureVector invert(const FeatureRow& z) const {
    WordFeatureVector f;
    for (std::size_t d = 0; d < kNumWordFeatures; ++d) f[d] = z[d] * stddev[d] + mean[d];
    return f;
  }
};

struct Codebook {
  int k = 0;
  std::uint64_t seed = 0;
  Standardizer standardizer;
  std::vector<FeatureRow> centroids;  // in standardized space
  std::vector<double> inertia_history;  // within-cluster SS after each assignment step
  int iterations = 0;
};

struct KMeansParams {
  double tolerance = 1e-6;  // stop once no centroid moves farther than this
  int max_iterations = 300;
};

// Stable 64-bit FNV-1a, used for schema and codebook fingerprints.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

inline std::string feature_schema_hash() {
  std::string joined;
  for (const auto& name : word_feature_names()) joined += name + ",";
  return fnv1a_hex(joined);
}

inline double squared_distance(const FeatureRow& a, const FeatureRow& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < kNumWordFeatures; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

// Population z-score; constant dimensions keep a unit scale.
inline Standardizer fit_standardizer(std::span<const WordFeatureVector> features) {
  Standardizer st;
  const double n = static_cast<double>(features.size());
  for (const auto& f : features) {
    for (std::size_t d = 0; d < kNumWordFeatures; ++d) st.mean[d] += f[d];
  }
  for (auto& m : st.mean) m /= n;
  FeatureRow var{};
  for (const auto& f : features) {
    for (std::size_t d = 0; d < kNumWordFeatures; ++d) var[d] += (f[d] - st.mean[d]) * (f[d] - st.mean[d]);
  }
  for (std::size_t d = 0; d < kNumWordFeatures; ++d) {
    const double sd = std::sqrt(var[d] / n);
    st.stddev[d] = sd > 0.0 ? sd : 1.0;
  }
  return st;
}

// Nearest centroid, lowest index on ties.
inline int nearest_centroid(const FeatureRow& z, const std::vector<FeatureRow>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(z, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

namespace detail {

inline std::vector<FeatureRow> kmeans_plus_plus(const std::vector<FeatureRow>& points, int k, Rng& rng) {
  std::vector<FeatureRow> centers;
  centers.push_back(points[uniform_index(rng, points.size())]);
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
      total += d2[i];
    }
    const double target = uniform01(rng) * total;
    std::size_t pick = points.size();
    double cumulative = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      cumulative += d2[i];
      pick = i;
      if (cumulative > target) break;
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

}  // namespace detail

// k-means++ seeded Lloyd iterations on z-scored word features.
inline Codebook build_codebook(std::span<const WordFeatureVector> features, int k, std::uint64_t seed,
                               const KMeansParams& params = {}) {
  if (k < 2) throw Error(Errc::parameter, "build_codebook: k must be >= 2");
  if (features.size() < static_cast<std::size_t>(k)) {
    throw Error(Errc::insufficient_data, "build_codebook: " + std::to_string(features.size()) +
                                             " feature vectors for k = " + std::to_string(k));
  }
  Codebook cb;
  cb.k = k;
  cb.seed = seed;
  cb.standardizer = fit_standardizer(features);

  std::vector<FeatureRow> points;
  points.reserve(features.size());
  for (const auto& f : features) points.push_back(cb.standardizer.apply(f));

  {
    std::vector<FeatureRow> unique = points;
    std::sort(unique.begin(), unique.end());
    const auto distinct = std::unique(unique.begin(), unique.end()) - unique.begin();
    if (distinct < k) {
      throw Error(Errc::insufficient_data, "build_codebook: only " + std::to_string(distinct) +
                                               " distinct feature vectors for k = " + std::to_string(k));
    }
  }

  Rng rng(seed);
  std::vector<FeatureRow> centroids = detail::kmeans_plus_plus(points, k, rng);
  std::vector<int> assignment(points.size(), 0);

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      assignment[i] = nearest_centroid(points[i], centroids);
      inertia += squared_distance(points[i], centroids[static_cast<std::size_t>(assignment[i])]);
    }
    cb.inertia_history.push_back(inertia);
    cb.iterations = iter + 1;

    std::vector<FeatureRow> next(static_cast<std::size_t>(k), FeatureRow{});
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = static_cast<std::size_t>(assignment[i]);
      ++counts[c];
      for (std::size_t d = 0; d < kNumWordFeatures; ++d) next[c][d] += points[i][d];
    }
    std::vector<bool> taken(points.size(), false);
    for (std::size_t c = 0; c < next.size(); ++c) {
      if (counts[c] > 0) {
        for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (taken[i]) continue;
        const double d = squared_distance(points[i], centroids[static_cast<std::size_t>(assignment[i])]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      taken[far] = true;
      next[c] = points[far];
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < next.size(); ++c) {
      shift = std::max(shift, std::sqrt(squared_distance(next[c], centroids[c])));
    }
    centroids = std::move(next);
    if (shift < params.tolerance) break;
  }
  cb.centroids = std::move(centroids);
  return cb;
}

inline int quantize(const WordFeatureVector& f, const Codebook& cb) {
  return nearest_centroid(cb.standardizer.apply(f), cb.centroids);
}

inline BofVector page_bof(std::span<const WordFeatureVector> features, const Codebook& cb) {
  if (features.empty()) throw Error(Errc::empty_page, "page_bof: page has no valid words");
  BofVector bof;
  bof.bins.assign(static_cast<std::size_t>(cb.k), 0.0);
  for (const auto& f : features) bof.bins[static_cast<std::size_t>(quantize(f, cb))] += 1.0;
  for (auto& b : bof.bins) b /= static_cast<double>(features.size());
  return bof;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json codebook_to_json(const Codebook& cb) {
  nlohmann::json j;
  j["format"] = "fontid.codebook";
  j["version"] = kCodebookFormatVersion;
  j["k"] = cb.k;
  j["seed"] = cb.seed;
  j["feature_schema_hash"] = feature_schema_hash();
  j["feature_names"] = word_feature_names();
  j["standardizer"] = {{"mean", cb.standardizer.mean}, {"stddev", cb.standardizer.stddev}};
  j["centroids"] = cb.centroids;
  j["iterations"] = cb.iterations;
  return j;
}

inline Codebook codebook_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "fontid.codebook") throw Error(Errc::parse, "codebook: unexpected format tag");
    if (j.at("version").get<int>() != kCodebookFormatVersion) {
      throw Error(Errc::parse, "codebook: unsupported version " + j.at("version").dump());
    }
    if (j.at("feature_schema_hash").get<std::string>() != feature_schema_hash()) {
      throw Error(Errc::validation, "codebook: feature schema hash does not match this build");
    }
    Codebook cb;
    cb.k = j.at("k").get<int>();
    cb.seed = j.at("seed").get<std::uint64_t>();
    cb.standardizer.mean = j.at("standardizer").at("mean").get<FeatureRow>();
    cb.standardizer.stddev = j.at("standardizer").at("stddev").get<FeatureRow>();
    cb.centroids = j.at("centroids").get<std::vector<FeatureRow>>();
    cb.iterations = j.value("iterations", 0);
    if (static_cast<int>(cb.centroids.size()) != cb.k) throw Error(Errc::parse, "codebook: centroid count != k");
    return cb;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("codebook: ") + e.what());
  }
}

inline std::string codebook_fingerprint(const Codebook& cb) { return fnv1a_hex(codebook_to_json(cb).dump()); }

inline void save_codebook(const Codebook& cb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write codebook: " + path);
  out << codebook_to_json(cb).dump(2) << "\n";
}

inline Codebook load_codebook(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open codebook: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, "codebook " + path + ": " + e.what());
  }
  return codebook_from_json(j);
}

}  // namespace fontid
