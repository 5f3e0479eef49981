#include <gtest/gtest.h>

#include <sstream>

#include "fontid/dataset.hpp"
#include "fontid/page_features.hpp"
#include "support.hpp"

using namespace fontid;

namespace {

WordFeatureVector random_word(Rng& rng, double center = 0.0, double spread = 1.0) {
  WordFeatureVector f;
  for (std::size_t d = 0; d < kNumWordFeatures; ++d) f[d] = center + spread * (uniform01(rng) - 0.5) * (1.0 + d);
  return f;
}

std::vector<WordFeatureVector> random_words(Rng& rng, std::size_t n) {
  std::vector<WordFeatureVector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_word(rng));
  return out;
}

Codebook handmade_codebook(std::vector<FeatureRow> centroids) {
  Codebook cb;
  cb.k = static_cast<int>(centroids.size());
  cb.standardizer.mean.fill(0.0);
  cb.standardizer.stddev.fill(1.0);
  cb.centroids = std::move(centroids);
  return cb;
}

}  // namespace

TEST(Standardizer, ConstantDimensionsGetUnitScale) {
  std::vector<WordFeatureVector> xs(5);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i][0] = static_cast<double>(i);
    xs[i][1] = 3.0;
  }
  const auto s = fit_standardizer(xs);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(s.stddev[1], 1.0);
  EXPECT_GT(s.stddev[0], 0.0);
}

TEST(Codebook, DistinctPointsBecomeCentroids) {
  Rng rng(1);
  const auto pts = random_words(rng, 6);
  const auto cb = build_codebook(pts, 6, 3);
  ASSERT_EQ(cb.centroids.size(), 6u);
  for (const auto& p : pts) {
    const auto z = cb.standardizer.apply(p);
    double best = 1e300;
    for (const auto& c : cb.centroids) best = std::min(best, squared_distance(z, c));
    EXPECT_LT(std::sqrt(best), 1e-9);
  }
}

TEST(Codebook, TwoBlobsRecovered) {
  Rng rng(2);
  std::vector<WordFeatureVector> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(random_word(rng, i % 2 ? 10.0 : -10.0, 0.5));
  const auto cb = build_codebook(pts, 2, 5);
  // Compare against the sample means in standardized space.
  FeatureRow mean_a{}, mean_b{};
  for (int i = 0; i < 200; ++i) {
    const auto z = cb.standardizer.apply(pts[static_cast<std::size_t>(i)]);
    for (std::size_t d = 0; d < kNumWordFeatures; ++d) (i % 2 ? mean_a : mean_b)[d] += z[d] / 100.0;
  }
  const double da = std::min(squared_distance(cb.centroids[0], mean_a), squared_distance(cb.centroids[1], mean_a));
  const double db = std::min(squared_distance(cb.centroids[0], mean_b), squared_distance(cb.centroids[1], mean_b));
  EXPECT_LT(std::sqrt(da), 0.1);
  EXPECT_LT(std::sqrt(db), 0.1);
}

TEST(Codebook, TooFewPointsIsInsufficientData) {
  Rng rng(3);
  try {
    build_codebook(random_words(rng, 19), 20, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
}

TEST(Codebook, ReproducibleAndInertiaNonIncreasing) {
  Rng rng(4);
  const auto pts = random_words(rng, 400);
  const auto a = build_codebook(pts, 20, 11);
  const auto b = build_codebook(pts, 20, 11);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.inertia_history, b.inertia_history);
  for (std::size_t i = 1; i < a.inertia_history.size(); ++i) {
    EXPECT_LE(a.inertia_history[i], a.inertia_history[i - 1] * (1 + 1e-12));
  }
  // Centroids pairwise distinct.
  for (std::size_t i = 0; i < a.centroids.size(); ++i) {
    for (std::size_t j = i + 1; j < a.centroids.size(); ++j) EXPECT_GT(squared_distance(a.centroids[i], a.centroids[j]), 0.0);
  }
}

TEST(Codebook, JsonRoundTrip) {
  Rng rng(5);
  const auto cb = build_codebook(random_words(rng, 100), 5, 2);
  const auto back = codebook_from_json(nlohmann::json::parse(codebook_to_json(cb).dump()));
  EXPECT_EQ(back.centroids, cb.centroids);
  EXPECT_EQ(back.standardizer.mean, cb.standardizer.mean);
  EXPECT_EQ(codebook_fingerprint(back), codebook_fingerprint(cb));
}

TEST(Codebook, SchemaMismatchRejected) {
  Rng rng(6);
  auto j = codebook_to_json(build_codebook(random_words(rng, 50), 3, 2));
  j["feature_schema_hash"] = "deadbeef";
  try {
    codebook_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::validation);
  }
}

TEST(Quantize, CentroidMapsToItself) {
  Rng rng(7);
  const auto cb = build_codebook(random_words(rng, 300), 20, 9);
  for (int i = 0; i < cb.k; ++i) {
    EXPECT_EQ(quantize(cb.standardizer.invert(cb.centroids[static_cast<std::size_t>(i)]), cb), i);
  }
}

TEST(Quantize, TieGoesToLowerIndex) {
  std::vector<FeatureRow> c(6, FeatureRow{});
  for (std::size_t i = 0; i < c.size(); ++i) c[i][0] = 100.0 + static_cast<double>(i);
  c[2][0] = 1.0;
  c[5][0] = -1.0;
  const auto cb = handmade_codebook(c);
  EXPECT_EQ(quantize(WordFeatureVector{}, cb), 2);
}

TEST(Quantize, MatchesBruteForce) {
  Rng rng(8);
  const auto cb = build_codebook(random_words(rng, 300), 20, 10);
  for (int t = 0; t < 500; ++t) {
    const auto f = random_word(rng, 0.0, 2.0);
    const auto z = cb.standardizer.apply(f);
    int best = 0;
    double best_d = 1e300;
    for (int i = 0; i < cb.k; ++i) {
      double d = 0.0;
      for (std::size_t k = 0; k < kNumWordFeatures; ++k) {
        d += (z[k] - cb.centroids[static_cast<std::size_t>(i)][k]) * (z[k] - cb.centroids[static_cast<std::size_t>(i)][k]);
      }
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    ASSERT_EQ(quantize(f, cb), best);
  }
}

TEST(PageBof, OneHotPage) {
  std::vector<FeatureRow> c(20, FeatureRow{});
  for (std::size_t i = 0; i < c.size(); ++i) c[i][0] = static_cast<double>(i) * 10.0;
  const auto cb = handmade_codebook(c);
  WordFeatureVector w;
  w[0] = 30.0;
  const std::vector<WordFeatureVector> words(7, w);
  const auto bof = page_bof(words, cb);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(bof[i], i == 3 ? 1.0 : 0.0);
}

TEST(PageBof, HalfAndHalf) {
  std::vector<FeatureRow> c(20, FeatureRow{});
  for (std::size_t i = 0; i < c.size(); ++i) c[i][0] = static_cast<double>(i) * 10.0;
  const auto cb = handmade_codebook(c);
  std::vector<WordFeatureVector> words(10);
  for (int i = 5; i < 10; ++i) words[static_cast<std::size_t>(i)][0] = 10.0;
  const auto bof = page_bof(words, cb);
  EXPECT_EQ(bof[0], 0.5);
  EXPECT_EQ(bof[1], 0.5);
  for (std::size_t i = 2; i < 20; ++i) EXPECT_EQ(bof[i], 0.0);
}

TEST(PageBof, EmptyPageError) {
  const auto cb = handmade_codebook(std::vector<FeatureRow>(2, FeatureRow{}));
  try {
    page_bof({}, cb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_page);
  }
}

TEST(BofTable, RoundTripKeepsLabelsAndValues) {
  SyntheticSpec spec;
  spec.pages_per_class = {3, 2, 1};
  auto data = make_synthetic_dataset(spec);
  data.labels[1].reset();
  std::stringstream ss;
  write_bof_table(ss, data);
  const auto back = read_bof_table(ss, "mem");
  EXPECT_EQ(back.page_ids, data.page_ids);
  EXPECT_EQ(back.labels, data.labels);
  EXPECT_EQ(back.bofs, data.bofs);
}

TEST(WordFeatureCsv, RoundTripIsExact) {
  Rng rng(9);
  std::vector<WordFeatureRow> rows;
  for (int i = 0; i < 5; ++i) rows.push_back({"page," + std::to_string(i), i, random_word(rng)});
  std::stringstream ss;
  write_word_feature_rows(ss, rows);
  const auto back = read_word_feature_rows(ss, "mem");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].page_id, rows[i].page_id);
    EXPECT_EQ(back[i].features, rows[i].features);
  }
}

TEST(Synthetic, ShapesAndNormalization) {
  SyntheticSpec spec;
  spec.pages_per_class = {10, 20, 5};
  const auto data = make_synthetic_dataset(spec);
  ASSERT_EQ(data.size(), 35u);
  std::array<int, 3> counts{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    ++counts[static_cast<std::size_t>(index_of(*data.labels[i]))];
    double total = 0.0;
    for (double v : data.bofs[i].bins) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
  EXPECT_EQ(counts, (std::array<int, 3>{10, 20, 5}));
  EXPECT_EQ(make_synthetic_dataset(spec).bofs, data.bofs);
}
