#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fontid/imgproc.hpp"
#include "support.hpp"

using namespace fontid;
using testing_support::fill_rect;

namespace {

// Horizontal black stripes on white, the usual deskew target.
GrayImage ruled_stripes(int w = 200, int h = 160) {
  GrayImage img(w, h, 255);
  for (int y = 20; y < h - 20; y += 16) img = fill_rect(img, 20, y, w - 40, 5, 0);
  return img;
}

}  // namespace

TEST(NormalizeHeight, AlreadyAtTargetIsIdentity) {
  Rng rng(1);
  const auto img = testing_support::random_gray(rng, 800, 400);
  EXPECT_EQ(normalize_height(img, 400), img);
}

TEST(NormalizeHeight, DoublesAspectPreserving) {
  const GrayImage img(100, 200, 77);
  const auto out = normalize_height(img, 400);
  EXPECT_EQ(out.width(), 200);
  EXPECT_EQ(out.height(), 400);
  EXPECT_TRUE(std::all_of(out.pixels().begin(), out.pixels().end(), [](auto v) { return v == 77; }));
}

TEST(NormalizeHeight, WidthNeverBelowOne) {
  const GrayImage img(1, 400, 0);
  EXPECT_EQ(normalize_height(img, 10).width(), 1);
}

TEST(NormalizeHeight, EmptyInputRejected) {
  try {
    normalize_height(GrayImage(0, 5), 400);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_image);
  }
}

TEST(NormalizeHeight, StaysWithinInputRange) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto img = testing_support::random_gray(rng, 5 + static_cast<int>(uniform_index(rng, 40)),
                                                  5 + static_cast<int>(uniform_index(rng, 40)));
    const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    const auto out = normalize_height(img, 97);
    for (auto v : out.pixels()) {
      ASSERT_GE(v, *lo);
      ASSERT_LE(v, *hi);
    }
  }
}

TEST(MedianFilter, ConstantUnchanged) {
  const GrayImage img(9, 7, 42);
  EXPECT_EQ(median_filter(img, 3), img);
}

TEST(MedianFilter, RemovesIsolatedImpulse) {
  GrayImage img(9, 9, 0);
  img.at(4, 4) = 255;
  EXPECT_EQ(median_filter(img, 3).at(4, 4), 0);
}

TEST(MedianFilter, CenterOfRampPatch) {
  GrayImage img(3, 3);
  for (int i = 0; i < 9; ++i) img.at(i % 3, i / 3) = static_cast<std::uint8_t>(i);
  EXPECT_EQ(median_filter(img, 3).at(1, 1), 4);
}

TEST(MedianFilter, MatchesSortOracleWithReplicatedBorders) {
  Rng rng(3);
  const auto img = testing_support::random_gray(rng, 13, 9);
  const auto out = median_filter(img, 5);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::vector<int> v;
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          v.push_back(img.at(std::clamp(x + dx, 0, 12), std::clamp(y + dy, 0, 8)));
        }
      }
      std::sort(v.begin(), v.end());
      ASSERT_EQ(out.at(x, y), v[12]);
    }
  }
}

TEST(MedianFilter, EvenWindowRejected) {
  try {
    median_filter(GrayImage(3, 3), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parameter);
  }
}

TEST(Binarize, BimodalSplit) {
  GrayImage img(10, 10, 240);
  for (int i = 0; i < 40; ++i) img.pixels()[static_cast<std::size_t>(i)] = 10;
  const auto bin = binarize(img);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(bin.pixels()[static_cast<std::size_t>(i)], i < 40 ? 1 : 0);
}

TEST(Binarize, ConstantIsAllBackground) {
  EXPECT_EQ(count_foreground(binarize(GrayImage(8, 8, 0))), 0u);
  EXPECT_EQ(count_foreground(binarize(GrayImage(8, 8, 200))), 0u);
}

TEST(Binarize, TextOnGradientPaper) {
  // Paper brightens left to right, ink is a fixed dark level with mild noise.
  Rng rng(5);
  GrayImage img(200, 100);
  std::vector<std::uint8_t> mask(img.size(), 0);
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 200; ++x) {
      const bool ink = (y / 10) % 3 == 1 && (x / 7) % 2 == 0;
      mask[static_cast<std::size_t>(y * 200 + x)] = ink;
      const int paper = 170 + x * 60 / 200;
      const int noise = static_cast<int>(uniform_index(rng, 11)) - 5;
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp((ink ? 40 : paper) + noise, 0, 255));
    }
  }
  const auto bin = binarize(img);
  std::size_t truth = 0;
  for (auto m : mask) truth += m;
  const double got = static_cast<double>(count_foreground(bin)) / static_cast<double>(img.size());
  EXPECT_NEAR(got, static_cast<double>(truth) / static_cast<double>(img.size()), 0.02);
}

TEST(Binarize, InvariantUnderIncreasingAffineMap) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    GrayImage img(16, 16);
    for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(uniform_index(rng, 100));
    const int a = 1 + static_cast<int>(uniform_index(rng, 2));
    const int b = static_cast<int>(uniform_index(rng, 50));
    GrayImage mapped = img;
    for (auto& p : mapped.pixels()) p = static_cast<std::uint8_t>(a * p + b);
    ASSERT_EQ(binarize(img), binarize(mapped));
  }
}

TEST(Deskew, AlignedImageKeepsAngleZero) {
  const auto r = deskew(ruled_stripes());
  EXPECT_NEAR(r.angle, 0.0, 0.25);
}

TEST(Deskew, RecoversSyntheticRotation) {
  const auto rotated = rotate(ruled_stripes(), 5.0, 255);
  const auto r = deskew(rotated);
  EXPECT_NEAR(r.angle, -5.0, 0.5);
}

TEST(Deskew, UniformImageGivesZero) {
  EXPECT_EQ(deskew(GrayImage(30, 30, 128)).angle, 0.0);
}

TEST(Deskew, SecondPassIsNearZero) {
  for (double a : {-9.0, -3.5, 2.0, 7.25}) {
    const auto first = deskew(rotate(ruled_stripes(), a, 255));
    EXPECT_LE(std::abs(deskew(first.image).angle), 0.5) << "initial rotation " << a;
  }
}

TEST(Canny, ConstantHasNoEdges) {
  EXPECT_EQ(count_foreground(canny_edges(GrayImage(40, 40, 90))), 0u);
}

TEST(Canny, VerticalStepIsThin) {
  GrayImage img(40, 30, 255);
  img = fill_rect(img, 0, 0, 20, 30, 0);
  const auto edges = canny_edges(img);
  for (int y = 3; y < 27; ++y) {
    int count = 0;
    for (int x = 0; x < 40; ++x) count += edges.at(x, y);
    EXPECT_GE(count, 1);
    EXPECT_LE(count, 2) << "row " << y;
  }
}

TEST(Canny, DiskEdgesLieOnCircle) {
  const double r = 20.0;
  GrayImage img(64, 64, 255);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (std::hypot(x - 32.0, y - 32.0) <= r) img.at(x, y) = 0;
    }
  }
  const auto edges = canny_edges(img);
  ASSERT_GT(count_foreground(edges), 50u);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (edges.at(x, y)) {
        EXPECT_LE(std::abs(std::hypot(x - 32.0, y - 32.0) - r), 1.5) << x << "," << y;
      }
    }
  }
}

TEST(Canny, InvalidThresholdsRejected) {
  EXPECT_THROW(canny_edges(GrayImage(5, 5), 0.3, 0.2), Error);
  EXPECT_THROW(canny_edges(GrayImage(5, 5), 0.0, 0.2), Error);
  EXPECT_THROW(canny_edges(GrayImage(5, 5), 0.1, 1.5), Error);
}

TEST(Hough, EmptyEdgesGiveNothing) {
  EXPECT_TRUE(hough_lines(BinaryImage(20, 20), 1).empty());
}

TEST(Hough, DiagonalNormalAngle) {
  BinaryImage edges(100, 100);
  for (int i = 0; i < 100; ++i) edges.at(i, i) = 1;
  const auto lines = hough_lines(edges, 40);
  ASSERT_FALSE(lines.empty());
  EXPECT_NEAR(lines[0].theta, 135.0, 1.0);
  EXPECT_NEAR(lines[0].votes, 100, 3);
  for (std::size_t i = 1; i < lines.size(); ++i) EXPECT_GE(lines[i - 1].votes, lines[i].votes);
}

TEST(Hough, ParallelHorizontalLines) {
  BinaryImage edges(80, 60);
  for (int x = 0; x < 80; ++x) {
    edges.at(x, 15) = 1;
    edges.at(x, 40) = 1;
  }
  const auto lines = hough_lines(edges, 50);
  ASSERT_EQ(lines.size(), 2u);
  for (const auto& l : lines) EXPECT_NEAR(l.theta, 90.0, 1.0);
  EXPECT_NE(lines[0].rho, lines[1].rho);
}

TEST(Hough, RobustToSparseNoise) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    BinaryImage edges(100, 100);
    for (int i = 0; i < 100; ++i) edges.at(i, i) = 1;
    for (int k = 0; k < 100; ++k) edges.at(static_cast<int>(uniform_index(rng, 100)), static_cast<int>(uniform_index(rng, 100))) = 1;
    const auto lines = hough_lines(edges, 40);
    ASSERT_FALSE(lines.empty());
    EXPECT_NEAR(lines[0].theta, 135.0, 1.0);
  }
}

TEST(Hough, ThresholdValidated) {
  EXPECT_THROW(hough_lines(BinaryImage(3, 3), 0), Error);
}

TEST(Hough, DefaultThreshold) {
  EXPECT_EQ(default_vote_threshold(400), 160);
  EXPECT_EQ(default_vote_threshold(10), 10);
}
