// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "dpa/errors.hpp"
#include "dpa/metrics.hpp"
#include "metric_oracles.hpp"

namespace dpa {
namespace {

Mask from_rows(std::initializer_list<const char*> rows) {
  const auto h = rows.size(), w = std::strlen(*rows.begin());
  Mask m(h, w);
  std::size_t y = 0;
  for (const char* r : rows) {
    for (std::size_t x = 0; x < w; ++x) m.at(y, x) = r[x] == '#';
    ++y;
  }
  return m;
}

Mask square(std::size_t n, std::size_t y0, std::size_t x0, std::size_t side) {
  Mask m(n, n);
  for (auto y = y0; y < y0 + side; ++y)
    for (auto x = x0; x < x0 + side; ++x) m.at(y, x) = 1;
  return m;
}

TEST(RegionSimilarity, Examples) {
  const auto a = square(8, 1, 1, 4);
  EXPECT_EQ(region_similarity(a, a), 1.0);
  EXPECT_EQ(region_similarity(a, square(8, 5, 5, 3)), 0.0);
  EXPECT_EQ(region_similarity(from_rows({"#.", ".."}), from_rows({"##", ".."})), 0.5);
  EXPECT_EQ(region_similarity(Mask(4, 4), Mask(4, 4)), 1.0);
}

TEST(RegionSimilarity, ResolutionMismatchThrows) {
  EXPECT_THROW(region_similarity(Mask(4, 4), Mask(4, 5)), DimensionError);
  EXPECT_THROW(boundary_accuracy(Mask(4, 4), Mask(5, 4)), DimensionError);
}

TEST(RegionSimilarity, MatchesPixelCountOracleAndIsSymmetric) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto h = std::uniform_int_distribution<std::size_t>(1, 32)(rng);
    const auto w = std::uniform_int_distribution<std::size_t>(1, 32)(rng);
    const double density = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto a = oracle::random_mask(rng, h, w, density), b = oracle::random_mask(rng, h, w, density);
    EXPECT_EQ(region_similarity(a, b), oracle::jaccard(a, b));
    EXPECT_EQ(region_similarity(a, b), region_similarity(b, a));
  }
}

TEST(RegionSimilarity, AddingACorrectPixelNeverDecreasesJ) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 300; ++i) {
    const auto h = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    const auto w = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    const auto gt = oracle::random_mask(rng, h, w, 0.5);
    auto pred = oracle::random_mask(rng, h, w, 0.3);
    double prev = region_similarity(pred, gt);
    for (std::size_t p = 0; p < pred.pixels.size(); ++p) {
      if (!gt.pixels[p] || pred.pixels[p]) continue;
      pred.pixels[p] = 1;
      const double j = region_similarity(pred, gt);
      ASSERT_GE(j, prev);
      prev = j;
    }
    if (gt.area() > 0 && pred.area() == gt.area()) {
      EXPECT_EQ(prev, 1.0);
    }
  }
}

TEST(BoundaryMap, FourAdjacencyAndImageEdge) {
  const auto m = from_rows({"####.",
                            "####.",
                            "####.",
                            "....."});
  const auto b = boundary_map(m);
  const auto expect = from_rows({"####.",
                                 "#..#.",
                                 "####.",
                                 "....."});
  EXPECT_EQ(b.pixels, expect.pixels);
  // A full mask touches the image edge everywhere along its rim.
  Mask full(4, 4);
  std::fill(full.pixels.begin(), full.pixels.end(), 1);
  EXPECT_EQ(boundary_map(full).area(), 12u);
}

TEST(BoundaryTolerance, ScalesWithDiagonal) {
  EXPECT_EQ(boundary_tolerance(32, 32), 1);
  EXPECT_EQ(boundary_tolerance(64, 64), 1);
  EXPECT_EQ(boundary_tolerance(480, 854), 7);
}

TEST(BoundaryAccuracy, Examples) {
  const auto a = square(16, 3, 3, 6);
  EXPECT_EQ(boundary_accuracy(a, a), 1.0);
  EXPECT_EQ(boundary_accuracy(Mask(16, 16), a), 0.0);
  EXPECT_EQ(boundary_accuracy(a, Mask(16, 16)), 0.0);
  EXPECT_EQ(boundary_accuracy(Mask(16, 16), Mask(16, 16)), 1.0);
}

TEST(BoundaryAccuracy, ShiftedSquareMatchesAllPairsOracle) {
  const auto gt = square(16, 4, 4, 6);
  for (std::size_t s = 0; s <= 4; ++s)
    for (int r = 1; r <= 3; ++r) {
      const auto pred = square(16, 4 + s, 4 + s / 2, 6);
      EXPECT_EQ(boundary_accuracy(pred, gt, r), oracle::boundary_f(pred, gt, r)) << s << " " << r;
    }
  // Shift by one with radius one: every boundary pixel is within reach.
  EXPECT_EQ(boundary_accuracy(square(16, 5, 4, 6), gt, 1), 1.0);
  // Shift by three: only the overlapping rim segments match.
  const double f = boundary_accuracy(square(16, 4, 7, 6), gt, 1);
  EXPECT_GT(f, 0.0);
  EXPECT_LT(f, 1.0);
}

TEST(BoundaryAccuracy, MatchesAllPairsOracleAndIsSymmetric) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 300; ++i) {
    const auto h = std::uniform_int_distribution<std::size_t>(1, 32)(rng);
    const auto w = std::uniform_int_distribution<std::size_t>(1, 32)(rng);
    const bool blobs = i % 2 == 0;
    const auto a = blobs ? oracle::random_blobs(rng, h, w) : oracle::random_mask(rng, h, w, 0.2);
    const auto b = blobs ? oracle::random_blobs(rng, h, w) : oracle::random_mask(rng, h, w, 0.2);
    const int r = boundary_tolerance(h, w) + i % 3;
    EXPECT_EQ(boundary_accuracy(a, b, r), oracle::boundary_f(a, b, r));
    EXPECT_EQ(boundary_accuracy(a, b, r), boundary_accuracy(b, a, r));
    const double f = boundary_accuracy(a, b);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
}

std::vector<Mask> frames(std::initializer_list<Mask> ms) { return ms; }

TEST(Evaluate, PerfectPredictionsScoreOne) {
  std::vector<MaskSequence> gt{{"a", frames({square(8, 1, 1, 3), square(8, 2, 2, 3)})},
                               {"b", frames({square(8, 0, 0, 8), Mask(8, 8)})}};
  const auto r = evaluate(gt, gt);
  EXPECT_EQ(r.j_mean, 1.0);
  EXPECT_EQ(r.f_mean, 1.0);
  EXPECT_EQ(r.g_mean, 1.0);
  ASSERT_EQ(r.per_sequence.size(), 2u);
}

TEST(Evaluate, AveragesFramesThenSequences) {
  std::mt19937_64 rng(14);
  std::vector<MaskSequence> gt, pred;
  for (int s = 0; s < 3; ++s) {
    MaskSequence g{"seq" + std::to_string(s), {}}, p{g.id, {}};
    for (int t = 0; t < 2 + s; ++t) {
      g.masks.push_back(oracle::random_blobs(rng, 16, 16));
      p.masks.push_back(oracle::random_blobs(rng, 16, 16));
    }
    gt.push_back(g);
    pred.push_back(p);
  }
  // Prediction order does not matter; sequences pair by id.
  std::swap(pred[0], pred[2]);
  const auto r = evaluate(pred, gt);
  double jm = 0, fm = 0;
  for (std::size_t s = 0; s < gt.size(); ++s) {
    const auto& p = pred[gt.size() - 1 - s];
    double j = 0, f = 0;
    for (std::size_t t = 0; t < gt[s].masks.size(); ++t) {
      j += oracle::jaccard(p.masks[t], gt[s].masks[t]);
      f += oracle::boundary_f(p.masks[t], gt[s].masks[t], 1);
    }
    j /= static_cast<double>(gt[s].masks.size());
    f /= static_cast<double>(gt[s].masks.size());
    EXPECT_EQ(r.per_sequence[s].id, gt[s].id);
    EXPECT_NEAR(r.per_sequence[s].j, j, 1e-12);
    EXPECT_NEAR(r.per_sequence[s].f, f, 1e-12);
    EXPECT_NEAR(r.per_sequence[s].g, (j + f) / 2, 1e-12);
    jm += j;
    fm += f;
  }
  EXPECT_NEAR(r.j_mean, jm / 3, 1e-12);
  EXPECT_NEAR(r.f_mean, fm / 3, 1e-12);
  EXPECT_NEAR(r.g_mean, (r.j_mean + r.f_mean) / 2, 1e-12);
}

TEST(Evaluate, MismatchedInputsThrow) {
  std::vector<MaskSequence> gt{{"a", frames({Mask(4, 4), Mask(4, 4)})}};
  std::vector<MaskSequence> short_pred{{"a", frames({Mask(4, 4)})}};
  std::vector<MaskSequence> wrong_id{{"z", frames({Mask(4, 4), Mask(4, 4)})}};
  EXPECT_THROW(evaluate(short_pred, gt), ArgumentError);
  EXPECT_THROW(evaluate(wrong_id, gt), ArgumentError);
  EXPECT_THROW(evaluate({}, gt), ArgumentError);
}

TEST(Report, CsvAndTextLayout) {
  MetricReport r;
  r.per_sequence = {{"alpha", 0.5, 0.25, 0.375}};
  r.j_mean = 0.5;
  r.f_mean = 0.25;
  r.g_mean = 0.375;
  std::ostringstream csv, text;
  write_report_csv(csv, r);
  write_report_text(text, r);
  EXPECT_EQ(csv.str(), "sequence,J,F,G\nalpha,0.500000,0.250000,0.375000\nmean,0.500000,0.250000,0.375000\n");
  EXPECT_EQ(text.str(),
            "sequence       J       F       G\n"
            "alpha      0.500   0.250   0.375\n"
            "mean       0.500   0.250   0.375\n");
}

}  // namespace
}  // namespace dpa
