#include <gtest/gtest.h>

#include <numbers>

#include "helpers.hpp"

namespace isohash {
namespace {

TEST(Lsh, DeterministicAndGaussian) {
  const Dataset d = testing::unit_random(20, 1000, 0);
  const auto a = lsh_model(100, d, 5);
  const auto b = lsh_model(100, d, 5);
  EXPECT_EQ(a.W, b.W);
  EXPECT_NE(a.W, lsh_model(100, d, 6).W);
  // 1e5 standard normal entries: mean within 5 sigma of 0, variance within 5 sigma of 1.
  const double n = static_cast<double>(a.W.size());
  const double mean = a.W.mean();
  const double var = (a.W.array() - mean).square().sum() / (n - 1);
  EXPECT_LT(std::abs(mean), 5.0 / std::sqrt(n));
  EXPECT_LT(std::abs(var - 1.0), 5.0 * std::sqrt(2.0 / n));
  EXPECT_EQ(a.lambda, max_distortion(a, d).lambda_star);
}

TEST(Lsh, MatchesNibhStartingPoint) {
  EXPECT_EQ(lsh_model(7, testing::unit_random(10, 4, 1), 3).W, gaussian_matrix(7, 4, 3));
}

TEST(LineEmbedding, CollinearPointsEmbedExactly) {
  const double theta = 0.7;
  Matrix pts(6, 2);
  for (int k = 0; k < 6; ++k) {
    const double t = 0.3 * k * k - 1.0;
    pts(k, 0) = t * std::cos(theta);
    pts(k, 1) = t * std::sin(theta);
  }
  for (auto kind : {NormKind::linf, NormKind::l2}) {
    const auto [d, lambda] = line_distortion(pts, theta, kind);
    EXPECT_NEAR(d, 0.0, 1e-12) << to_string(kind);
    EXPECT_NEAR(lambda, 1.0, 1e-12);
    // Any other non-perpendicular line is a rescaled copy.
    EXPECT_NEAR(line_distortion(pts, theta + 0.5, kind).first, 0.0, 1e-12);
    EXPECT_NEAR(grid_search_embedding_1d(pts, kind, 1000).distortion, 0.0, 1e-12);
  }
}

TEST(LineEmbedding, CircleIsQuarterTurnSymmetric) {
  Matrix pts(8, 2);
  for (int k = 0; k < 8; ++k) {
    pts(k, 0) = std::cos(k * std::numbers::pi / 4);
    pts(k, 1) = std::sin(k * std::numbers::pi / 4);
  }
  for (auto kind : {NormKind::linf, NormKind::l2})
    for (double t : {0.0, 0.3, 1.1}) {
      EXPECT_NEAR(line_distortion(pts, t, kind).first, line_distortion(pts, t + std::numbers::pi / 2, kind).first, 1e-9);
    }
}

TEST(LineEmbedding, L2ScaleIsTheOneDimensionalMinimizer) {
  const Matrix pts = gen_random_dataset(15, 2, 4).points;
  const auto [d, lambda] = line_distortion(pts, 0.4, NormKind::l2);
  // Dense scan over lambda of the residual norm.
  const double ct = std::cos(0.4), st = std::sin(0.4);
  double best = std::numeric_limits<double>::infinity();
  for (int s = 1; s <= 200000; ++s) {
    const double l = 5.0 * s / 200000;
    double ss = 0.0;
    for (int i = 1; i < 15; ++i)
      for (int j = 0; j < i; ++j) {
        const double p = std::abs(ct * (pts(i, 0) - pts(j, 0)) + st * (pts(i, 1) - pts(j, 1)));
        const double c = std::hypot(pts(i, 0) - pts(j, 0), pts(i, 1) - pts(j, 1));
        ss += (l * p - c) * (l * p - c);
      }
    best = std::min(best, std::sqrt(ss));
  }
  EXPECT_LE(d, best + 1e-12);
  EXPECT_NEAR(d, best, 1e-6);
  EXPECT_GT(lambda, 0.0);
}

TEST(LineEmbedding, GridReturnsTheProfileMinimum) {
  const Matrix pts = gen_random_dataset(12, 2, 5).points;
  const auto g = grid_search_embedding_1d(pts, NormKind::linf, 360);
  ASSERT_EQ(g.profile.size(), 360U);
  for (const auto& [theta, d] : g.profile) EXPECT_GE(d, g.distortion);
  EXPECT_EQ(line_distortion(pts, g.best_angle, NormKind::linf).first, g.distortion);
  EXPECT_THROW(grid_search_embedding_1d(Matrix::Zero(4, 3), NormKind::l2), DimensionError);
}

TEST(Fig1, DatasetComposition) {
  const auto ds = make_fig1_dataset(kFig1Seed);
  ASSERT_EQ(ds.points.rows(), 70);
  int counts[3] = {0, 0, 0};
  for (auto l : ds.labels) ++counts[static_cast<int>(l)];
  EXPECT_EQ(counts[0], 5);
  EXPECT_EQ(counts[1], 5);
  EXPECT_EQ(counts[2], 60);
  EXPECT_EQ(ds.points, make_fig1_dataset(kFig1Seed).points);
}

TEST(Fig1, ShippedSeedShowsTheContrast) {
  const auto c = fig1_contrast(checked_fig1_dataset(kFig1Seed));
  EXPECT_TRUE(c.holds);
  EXPECT_TRUE(c.linf_order.full_order_preserved);
  EXPECT_GT(c.l2_order.circle_square_misordered, 0U);
  EXPECT_LT(c.linf.distortion, line_distortion(make_fig1_dataset(kFig1Seed).points, c.l2.best_angle, NormKind::linf).first);
}

TEST(Fig1, SeedsWithoutTheContrastAreRejected) {
  int rejected = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto ds = make_fig1_dataset(seed);
    const bool holds = fig1_contrast(ds, 720).holds;
    if (!holds) {
      ++rejected;
      EXPECT_THROW(checked_fig1_dataset(seed, 720), CheckFailure);
    } else {
      EXPECT_NO_THROW(checked_fig1_dataset(seed, 720));
    }
  }
  RecordProperty("rejected_seeds", rejected);
}

TEST(Fig1, OrderComparisonOnAHandMadeCase) {
  Fig1Dataset ds;
  ds.points.resize(2, 2);
  ds.points << 1.0, 0.0, 0.0, 2.0;
  ds.labels = {Fig1Label::circle, Fig1Label::square};
  EXPECT_TRUE(compare_nn_order(ds, std::numbers::pi / 2).full_order_preserved);
  const auto flipped = compare_nn_order(ds, 0.0);
  EXPECT_FALSE(flipped.full_order_preserved);
  EXPECT_EQ(flipped.circle_square_misordered, 1U);
}

}  // namespace
}  // namespace isohash
