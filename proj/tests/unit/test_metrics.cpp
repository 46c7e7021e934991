#include <gtest/gtest.h>

#include <numeric>

#include "helpers.hpp"
#include "oracles.hpp"

namespace isohash {
namespace {

// Points 0, 1, ..., q-1 on a line with unary codes: Hamming distance equals |i - j| exactly.
struct LineToy {
  Dataset data;
  BinaryCodes codes;
};

LineToy line_toy(std::size_t q) {
  Matrix pts(static_cast<Eigen::Index>(q), 1);
  BinaryCodes codes(q, q);
  for (std::size_t i = 0; i < q; ++i) {
    pts(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    for (std::size_t m = 0; m < i; ++m) codes.set(i, m, true);
  }
  return {Dataset(pts), codes};
}

TEST(Distortion, IdenticalPairHasZeroDelta) {
  const Dataset d(Matrix::Constant(2, 3, 0.7));
  HashModel m;
  m.W = gaussian_matrix(5, 3, 1);
  EXPECT_EQ(max_distortion(m, d).delta, 0.0);
}

TEST(Distortion, IsometricToyHasZeroDelta) {
  const auto toy = line_toy(12);
  const auto rep = max_distortion(toy.codes, toy.data);
  EXPECT_NEAR(rep.delta, 0.0, 1e-12);
  EXPECT_NEAR(rep.lambda_star, 1.0, 1e-12);
}

TEST(Distortion, MatchesDenseRecomputation) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset d = testing::unit_random(30, 10, seed);
    HashModel m;
    m.W = gaussian_matrix(4 + seed, 10, seed + 100);
    const auto codes = hash_codes(m, d);
    const auto rep = max_distortion(codes, d);
    EXPECT_NEAR(rep.delta, oracle::dense_delta(codes, d), 1e-12);
    EXPECT_EQ(rep.pair_count, 435U);
    const auto& w = rep.worst_secant;
    EXPECT_NEAR(std::abs(rep.lambda_star * codes.distance(w.i, w.j) - w.c), rep.delta, 1e-12);
    const auto total = std::accumulate(rep.histogram.counts.begin(), rep.histogram.counts.end(), std::uint64_t{0});
    EXPECT_EQ(total, 435U);
  }
}

TEST(Distortion, SecantSubsetPathAgrees) {
  const Dataset d = testing::unit_random(25, 6, 3);
  const auto codes = hash_codes(lsh_model(8, d, 4), d);
  const auto all = all_secants(d);
  const auto a = max_distortion(codes, d);
  const auto b = distortion_over_secants(codes, all);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.lambda_star, b.lambda_star);
}

TEST(Distortion, ScalesWithData) {
  const Dataset d = testing::unit_random(30, 8, 5);
  HashModel m;
  m.W = gaussian_matrix(6, 8, 6);
  Dataset d3(d.points * 3.0);
  const auto a = max_distortion(m, d);
  const auto b = max_distortion(m, d3);
  EXPECT_NEAR(b.delta, 3.0 * a.delta, 1e-12);
  EXPECT_NEAR(b.lambda_star, 3.0 * a.lambda_star, 1e-12);
}

TEST(Distortion, IndependentOfThreadCount) {
  const Dataset d = testing::unit_random(400, 5, 7);
  const auto codes = hash_codes(lsh_model(12, d, 8), d);
  set_thread_count(1);
  const auto a = max_distortion(codes, d);
  set_thread_count(5);
  const auto b = max_distortion(codes, d);
  set_thread_count(0);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.histogram.counts, b.histogram.counts);
  EXPECT_EQ(a.worst_secant.i, b.worst_secant.i);
}

TEST(Map, IsometricToyGivesOne) {
  const auto toy = line_toy(15);
  const auto q = all_queries(15);
  EXPECT_EQ(map_at_k(toy.codes, toy.data, q, 4).map, 1.0);
  EXPECT_EQ(kendall_tau_at_k(toy.codes, toy.data, q, 4).mean_tau, 1.0);
}

TEST(Map, ConstantCodesHandEnumerated) {
  // Hamming lists are the 5 lowest indices; ambient lists on the line are worked out by hand.
  const auto toy = line_toy(20);
  const BinaryCodes flat(20, 3);
  const auto rep = map_at_k(flat, toy.data, all_queries(20), 5);
  const std::vector<double> expected{1, 1, 1, 1, 0.8, 0.6, 0.4, 0.2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  ASSERT_EQ(rep.per_query_ap.size(), 20U);
  for (std::size_t q = 0; q < 20; ++q) EXPECT_NEAR(rep.per_query_ap[q], expected[q], 1e-15) << "query " << q;
  EXPECT_NEAR(rep.map, 0.3, 1e-15);
}

TEST(Tau, ReversedRankingGivesMinusOne) {
  const std::size_t k = 6;
  Matrix pts(k + 1, 1);
  BinaryCodes codes(k + 1, k);
  for (std::size_t i = 0; i <= k; ++i) {
    pts(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    if (i > 0)
      for (std::size_t m = 0; m < k - i + 1; ++m) codes.set(i, m, true);
  }
  const std::vector<std::uint32_t> q{0};
  EXPECT_EQ(kendall_tau_at_k(codes, Dataset(pts), q, k).mean_tau, -1.0);
}

TEST(Tau, OneAdjacentSwap) {
  Matrix pts(4, 1);
  pts << 0, 1, 2, 3;
  Eigen::Matrix<int, 4, 3, Eigen::RowMajor> bits;
  bits << 0, 0, 0,  //
      1, 0, 0,      //
      1, 1, 1,      //
      1, 1, 0;
  const std::vector<std::uint32_t> q{0};
  EXPECT_NEAR(kendall_tau_at_k(BinaryCodes::pack(bits), Dataset(pts), q, 3).mean_tau, 1.0 / 3.0, 1e-15);
}

TEST(Neighbors, MatchBruteForceExactly) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = testing::unit_random(50, 12, seed);
    const auto codes = hash_codes(lsh_model(10, d, seed + 50), d);
    const auto q = all_queries(50);
    for (std::size_t k : {2U, 5U, 10U, 49U}) {
      const auto ap = oracle::average_precision(codes, d, q, k);
      const auto tau = oracle::kendall_tau(codes, d, q, k);
      const auto m = map_at_k(codes, d, q, k);
      const auto t = kendall_tau_at_k(codes, d, q, k);
      EXPECT_EQ(m.per_query_ap, ap) << "seed " << seed << " k " << k;
      EXPECT_EQ(t.per_query_tau, tau) << "seed " << seed << " k " << k;
      EXPECT_EQ(m.map, std::accumulate(ap.begin(), ap.end(), 0.0) / 50.0);
      EXPECT_EQ(t.mean_tau, std::accumulate(tau.begin(), tau.end(), 0.0) / 50.0);
    }
  }
}

TEST(Neighbors, ArgumentErrors) {
  const auto toy = line_toy(10);
  const auto q = all_queries(10);
  EXPECT_THROW(map_at_k(toy.codes, toy.data, q, 0), std::invalid_argument);
  EXPECT_THROW(map_at_k(toy.codes, toy.data, q, 10), std::invalid_argument);
  EXPECT_THROW(kendall_tau_at_k(toy.codes, toy.data, q, 1), std::invalid_argument);
  const std::vector<std::uint32_t> bad{10};
  EXPECT_THROW(map_at_k(toy.codes, toy.data, bad, 3), std::out_of_range);
}

TEST(Report, JsonSchema) {
  const auto toy = line_toy(8);
  const auto dist = max_distortion(toy.codes, toy.data);
  const auto j = metric_json("map", std::size_t{3}, 8, 0.5, {0.5}, dist);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  const std::vector<std::string> want{"metric", "k", "M", "value", "per_query", "lambda_star", "delta"};
  EXPECT_EQ(keys, want);
  EXPECT_TRUE(metric_json("delta", std::nullopt, 8, 0.0, {}, dist)["k"].is_null());
}

}  // namespace
}  // namespace isohash
