#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "isohash/core.hpp"
#include "isohash/lambda_fit.hpp"
#include "isohash/metrics.hpp"
#include "isohash/parallel.hpp"
#include "isohash/random.hpp"

namespace isohash {

/// Random-projection hashing: W ~ N(0, I) under seed, lambda = lambda* on the training data.
/// The same seed gives the matrix NIBH starts from.
inline HashModel lsh_model(std::size_t bits, const Dataset& train, std::uint64_t seed) {
  if (bits < 1 || train.dim() < 1) throw std::invalid_argument("LSH needs M >= 1 and N >= 1");
  HashModel model;
  model.W = gaussian_matrix(bits, train.dim(), seed);
  model.mean = train.mean;
  model.normalized = train.normalized;
  model.alpha = 10.0;
  model.lambda = max_distortion(model, train, 1).lambda_star;
  return model;
}

enum class NormKind { linf, l2 };

inline const char* to_string(NormKind k) { return k == NormKind::linf ? "linf" : "l2"; }

struct GridSearchResult {
  double best_angle = 0.0;
  double distortion = 0.0;
  double scale = 0.0;
  NormKind norm_kind = NormKind::linf;
  std::vector<std::pair<double, double>> profile;  // (angle, distortion)
};

/// Distortion of the line through the origin at angle theta: min over lambda > 0 of
/// ||lambda p - c|| in the chosen norm, p = projected 1-D distances, c = 2-D distances.
/// Returns (distortion, lambda).
inline std::pair<double, double> line_distortion(const Matrix& points, double theta, NormKind kind) {
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const auto q = static_cast<std::size_t>(points.rows());
  std::vector<double> p;
  std::vector<double> c;
  p.reserve(pair_count(q));
  c.reserve(pair_count(q));
  for (std::size_t i = 1; i < q; ++i) {
    const double pi = ct * points(i, 0) + st * points(i, 1);
    for (std::size_t j = 0; j < i; ++j) {
      const double pj = ct * points(j, 0) + st * points(j, 1);
      p.push_back(std::abs(pi - pj));
      c.push_back(std::hypot(points(i, 0) - points(j, 0), points(i, 1) - points(j, 1)));
    }
  }
  const bool flat = std::all_of(p.begin(), p.end(), [](double x) { return x == 0.0; });
  if (kind == NormKind::linf) {
    if (flat) return {*std::max_element(c.begin(), c.end()), 0.0};
    const auto fit = fit_lambda_chebyshev(p, c);
    return {fit.delta, fit.lambda};
  }
  double cc = 0.0;
  double pp = 0.0;
  double pc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    cc += c[k] * c[k];
    pp += p[k] * p[k];
    pc += p[k] * c[k];
  }
  if (flat) return {std::sqrt(cc), 0.0};
  const double lambda = pc / pp;
  double ss = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) ss += (lambda * p[k] - c[k]) * (lambda * p[k] - c[k]);
  return {std::sqrt(ss), lambda};
}

/// Evaluates every angle pi k / grid_steps, k < grid_steps, and returns the first minimizer.
inline GridSearchResult grid_search_embedding_1d(const Matrix& points, NormKind kind, std::size_t grid_steps = 3600) {
  if (points.cols() != 2) throw DimensionError("grid search needs 2-D points, got " + shape_str(points.rows(), points.cols()));
  if (points.rows() < 2) throw DataError("grid search needs at least two points");
  if (grid_steps < 2) throw std::invalid_argument("grid_steps must be at least 2");
  GridSearchResult out;
  out.norm_kind = kind;
  out.profile.resize(grid_steps);
  std::vector<double> scales(grid_steps);
  parallel_for(grid_steps, [&](std::size_t k) {
    const double theta = std::numbers::pi * static_cast<double>(k) / static_cast<double>(grid_steps);
    const auto [d, lambda] = line_distortion(points, theta, kind);
    out.profile[k] = {theta, d};
    scales[k] = lambda;
  });
  std::size_t best = 0;
  for (std::size_t k = 1; k < grid_steps; ++k)
    if (out.profile[k].second < out.profile[best].second) best = k;
  out.best_angle = out.profile[best].first;
  out.distortion = out.profile[best].second;
  out.scale = scales[best];
  return out;
}

enum class Fig1Label { circle, square, star };

inline const char* to_string(Fig1Label l) {
  switch (l) {
    case Fig1Label::circle: return "circle";
    case Fig1Label::square: return "square";
    case Fig1Label::star: return "star";
  }
  return "unknown";
}

struct Fig1Dataset {
  Matrix points;  // 70 x 2
  std::vector<Fig1Label> labels;
};

/// Seed for which the shipped geometry shows the contrast; checked by fig1_contrast.
inline constexpr std::uint64_t kFig1Seed = 0;

/// Five circles near (0.3, 1), five squares near (0.1, 2) and sixty stars along the x-axis from
/// 10 to 25. The query sits at the origin. Points within a cluster are stratified (one jittered
/// slot each) so their order seen from the query is not a near tie. Rows: circles, squares, stars.
inline Fig1Dataset make_fig1_dataset(std::uint64_t seed) {
  Rng rng(seed);
  Fig1Dataset out;
  out.points.resize(70, 2);
  Eigen::Index r = 0;
  auto put = [&](double x, double y, Fig1Label l) {
    out.points(r, 0) = x;
    out.points(r, 1) = y;
    out.labels.push_back(l);
    ++r;
  };
  for (int k = 0; k < 5; ++k) put(rng.normal(0.3, 0.01), 0.75 + 0.1 * k + rng.uniform(0.0, 0.02), Fig1Label::circle);
  for (int k = 0; k < 5; ++k) put(rng.normal(0.1, 0.01), 1.75 + 0.1 * k + rng.uniform(0.0, 0.02), Fig1Label::square);
  for (int k = 0; k < 60; ++k) put(10.0 + 0.25 * k + rng.uniform(0.0, 0.05), rng.normal(0.0, 0.02), Fig1Label::star);
  return out;
}

struct NnOrderComparison {
  std::vector<std::uint32_t> ambient_order;   // by distance to the query, ties by index
  std::vector<std::uint32_t> embedded_order;  // by |projection - projected query|, ties by index
  bool full_order_preserved = false;
  std::size_t circle_square_misordered = 0;  // pairs whose relative order flips
};

inline NnOrderComparison compare_nn_order(const Fig1Dataset& ds, double theta, double qx = 0.0, double qy = 0.0) {
  const auto n = static_cast<std::size_t>(ds.points.rows());
  std::vector<double> amb(n);
  std::vector<double> emb(n);
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double pq = ct * qx + st * qy;
  for (std::size_t k = 0; k < n; ++k) {
    amb[k] = std::hypot(ds.points(k, 0) - qx, ds.points(k, 1) - qy);
    emb[k] = std::abs(ct * ds.points(k, 0) + st * ds.points(k, 1) - pq);
  }
  auto order_by = [&](const std::vector<double>& key) {
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0U);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return key[a] != key[b] ? key[a] < key[b] : a < b; });
    return idx;
  };
  NnOrderComparison out;
  out.ambient_order = order_by(amb);
  out.embedded_order = order_by(emb);
  out.full_order_preserved = out.ambient_order == out.embedded_order;
  for (std::size_t a = 0; a < n; ++a) {
    if (ds.labels[a] != Fig1Label::circle) continue;
    for (std::size_t b = 0; b < n; ++b) {
      if (ds.labels[b] != Fig1Label::square) continue;
      if ((amb[a] < amb[b]) != (emb[a] < emb[b])) ++out.circle_square_misordered;
    }
  }
  return out;
}

struct Fig1Contrast {
  GridSearchResult linf;
  GridSearchResult l2;
  NnOrderComparison linf_order;
  NnOrderComparison l2_order;
  bool holds = false;  // linf keeps the whole order and l2 flips a circle/square pair
};

inline Fig1Contrast fig1_contrast(const Fig1Dataset& ds, std::size_t grid_steps = 3600) {
  Fig1Contrast out;
  out.linf = grid_search_embedding_1d(ds.points, NormKind::linf, grid_steps);
  out.l2 = grid_search_embedding_1d(ds.points, NormKind::l2, grid_steps);
  out.linf_order = compare_nn_order(ds, out.linf.best_angle);
  out.l2_order = compare_nn_order(ds, out.l2.best_angle);
  out.holds = out.linf_order.full_order_preserved && out.l2_order.circle_square_misordered > 0;
  return out;
}

/// make_fig1_dataset plus the contrast check; throws CheckFailure for seeds that do not show it.
inline Fig1Dataset checked_fig1_dataset(std::uint64_t seed, std::size_t grid_steps = 3600) {
  Fig1Dataset ds = make_fig1_dataset(seed);
  const auto c = fig1_contrast(ds, grid_steps);
  if (!c.holds) {
    throw CheckFailure("seed " + std::to_string(seed) + " does not reproduce the contrast (linf order preserved: " +
                       (c.linf_order.full_order_preserved ? "yes" : "no") + ", l2 circle/square flips: " +
                       std::to_string(c.l2_order.circle_square_misordered) + "); the shipped seed is " +
                       std::to_string(kFig1Seed));
  }
  return ds;
}

}  // namespace isohash
