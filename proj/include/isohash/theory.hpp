#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "isohash/core.hpp"
#include "isohash/metrics.hpp"
#include "isohash/parallel.hpp"
#include "isohash/random.hpp"

namespace isohash {

struct Lemma1Result {
  double alpha = 0.0;
  double sigma = 0.0;
  std::size_t n_samples = 0;
  double empirical_mean = 0.0;
  double bound = 0.0;
  bool holds = false;
};

/// 1 / (sigma sqrt(2 pi alpha)) + 2 exp(-sqrt(alpha)).
inline double lemma1_bound(double alpha, double sigma) {
  return 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi * alpha)) + 2.0 * std::exp(-std::sqrt(alpha));
}

/// Monte Carlo mean of |h(x) - sigma_alpha(x)| for x ~ N(0, sigma^2). Samples come in fixed
/// blocks with per-block seeds, so the estimate does not depend on the thread count.
inline Lemma1Result lemma1_empirical(double alpha, double sigma, std::size_t n_samples, std::uint64_t seed) {
  if (!(alpha > 0.0) || !(sigma > 0.0)) throw std::invalid_argument("alpha and sigma must be positive");
  if (n_samples < 10000) throw std::invalid_argument("lemma1 needs at least 1e4 samples");
  const ChunkPlan plan{n_samples, 1 << 16};
  std::vector<double> sums(plan.count(), 0.0);
  parallel_for(plan.count(), [&](std::size_t ch) {
    Rng rng(mix_seed(seed, ch));
    double s = 0.0;
    for (std::size_t k = plan.begin(ch); k < plan.end(ch); ++k) s += sigmoid_gap(rng.normal(0.0, sigma), alpha);
    sums[ch] = s;
  });
  Lemma1Result r;
  r.alpha = alpha;
  r.sigma = sigma;
  r.n_samples = n_samples;
  r.empirical_mean = std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(n_samples);
  r.bound = lemma1_bound(alpha, sigma);
  r.holds = r.empirical_mean <= r.bound;
  return r;
}

struct GaussianMixtureSpec {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : static_cast<std::size_t>(means.front().size()); }
};

/// Throws DataError on inconsistent shapes, bad weights, or a covariance that is not symmetric PSD.
inline void validate(const GaussianMixtureSpec& spec) {
  const std::size_t p = spec.weights.size();
  if (p == 0) throw DataError("mixture needs at least one component");
  if (spec.means.size() != p || spec.covariances.size() != p) {
    throw DimensionError("mixture has " + std::to_string(p) + " weights, " + std::to_string(spec.means.size()) +
                         " means and " + std::to_string(spec.covariances.size()) + " covariances");
  }
  double total = 0.0;
  for (double w : spec.weights) {
    if (!(w >= 0.0)) throw DataError("mixture weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DataError("mixture weights sum to " + std::to_string(total));
  const auto n = static_cast<Eigen::Index>(spec.dim());
  for (std::size_t k = 0; k < p; ++k) {
    const Matrix& S = spec.covariances[k];
    if (spec.means[k].size() != n || S.rows() != n || S.cols() != n) {
      throw DimensionError("component " + std::to_string(k) + " has mean length " +
                           std::to_string(spec.means[k].size()) + " and covariance " + shape_str(S.rows(), S.cols()));
    }
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw DataError("covariance " + std::to_string(k) + " is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(S), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw DataError("covariance " + std::to_string(k) + " is not positive semidefinite (min eigenvalue " +
                      std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
  }
}

/// Q draws: component by weight, then mu + A z with A A^T = Sigma from the eigendecomposition.
/// Returns raw (unpreprocessed) points.
inline Dataset sample_mixture(const GaussianMixtureSpec& spec, std::size_t q, std::uint64_t seed,
                              std::vector<std::size_t>* components = nullptr) {
  validate(spec);
  const auto n = static_cast<Eigen::Index>(spec.dim());
  std::vector<Eigen::MatrixXd> factors;
  for (const Matrix& S : spec.covariances) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(S)};
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factors.push_back(es.eigenvectors() * root.asDiagonal());
  }
  Rng rng(seed);
  Matrix pts(static_cast<Eigen::Index>(q), n);
  if (components != nullptr) components->assign(q, 0);
  Eigen::VectorXd z(n);
  for (std::size_t r = 0; r < q; ++r) {
    const double u = rng.uniform();
    std::size_t comp = 0;
    double acc = spec.weights[0];
    while (u >= acc && comp + 1 < spec.components()) acc += spec.weights[++comp];
    for (Eigen::Index k = 0; k < n; ++k) z[k] = rng.normal();
    pts.row(static_cast<Eigen::Index>(r)) = (spec.means[comp] + factors[comp] * z).transpose();
    if (components != nullptr) (*components)[r] = comp;
  }
  return Dataset(std::move(pts));
}

/// P equal-weight isotropic components in R^N with means separation * e_p and covariance
/// spread^2 I. Needs P <= N.
inline GaussianMixtureSpec planted_mixture(std::size_t components, std::size_t dim, double separation, double spread) {
  if (components < 1 || components > dim) throw std::invalid_argument("planted mixture needs 1 <= P <= N");
  GaussianMixtureSpec spec;
  for (std::size_t p = 0; p < components; ++p) {
    spec.weights.push_back(1.0 / static_cast<double>(components));
    Vector mu = Vector::Zero(static_cast<Eigen::Index>(dim));
    mu[static_cast<Eigen::Index>(p)] = separation;
    spec.means.push_back(mu);
    spec.covariances.push_back(Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)) *
                               (spread * spread));
  }
  // Equal weights that do not sum to exactly 1 in floating point.
  double total = 0.0;
  for (double w : spec.weights) total += w;
  spec.weights.back() += 1.0 - total;
  return spec;
}

struct GapReport {
  std::size_t k = 0;
  double delta = 0.0;
  double lambda = 0.0;
  std::vector<std::uint32_t> queries;
  std::vector<double> per_query_gap;              // parallel to queries
  std::vector<std::uint32_t> satisfied_queries;   // gap >= 2 delta
  std::vector<bool> preserved;                    // parallel to satisfied_queries
  std::size_t violations = 0;

  bool all_preserved() const { return violations == 0; }
};

/// For every query whose ambient gap d_(k+1) - d_(k) (the minimum of d_n - d_m over m <= k < n)
/// is at least 2 delta, checks that each ambient k-NN member is no farther in Hamming distance
/// than any non-member. Such a query cannot fail when delta bounds every pair.
inline GapReport knn_sufficiency_check(const BinaryCodes& codes, const Dataset& data,
                                       std::span<const std::uint32_t> queries, std::size_t k) {
  if (k == 0 || k + 1 >= data.size()) {
    throw std::invalid_argument("k must satisfy 1 <= k < Q - 1 (k = " + std::to_string(k) + ", Q = " +
                                std::to_string(data.size()) + ")");
  }
  if (codes.rows() != data.size()) throw DimensionError("codes and data disagree on Q");
  for (auto q : queries)
    if (q >= data.size()) throw std::out_of_range("query index " + std::to_string(q) + " out of range");

  const DistortionReport dist = max_distortion(codes, data, 1);
  GapReport rep;
  rep.k = k;
  rep.delta = dist.delta;
  rep.lambda = dist.lambda_star;
  rep.queries.assign(queries.begin(), queries.end());
  rep.per_query_gap.assign(queries.size(), 0.0);
  std::vector<char> ok(queries.size(), 1);

  parallel_for(queries.size(), [&](std::size_t qi) {
    const std::uint32_t q = queries[qi];
    std::vector<std::pair<double, std::uint32_t>> by_dist;
    by_dist.reserve(data.size() - 1);
    for (std::uint32_t p = 0; p < data.size(); ++p)
      if (p != q) by_dist.emplace_back(ambient_distance(data, q, p), p);
    std::sort(by_dist.begin(), by_dist.end());
    const double gap = by_dist[k].first - by_dist[k - 1].first;
    rep.per_query_gap[qi] = gap;
    if (gap < 2.0 * rep.delta) return;
    std::uint32_t worst_member = 0;
    for (std::size_t r = 0; r < k; ++r) worst_member = std::max(worst_member, codes.distance(q, by_dist[r].second));
    std::uint32_t best_other = UINT32_MAX;
    for (std::size_t r = k; r < by_dist.size(); ++r) best_other = std::min(best_other, codes.distance(q, by_dist[r].second));
    ok[qi] = worst_member <= best_other ? 1 : 0;
  });

  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    if (rep.per_query_gap[qi] < 2.0 * rep.delta) continue;
    rep.satisfied_queries.push_back(queries[qi]);
    rep.preserved.push_back(ok[qi] != 0);
    if (ok[qi] == 0) ++rep.violations;
  }
  return rep;
}

inline GapReport knn_sufficiency_check(const HashModel& model, const Dataset& data,
                                       std::span<const std::uint32_t> queries, std::size_t k) {
  return knn_sufficiency_check(hash_codes(model, data), data, queries, k);
}

}  // namespace isohash
