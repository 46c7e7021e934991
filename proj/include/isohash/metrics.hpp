#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isohash/core.hpp"
#include "isohash/lambda_fit.hpp"
#include "isohash/parallel.hpp"

namespace isohash {

struct DistortionHistogram {
  std::vector<double> edges;          // bins + 1 edges over [0, delta]
  std::vector<std::uint64_t> counts;  // pairs per bin
  std::vector<double> bin_max;        // largest residual in each bin, 0 when empty
};

struct DistortionReport {
  double delta = 0.0;
  double lambda_star = 0.0;
  SecantRef worst_secant;
  DistortionHistogram histogram;
  std::uint64_t pair_count = 0;
};

namespace detail {

// Extremes of the target distance among pairs sharing one Hamming distance. Only these
// 2 (M + 1) values can be active in max_k |lambda d_k - c_k|, so they determine lambda* exactly.
struct HammingBucket {
  std::uint64_t count = 0;
  double min_c = std::numeric_limits<double>::infinity();
  double max_c = -std::numeric_limits<double>::infinity();
  std::uint64_t min_key = 0;
  std::uint64_t max_key = 0;
  SecantRef min_pair;
  SecantRef max_pair;

  void add(std::uint64_t key, const SecantRef& s) {
    ++count;
    if (s.c < min_c || (s.c == min_c && key < min_key)) {
      min_c = s.c;
      min_key = key;
      min_pair = s;
    }
    if (s.c > max_c || (s.c == max_c && key < max_key)) {
      max_c = s.c;
      max_key = key;
      max_pair = s;
    }
  }

  void merge(const HammingBucket& o) {
    if (o.count == 0) return;
    count += o.count;
    if (o.min_c < min_c || (o.min_c == min_c && o.min_key < min_key)) {
      min_c = o.min_c;
      min_key = o.min_key;
      min_pair = o.min_pair;
    }
    if (o.max_c > max_c || (o.max_c == max_c && o.max_key < max_key)) {
      max_c = o.max_c;
      max_key = o.max_key;
      max_pair = o.max_pair;
    }
  }
};

inline constexpr std::size_t kPairChunk = 1 << 16;

struct BucketFit {
  ChebyshevFit fit;
  SecantRef worst;
  std::uint64_t pairs = 0;
};

inline BucketFit fit_buckets(const std::vector<HammingBucket>& buckets) {
  std::vector<double> v;
  std::vector<double> c;
  std::uint64_t pairs = 0;
  for (std::size_t d = 0; d < buckets.size(); ++d) {
    if (buckets[d].count == 0) continue;
    pairs += buckets[d].count;
    v.push_back(static_cast<double>(d));
    c.push_back(buckets[d].min_c);
    v.push_back(static_cast<double>(d));
    c.push_back(buckets[d].max_c);
  }
  if (v.empty()) throw DataError("distortion needs at least one pair");
  BucketFit out;
  out.pairs = pairs;
  out.fit = fit_lambda_chebyshev(v, c);

  double worst_r = -1.0;
  std::uint64_t worst_key = std::numeric_limits<std::uint64_t>::max();
  for (std::size_t d = 0; d < buckets.size(); ++d) {
    if (buckets[d].count == 0) continue;
    const double lam_d = out.fit.lambda * static_cast<double>(d);
    const std::pair<double, std::pair<std::uint64_t, const SecantRef*>> cands[2] = {
        {std::abs(lam_d - buckets[d].min_c), {buckets[d].min_key, &buckets[d].min_pair}},
        {std::abs(lam_d - buckets[d].max_c), {buckets[d].max_key, &buckets[d].max_pair}}};
    for (const auto& [r, kp] : cands) {
      if (r > worst_r || (r == worst_r && kp.first < worst_key)) {
        worst_r = r;
        worst_key = kp.first;
        out.worst = *kp.second;
      }
    }
  }
  out.fit.delta = worst_r;
  return out;
}

inline std::size_t histogram_bin(double r, double delta, std::size_t bins) {
  if (!(delta > 0.0)) return 0;
  const auto b = static_cast<std::size_t>(std::floor(r / delta * static_cast<double>(bins)));
  return std::min(b, bins - 1);
}

inline DistortionHistogram empty_histogram(double delta, std::size_t bins) {
  DistortionHistogram h;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = delta * static_cast<double>(b) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  h.bin_max.assign(bins, 0.0);
  return h;
}

inline void merge_histogram(DistortionHistogram& into, const DistortionHistogram& part) {
  for (std::size_t b = 0; b < into.counts.size(); ++b) {
    into.counts[b] += part.counts[b];
    into.bin_max[b] = std::max(into.bin_max[b], part.bin_max[b]);
  }
}

}  // namespace detail

/// delta = inf_lambda max_{pairs} |lambda d_H - c| for an explicit secant list, using the given
/// codes (rows indexed like the secants).
inline DistortionReport distortion_over_secants(const BinaryCodes& codes, std::span<const SecantRef> secants,
                                                std::size_t bins = 20) {
  if (secants.empty()) throw DataError("distortion needs at least one secant");
  const ChunkPlan plan{secants.size(), detail::kPairChunk};
  std::vector<detail::HammingBucket> buckets(codes.bits() + 1);
  ordered_reduce(
      plan.count(), [&] { return std::vector<detail::HammingBucket>(codes.bits() + 1); },
      [&](std::vector<detail::HammingBucket>& part, std::size_t p) {
        for (std::size_t k = plan.begin(p); k < plan.end(p); ++k) {
          const SecantRef& s = secants[k];
          part[codes.distance(s.i, s.j)].add(k, s);
        }
      },
      [&](const std::vector<detail::HammingBucket>& part) {
        for (std::size_t d = 0; d < buckets.size(); ++d) buckets[d].merge(part[d]);
      });
  const auto bf = detail::fit_buckets(buckets);

  DistortionReport rep;
  rep.delta = bf.fit.delta;
  rep.lambda_star = bf.fit.lambda;
  rep.worst_secant = bf.worst;
  rep.pair_count = bf.pairs;
  rep.histogram = detail::empty_histogram(rep.delta, bins);
  for (const SecantRef& s : secants) {
    const double r = std::abs(rep.lambda_star * codes.distance(s.i, s.j) - s.c);
    const std::size_t b = detail::histogram_bin(r, rep.delta, bins);
    ++rep.histogram.counts[b];
    rep.histogram.bin_max[b] = std::max(rep.histogram.bin_max[b], r);
  }
  return rep;
}

/// Streams every pair of an already-quantized dataset: pass one keeps per-Hamming-distance
/// extremes of c and fits lambda* exactly, pass two builds the residual histogram.
inline DistortionReport max_distortion(const BinaryCodes& codes, const Dataset& data, std::size_t bins = 20) {
  if (codes.rows() != data.size()) {
    throw DimensionError("codes cover " + std::to_string(codes.rows()) + " points but data has " +
                         std::to_string(data.size()));
  }
  const SecantRange all = enumerate_secants(data.size());
  const ChunkPlan plan{static_cast<std::size_t>(all.size()), detail::kPairChunk};
  std::vector<detail::HammingBucket> buckets(codes.bits() + 1);
  ordered_reduce(
      plan.count(), [&] { return std::vector<detail::HammingBucket>(codes.bits() + 1); },
      [&](std::vector<detail::HammingBucket>& part, std::size_t p) {
        const SecantRange range(plan.begin(p), plan.end(p));
        for (auto it = range.begin(); it != range.end(); ++it) {
          const auto [i, j] = *it;
          part[codes.distance(i, j)].add(it.linear_index(), {i, j, ambient_distance(data, i, j)});
        }
      },
      [&](const std::vector<detail::HammingBucket>& part) {
        for (std::size_t d = 0; d < buckets.size(); ++d) buckets[d].merge(part[d]);
      });
  const auto bf = detail::fit_buckets(buckets);

  DistortionReport rep;
  rep.delta = bf.fit.delta;
  rep.lambda_star = bf.fit.lambda;
  rep.worst_secant = bf.worst;
  rep.pair_count = bf.pairs;
  rep.histogram = detail::empty_histogram(rep.delta, bins);
  ordered_reduce(
      plan.count(), [&] { return detail::empty_histogram(rep.delta, bins); },
      [&](DistortionHistogram& part, std::size_t p) {
        const SecantRange range(plan.begin(p), plan.end(p));
        for (auto [i, j] : range) {
          const double r = std::abs(rep.lambda_star * codes.distance(i, j) - ambient_distance(data, i, j));
          const std::size_t b = detail::histogram_bin(r, rep.delta, bins);
          ++part.counts[b];
          part.bin_max[b] = std::max(part.bin_max[b], r);
        }
      },
      [&](const DistortionHistogram& part) { detail::merge_histogram(rep.histogram, part); });
  return rep;
}

/// Maximum distortion of a model on any preprocessed dataset (training or held-out).
inline DistortionReport max_distortion(const HashModel& model, const Dataset& data, std::size_t bins = 20) {
  return max_distortion(hash_codes(model, data), data, bins);
}

struct NeighborReport {
  std::size_t k = 0;
  double map = 0.0;
  std::vector<double> per_query_ap;
  double mean_tau = 0.0;
  std::vector<double> per_query_tau;
};

namespace detail {

inline void check_queries(std::span<const std::uint32_t> queries, std::size_t q) {
  if (queries.empty()) throw DataError("at least one query is required");
  for (auto idx : queries)
    if (idx >= q) throw std::out_of_range("query index " + std::to_string(idx) + " >= " + std::to_string(q));
}

/// The k nearest candidates (self excluded) ordered by (key, index).
template <class Key>
std::vector<std::uint32_t> nearest_by(std::size_t q_count, std::uint32_t query, std::size_t k, Key&& key) {
  std::vector<std::pair<double, std::uint32_t>> cand;
  cand.reserve(q_count - 1);
  for (std::uint32_t p = 0; p < q_count; ++p)
    if (p != query) cand.emplace_back(key(p), p);
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
  std::vector<std::uint32_t> out(k);
  for (std::size_t r = 0; r < k; ++r) out[r] = cand[r].second;
  return out;
}

}  // namespace detail

inline std::vector<std::uint32_t> all_queries(std::size_t q) {
  std::vector<std::uint32_t> out(q);
  std::iota(out.begin(), out.end(), 0U);
  return out;
}

/// Mean over queries of |ambient k-NN  intersect  Hamming k-NN| / k. Hamming ties go to the lower index.
inline NeighborReport map_at_k(const BinaryCodes& codes, const Dataset& data, std::span<const std::uint32_t> queries,
                               std::size_t k) {
  if (k == 0 || k >= data.size()) {
    throw std::invalid_argument("k must satisfy 0 < k < Q (k = " + std::to_string(k) + ", Q = " +
                                std::to_string(data.size()) + ")");
  }
  if (codes.rows() != data.size()) throw DimensionError("codes and data disagree on Q");
  detail::check_queries(queries, data.size());
  NeighborReport rep;
  rep.k = k;
  rep.per_query_ap.assign(queries.size(), 0.0);
  parallel_for(queries.size(), [&](std::size_t qi) {
    const std::uint32_t q = queries[qi];
    const auto ambient = detail::nearest_by(data.size(), q, k, [&](std::uint32_t p) { return ambient_distance(data, q, p); });
    const auto hamming =
        detail::nearest_by(data.size(), q, k, [&](std::uint32_t p) { return static_cast<double>(codes.distance(q, p)); });
    std::vector<std::uint32_t> a(ambient), h(hamming);
    std::sort(a.begin(), a.end());
    std::sort(h.begin(), h.end());
    std::vector<std::uint32_t> common;
    std::set_intersection(a.begin(), a.end(), h.begin(), h.end(), std::back_inserter(common));
    rep.per_query_ap[qi] = static_cast<double>(common.size()) / static_cast<double>(k);
  });
  rep.map = std::accumulate(rep.per_query_ap.begin(), rep.per_query_ap.end(), 0.0) /
            static_cast<double>(rep.per_query_ap.size());
  return rep;
}

inline NeighborReport map_at_k(const HashModel& model, const Dataset& data, std::span<const std::uint32_t> queries,
                               std::size_t k) {
  return map_at_k(hash_codes(model, data), data, queries, k);
}

/// Kendall tau-a between the ambient and Hamming rankings of each query's ambient k-NN set.
/// Both rankings break ties by ascending index, so every member pair is concordant or discordant.
inline NeighborReport kendall_tau_at_k(const BinaryCodes& codes, const Dataset& data,
                                       std::span<const std::uint32_t> queries, std::size_t k) {
  if (k < 2 || k >= data.size()) {
    throw std::invalid_argument("k must satisfy 2 <= k < Q (k = " + std::to_string(k) + ", Q = " +
                                std::to_string(data.size()) + ")");
  }
  if (codes.rows() != data.size()) throw DimensionError("codes and data disagree on Q");
  detail::check_queries(queries, data.size());
  NeighborReport rep;
  rep.k = k;
  rep.per_query_tau.assign(queries.size(), 0.0);
  parallel_for(queries.size(), [&](std::size_t qi) {
    const std::uint32_t q = queries[qi];
    const auto members = detail::nearest_by(data.size(), q, k, [&](std::uint32_t p) { return ambient_distance(data, q, p); });
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto da = codes.distance(q, members[a]);
      const auto db = codes.distance(q, members[b]);
      return da != db ? da < db : members[a] < members[b];
    });
    std::vector<std::size_t> hamming_rank(k);
    for (std::size_t r = 0; r < k; ++r) hamming_rank[order[r]] = r;
    long long score = 0;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) score += hamming_rank[a] < hamming_rank[b] ? 1 : -1;
    rep.per_query_tau[qi] = static_cast<double>(score) / (static_cast<double>(k) * static_cast<double>(k - 1) / 2.0);
  });
  rep.mean_tau = std::accumulate(rep.per_query_tau.begin(), rep.per_query_tau.end(), 0.0) /
                 static_cast<double>(rep.per_query_tau.size());
  return rep;
}

inline NeighborReport kendall_tau_at_k(const HashModel& model, const Dataset& data,
                                       std::span<const std::uint32_t> queries, std::size_t k) {
  return kendall_tau_at_k(hash_codes(model, data), data, queries, k);
}

// JSON report schema shared by the CLI: {metric, k, M, value, per_query, lambda_star, delta}.

inline nlohmann::ordered_json metric_json(const std::string& metric, std::optional<std::size_t> k, std::size_t bits,
                                          double value, const std::vector<double>& per_query,
                                          const DistortionReport& distortion) {
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["k"] = k ? nlohmann::ordered_json(*k) : nlohmann::ordered_json(nullptr);
  j["M"] = bits;
  j["value"] = value;
  j["per_query"] = per_query;
  j["lambda_star"] = distortion.lambda_star;
  j["delta"] = distortion.delta;
  return j;
}

inline nlohmann::ordered_json to_json(const DistortionReport& rep) {
  nlohmann::ordered_json j;
  j["delta"] = rep.delta;
  j["lambda_star"] = rep.lambda_star;
  j["worst_secant"] = {{"i", rep.worst_secant.i}, {"j", rep.worst_secant.j}, {"c", rep.worst_secant.c}};
  j["pair_count"] = rep.pair_count;
  j["histogram"] = {{"edges", rep.histogram.edges}, {"counts", rep.histogram.counts}, {"bin_max", rep.histogram.bin_max}};
  return j;
}

}  // namespace isohash
