#pragma once

// Column generation over secants: solve on a small subset, then repeatedly add pairs that
// violate the current distortion bound until a full scan finds none.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "isohash/core.hpp"
#include "isohash/parallel.hpp"
#include "isohash/random.hpp"
#include "isohash/solver_admm.hpp"

namespace isohash {

/// Seeded bijection of [0, n). A balanced Feistel network on the next even power of two,
/// restricted to [0, n) by cycle walking; evaluates in O(1) memory.
class PairPermutation {
public:
  PairPermutation(std::uint64_t n, std::uint64_t seed) : n_(n) {
    if (n == 0) throw std::invalid_argument("permutation domain must be nonempty");
    int bits = 2;
    while (bits < 64 && (std::uint64_t{1} << bits) < n) ++bits;
    if (bits % 2 != 0) ++bits;
    half_ = bits / 2;
    mask_ = (std::uint64_t{1} << half_) - 1;
    for (int r = 0; r < kRounds; ++r) keys_[r] = mix_seed(seed, static_cast<std::uint64_t>(r));
  }

  std::uint64_t size() const { return n_; }

  std::uint64_t operator()(std::uint64_t t) const {
    std::uint64_t x = t;
    do x = encrypt(x);
    while (x >= n_);
    return x;
  }

private:
  static constexpr int kRounds = 4;

  std::uint64_t encrypt(std::uint64_t x) const {
    std::uint64_t left = x >> half_;
    std::uint64_t right = x & mask_;
    for (int r = 0; r < kRounds; ++r) {
      const std::uint64_t next = left ^ (mix_seed(right ^ keys_[r]) & mask_);
      left = right;
      right = next;
    }
    return (left << half_) | right;
  }

  std::uint64_t n_;
  int half_ = 1;
  std::uint64_t mask_ = 1;
  std::uint64_t keys_[kRounds] = {};
};

enum class SecantOrigin : std::uint8_t { initial, carryover, violator };

inline const char* to_string(SecantOrigin o) {
  switch (o) {
    case SecantOrigin::initial: return "initial";
    case SecantOrigin::carryover: return "active-carryover";
    case SecantOrigin::violator: return "violator";
  }
  return "unknown";
}

struct ActiveSet {
  SecantBatch secants;
  std::vector<SecantOrigin> origin;  // parallel to secants
  int generation = 0;

  std::size_t size() const { return secants.size(); }
  void add(const SecantRef& s, SecantOrigin o) {
    secants.push_back(s);
    origin.push_back(o);
  }
};

struct CgConfig {
  std::size_t init_sample_size = 5000;
  std::size_t violator_batch = 2000;
  double active_tol = 0.02;
  std::uint64_t scan_seed = 0;
  int max_generations = 50;
  // Keep every secant of the previous set instead of only its active part.
  bool accumulate = true;
  // Later generations run at alpha_end with the first solve's lambda frozen; with this set they
  // rerun the whole alpha continuation with a fresh solver lambda instead. W is warm either way.
  bool full_continuation = false;
  SolverConfig inner;

  void validate() const {
    if (init_sample_size < 1) throw std::invalid_argument("init_sample_size must be at least 1");
    if (violator_batch < 1) throw std::invalid_argument("violator_batch must be at least 1");
    if (active_tol < 0.0 || active_tol > 1.0) throw std::invalid_argument("active_tol must lie in [0, 1]");
    if (max_generations < 0) throw std::invalid_argument("max_generations must be nonnegative");
    inner.validate();
  }
};

/// Uniform sample without replacement of min(init_sample_size, Q(Q-1)/2) pairs (Floyd's
/// algorithm over linear pair indices), in ascending pair order.
inline ActiveSet sample_initial_secants(std::size_t q, const Dataset& data, const CgConfig& cfg) {
  if (q != data.size()) throw DimensionError("Q = " + std::to_string(q) + " but data has " + std::to_string(data.size()) + " rows");
  const std::uint64_t total = enumerate_secants(q).size();
  const std::uint64_t k = std::min<std::uint64_t>(cfg.init_sample_size, total);
  std::vector<std::uint64_t> picked;
  if (k == total) {
    picked.resize(total);
    for (std::uint64_t t = 0; t < total; ++t) picked[t] = t;
  } else {
    Rng rng(mix_seed(cfg.scan_seed, 0x5eed));
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(2 * k));
    for (std::uint64_t j = total - k; j < total; ++j) {
      const std::uint64_t t = rng.below(j + 1);
      chosen.insert(chosen.count(t) != 0 ? j : t);
    }
    picked.assign(chosen.begin(), chosen.end());
    std::sort(picked.begin(), picked.end());
  }
  ActiveSet out;
  out.secants.reserve(picked.size());
  for (const std::uint64_t t : picked) {
    const auto [i, j] = pair_at(t);
    out.add({i, j, ambient_distance(data, i, j)}, SecantOrigin::initial);
  }
  return out;
}

/// Secants whose quantized residual |lambda d_H - c| is at least (1 - active_tol) delta_hat.
inline SecantBatch identify_active(const BinaryCodes& codes, std::span<const SecantRef> secants, double lambda,
                                   double delta_hat, double active_tol) {
  const double threshold = (1.0 - active_tol) * delta_hat;
  SecantBatch out;
  for (const auto& s : secants)
    if (std::abs(lambda * codes.distance(s.i, s.j) - s.c) >= threshold) out.push_back(s);
  return out;
}

struct ScanResult {
  SecantBatch violators;
  bool scanned_all = false;
  std::uint64_t pairs_scanned = 0;
};

namespace detail {
inline constexpr std::size_t kScanChunk = 1 << 15;
}

/// Walks every pair in a seeded pseudo-random order and keeps those with
/// |lambda d_H - c| > delta_hat, stopping once batch_limit are found. Chunks are scanned in
/// parallel waves and merged in permutation order, so the result does not depend on threads.
inline ScanResult scan_violators(const BinaryCodes& codes, const Dataset& data, double lambda, double delta_hat,
                                 std::size_t batch_limit, std::uint64_t seed) {
  if (!(delta_hat >= 0.0)) throw std::invalid_argument("delta_hat must be nonnegative");
  if (batch_limit < 1) throw std::invalid_argument("batch_limit must be at least 1");
  if (codes.rows() != data.size()) throw DimensionError("codes and data disagree on Q");
  const std::uint64_t total = enumerate_secants(data.size()).size();
  const PairPermutation perm(total, seed);
  const ChunkPlan plan{static_cast<std::size_t>(total), detail::kScanChunk};
  const std::size_t wave = std::max<std::size_t>(1, 4 * static_cast<std::size_t>(thread_count()));

  ScanResult out;
  for (std::size_t first = 0; first < plan.count(); first += wave) {
    const std::size_t n = std::min(wave, plan.count() - first);
    std::vector<SecantBatch> parts(n);
    parallel_for(n, [&](std::size_t k) {
      const std::size_t ch = first + k;
      for (std::size_t pos = plan.begin(ch); pos < plan.end(ch) && parts[k].size() < batch_limit; ++pos) {
        const auto [i, j] = pair_at(perm(pos));
        const double c = ambient_distance(data, i, j);
        if (std::abs(lambda * codes.distance(i, j) - c) > delta_hat) parts[k].push_back({i, j, c});
      }
    });
    for (std::size_t k = 0; k < n && out.violators.size() < batch_limit; ++k) {
      const std::size_t room = batch_limit - out.violators.size();
      const std::size_t take = std::min(room, parts[k].size());
      out.violators.insert(out.violators.end(), parts[k].begin(), parts[k].begin() + static_cast<std::ptrdiff_t>(take));
      out.pairs_scanned = plan.end(first + k);
    }
    if (out.violators.size() >= batch_limit) return out;
  }
  out.pairs_scanned = total;
  out.scanned_all = out.violators.empty();
  return out;
}

struct GenerationRecord {
  int generation = 0;
  std::size_t active_size = 0;
  std::size_t violators = 0;
  double delta_hat = 0.0;
};

struct CgReport {
  int generations = 0;
  std::size_t final_active_size = 0;
  std::size_t peak_resident_secants = 0;
  std::size_t memory_bound = 0;  // init sample + generations * violator_batch
  bool fully_satisfied = false;
  double lambda_hat = 0.0;
  double delta_hat = 0.0;
  int inner_outer_iters = 0;
  std::vector<GenerationRecord> history;
  ActiveSet final_set;
};

struct CgResult {
  HashModel model;
  CgReport report;
};

/// NIBH-CG. lambda_hat is lambda* of the first solve's codes on S_0 and scales every Hamming
/// residual (delta_hat, activity, violations). Later generations warm-start W; see
/// CgConfig::full_continuation. Throws CheckFailure if resident secants exceed the memory bound.
inline CgResult train_nibh_cg(const Dataset& data, std::size_t bits, const CgConfig& cfg,
                              std::ostream* progress = nullptr) {
  cfg.validate();
  validate(data);
  if (bits < 1) throw std::invalid_argument("M must be at least 1");

  CgResult out;
  CgReport& rep = out.report;
  ActiveSet aug = sample_initial_secants(data.size(), data, cfg);
  const std::size_t init_size = aug.size();
  rep.memory_bound = init_size;
  rep.peak_resident_secants = init_size;

  double lambda_hat = 0.0;
  auto solve = [&](const Matrix& W0, const SolverConfig& sc) {
    const SecantProblem p = make_problem(data, aug.secants);
    auto res = train_nibh(p, W0, sc);
    rep.inner_outer_iters += res.state.iter;
    if (lambda_hat == 0.0) lambda_hat = problem_distortion(res.model.W, p).lambda_star;
    const double d = residual_at_scale(res.model.W, p, lambda_hat);
    return std::pair<TrainResult, double>(std::move(res), d);
  };

  auto emit = [&](const GenerationRecord& g) {
    rep.history.push_back(g);
    if (progress != nullptr) {
      nlohmann::ordered_json j;
      j["generation"] = g.generation;
      j["active_size"] = g.active_size;
      j["violators"] = g.violators;
      j["delta_hat"] = g.delta_hat;
      *progress << j.dump() << '\n';
    }
  };

  auto [first, first_delta] = solve(gaussian_matrix(bits, data.dim(), cfg.inner.seed), cfg.inner);
  Matrix W = first.model.W;
  double delta_hat = first_delta;
  emit({0, aug.size(), 0, delta_hat});

  // The solver keeps its own scale for the relaxed distances; lambda_hat scales Hamming distances.
  SolverConfig warm = cfg.inner;
  if (!cfg.full_continuation) {
    warm.freeze_lambda = true;
    warm.initial_lambda = first.model.lambda;
    warm.alpha_start = warm.alpha_end;
  }

  for (int gen = 1;; ++gen) {
    BinaryCodes codes = hash_codes(HashModel{W, lambda_hat, cfg.inner.alpha_end, {}, false}, data);
    auto scan = scan_violators(codes, data, lambda_hat, delta_hat, cfg.violator_batch,
                               mix_seed(cfg.scan_seed, static_cast<std::uint64_t>(gen)));
    rep.memory_bound = init_size + static_cast<std::size_t>(gen) * cfg.violator_batch;
    rep.peak_resident_secants = std::max(rep.peak_resident_secants, aug.size() + scan.violators.size());
    if (rep.peak_resident_secants > rep.memory_bound) {
      throw CheckFailure("resident secants " + std::to_string(rep.peak_resident_secants) + " exceed bound " +
                         std::to_string(rep.memory_bound));
    }
    if (scan.scanned_all) {
      rep.fully_satisfied = true;
      break;
    }
    if (gen > cfg.max_generations) break;

    ActiveSet next;
    next.generation = gen;
    if (cfg.accumulate) {
      for (const auto& s : aug.secants) next.add(s, SecantOrigin::carryover);
    } else {
      for (const auto& s : identify_active(codes, aug.secants, lambda_hat, delta_hat, cfg.active_tol))
        next.add(s, SecantOrigin::carryover);
    }
    for (const auto& s : scan.violators) next.add(s, SecantOrigin::violator);
    aug = std::move(next);

    auto [res, d] = solve(W, warm);
    W = res.model.W;
    delta_hat = d;
    rep.generations = gen;
    emit({gen, aug.size(), scan.violators.size(), delta_hat});
  }

  out.model.W = W;
  out.model.lambda = lambda_hat;
  out.model.alpha = cfg.inner.alpha_end;
  out.model.mean = data.mean;
  out.model.normalized = data.normalized;
  rep.lambda_hat = lambda_hat;
  rep.delta_hat = delta_hat;
  rep.final_active_size = aug.size();
  rep.final_set = std::move(aug);
  return out;
}

inline nlohmann::ordered_json to_json(const CgReport& r) {
  nlohmann::ordered_json j;
  j["generations"] = r.generations;
  j["final_active_size"] = r.final_active_size;
  j["peak_resident_secants"] = r.peak_resident_secants;
  j["memory_bound"] = r.memory_bound;
  j["fully_satisfied"] = r.fully_satisfied;
  j["lambda_hat"] = r.lambda_hat;
  j["delta_hat"] = r.delta_hat;
  j["inner_outer_iters"] = r.inner_outer_iters;
  auto& h = j["history"] = nlohmann::ordered_json::array();
  for (const auto& g : r.history)
    h.push_back({{"generation", g.generation}, {"active_size", g.active_size}, {"violators", g.violators},
                 {"delta_hat", g.delta_hat}});
  return j;
}

}  // namespace isohash
