#pragma once

// Exact minimization of g(lambda) = max_i |lambda v_i - c_i| over lambda > 0.
//
// With v >= 0, g = max(A, B) where A(lambda) = max_i (lambda v_i - c_i) is nondecreasing and
// B(lambda) = max_i (c_i - lambda v_i) is nonincreasing, so the minimizer sits where A and B cross.
// At any lambda the maximizing lines a (of A) and b (of B) give the two-constraint subproblem
// whose solution is lambda' = (c_a + c_b) / (v_a + v_b). Iterating that step converges to a
// fixpoint; a bisection bracket on sign(A - B) guards against cycling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "isohash/error.hpp"

namespace isohash {

struct ChebyshevFit {
  double lambda = 0.0;
  double delta = 0.0;
};

namespace detail {

struct Envelope {
  double rising = -std::numeric_limits<double>::infinity();   // A(lambda)
  double falling = -std::numeric_limits<double>::infinity();  // B(lambda)
  std::size_t rising_arg = 0;
  std::size_t falling_arg = 0;
};

inline Envelope envelope_at(std::span<const double> v, std::span<const double> c, double lambda) {
  Envelope e;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double up = lambda * v[k] - c[k];
    const double down = c[k] - lambda * v[k];
    if (v[k] > 0.0 && up > e.rising) {
      e.rising = up;
      e.rising_arg = k;
    }
    if (down > e.falling) {
      e.falling = down;
      e.falling_arg = k;
    }
  }
  return e;
}

}  // namespace detail

inline double chebyshev_objective(std::span<const double> v, std::span<const double> c, double lambda) {
  double g = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) g = std::max(g, std::abs(lambda * v[k] - c[k]));
  return g;
}

inline ChebyshevFit fit_lambda_chebyshev(std::span<const double> v, std::span<const double> c) {
  if (v.size() != c.size() || v.empty()) {
    throw DimensionError("fit_lambda_chebyshev needs equal, nonempty lengths (got " + std::to_string(v.size()) +
                         " and " + std::to_string(c.size()) + ")");
  }
  double v_min = std::numeric_limits<double>::infinity();
  double c_max = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] < 0.0 || c[k] < 0.0 || !std::isfinite(v[k]) || !std::isfinite(c[k])) {
      throw DataError("fit_lambda_chebyshev needs finite nonnegative inputs");
    }
    if (v[k] > 0.0) v_min = std::min(v_min, v[k]);
    c_max = std::max(c_max, c[k]);
  }
  if (c_max == 0.0) {
    // Every target is zero: the infimum is approached as lambda -> 0+.
    const double tiny = std::numeric_limits<double>::min();
    return {tiny, chebyshev_objective(v, c, tiny)};
  }
  if (!std::isfinite(v_min)) {
    throw DataError("embedding collapsed; delta = max c = " + std::to_string(c_max));
  }

  // A(hi) >= 2 c_max - c_k >= c_max >= B(hi) for the line with the smallest positive v.
  double lo = 0.0;
  double hi = 2.0 * c_max / v_min + 1.0;
  double lambda = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    const auto e = detail::envelope_at(v, c, lambda);
    const double gap = e.rising - e.falling;
    if (gap == 0.0) break;
    if (gap < 0.0) lo = lambda;
    else hi = lambda;

    const std::size_t a = e.rising_arg;
    const std::size_t b = e.falling_arg;
    const double step = (c[a] + c[b]) / (v[a] + v[b]);
    if (step == lambda) break;  // fixpoint of the two-constraint subproblem
    if (step > lo && step < hi) {
      lambda = step;
    } else {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      lambda = mid;
    }
  }
  double best = chebyshev_objective(v, c, lambda);
  // Bracket ends can tie or beat the last iterate by rounding only.
  for (double cand : {lo, hi}) {
    if (cand <= 0.0) continue;
    const double g = chebyshev_objective(v, c, cand);
    if (g < best) {
      best = g;
      lambda = cand;
    }
  }
  return {lambda, best};
}

/// Optimality certificate for the piecewise-linear objective: among the lines active at lambda
/// (within tol of the max) the left slope is <= 0 and the right slope is >= 0.
inline bool chebyshev_certificate(std::span<const double> v, std::span<const double> c, const ChebyshevFit& fit,
                                  double rel_tol = 1e-9) {
  const double g = chebyshev_objective(v, c, fit.lambda);
  const double tol = rel_tol * std::max(1.0, g);
  double min_slope = std::numeric_limits<double>::infinity();
  double max_slope = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double r = fit.lambda * v[k] - c[k];
    if (r >= g - tol) {
      min_slope = std::min(min_slope, v[k]);
      max_slope = std::max(max_slope, v[k]);
    }
    if (-r >= g - tol) {
      min_slope = std::min(min_slope, -v[k]);
      max_slope = std::max(max_slope, -v[k]);
    }
  }
  // At the lower boundary lambda -> 0+ only the right slope matters.
  if (fit.lambda <= std::numeric_limits<double>::min()) return max_slope >= 0.0;
  return min_slope <= 0.0 && max_slope >= 0.0;
}

}  // namespace isohash
