#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "isohash/core.hpp"

namespace isohash {

/// Euclidean projection of z onto {x : ||x||_1 <= radius}. Sort-based, O(n log n).
inline Vector project_l1_ball(const Vector& z, double radius) {
  if (radius < 0.0) throw std::invalid_argument("l1-ball radius must be nonnegative");
  if (z.lpNorm<1>() <= radius) return z;
  std::vector<double> mags(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) mags[k] = std::abs(z[k]);
  std::sort(mags.begin(), mags.end(), std::greater<>());

  // theta is the soft threshold that brings the l1 norm down to the radius.
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    cumulative += mags[k];
    const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
    if (mags[k] > candidate) theta = candidate;
    else break;
  }
  Vector out(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double shrunk = std::max(std::abs(z[k]) - theta, 0.0);
    out[k] = std::copysign(shrunk, z[k]);
  }
  return out;
}

/// argmin_u ||u||_inf + (rho/2) ||u - z||_2^2 via Moreau decomposition:
/// u = z - P_{B1(1/rho)}(z).
inline Vector prox_linf(const Vector& z, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  return z - project_l1_ball(z, 1.0 / rho);
}

/// The objective minimized by prox_linf.
inline double prox_linf_objective(const Vector& u, const Vector& z, double rho) {
  const double linf = u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff();
  return linf + 0.5 * rho * (u - z).squaredNorm();
}

}  // namespace isohash
