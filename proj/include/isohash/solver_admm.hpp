#pragma once

// ADMM for  min_{W, lambda > 0} || lambda v(W) - c ||_inf  with the splitting u = lambda v - c.
// Scaled augmented Lagrangian: ||u||_inf + (rho/2) || u - lambda v(W) + c + y ||^2.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "isohash/core.hpp"
#include "isohash/metrics.hpp"
#include "isohash/parallel.hpp"
#include "isohash/prox.hpp"
#include "isohash/random.hpp"

namespace isohash {

struct SolverConfig {
  double rho = 1.0;
  double eta = 1.6;
  double alpha_start = 1.0;
  double alpha_end = 10.0;
  double alpha_growth = 1.25;
  int max_outer_iters = 100;
  int inner_gd_iters = 50;
  double inner_gd_tol = 1e-6;
  double convergence_tol = 1e-5;
  double lambda_min = 1e-8;
  std::uint64_t seed = 0;
  // lambda_0 = <v, c> / <v, v> with v taken at alpha_end on W_0; otherwise lambda_0 = 1.
  bool fit_initial_lambda = true;
  // Skip the lambda-step; lambda stays at its initial value.
  bool freeze_lambda = false;
  // Overrides the initial lambda when positive.
  double initial_lambda = 0.0;
  // Quantize and measure delta after every outer iteration.
  bool track_delta = true;
  // Start u at lambda v(W_0) - c (the constraint value) instead of zero; y starts at zero either way.
  bool warm_u = false;

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("solver config: " + what); };
    if (!(rho > 0.0)) fail("rho must be positive");
    if (!(eta > 0.0)) fail("eta must be positive");
    if (!(alpha_start > 0.0) || !(alpha_end > 0.0)) fail("alpha must be positive");
    if (alpha_start > alpha_end) fail("alpha_start must not exceed alpha_end");
    if (!(alpha_growth > 1.0)) fail("alpha_growth must exceed 1");
    if (max_outer_iters < 1 || inner_gd_iters < 1) fail("iteration limits must be positive");
    if (inner_gd_tol < 0.0 || convergence_tol < 0.0) fail("tolerances must be nonnegative");
    if (!(lambda_min > 0.0)) fail("lambda_min must be positive");
  }
};

/// One row of the per-iteration record. relaxed_linf = ||lambda v - c||_inf at the current alpha;
/// delta is measured on quantized codes with the optimal scale.
struct HistoryEntry {
  int iter = 0;
  double loss = 0.0;
  double relaxed_linf = 0.0;
  double delta = 0.0;
  double alpha = 0.0;
  double lambda = 0.0;
};

enum class SolverStatus { converged, max_iterations, diverged };

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::converged: return "converged";
    case SolverStatus::max_iterations: return "max_iterations";
    case SolverStatus::diverged: return "diverged";
  }
  return "unknown";
}

struct SolverState {
  Matrix W;
  Vector u;
  Vector y;
  double lambda = 1.0;
  double alpha = 1.0;
  int iter = 0;
  std::vector<HistoryEntry> loss_history;
  double lipschitz = 1.0;  // backtracking estimate carried between W-steps
};

/// Target distances are unsquared l2 distances between points.
inline constexpr const char* kTargetConvention = "l2";

/// The secant list restricted to the points it touches. local holds row indices into X.
struct SecantProblem {
  Matrix X;
  SecantBatch global;
  SecantBatch local;
  Vector c;

  std::size_t size() const { return local.size(); }
};

inline SecantProblem make_problem(const Dataset& data, std::span<const SecantRef> secants) {
  if (secants.empty()) throw DataError("training needs at least one secant");
  std::vector<std::uint32_t> rows;
  rows.reserve(2 * secants.size());
  for (const auto& s : secants) {
    if (s.i >= data.size() || s.j >= data.size()) {
      throw std::out_of_range("secant (" + std::to_string(s.i) + ", " + std::to_string(s.j) + ") out of range for Q = " +
                              std::to_string(data.size()));
    }
    if (!(s.c >= 0.0) || !std::isfinite(s.c)) {
      throw DataError("secant (" + std::to_string(s.i) + ", " + std::to_string(s.j) + ") has invalid target " +
                      std::to_string(s.c));
    }
    rows.push_back(s.i);
    rows.push_back(s.j);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  auto local_of = [&](std::uint32_t g) {
    return static_cast<std::uint32_t>(std::lower_bound(rows.begin(), rows.end(), g) - rows.begin());
  };

  SecantProblem p;
  p.X.resize(static_cast<Eigen::Index>(rows.size()), data.points.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) p.X.row(static_cast<Eigen::Index>(r)) = data.points.row(rows[r]);
  p.global.assign(secants.begin(), secants.end());
  p.local.reserve(secants.size());
  p.c.resize(static_cast<Eigen::Index>(secants.size()));
  for (std::size_t k = 0; k < secants.size(); ++k) {
    p.local.push_back({local_of(secants[k].i), local_of(secants[k].j), secants[k].c});
    p.c[static_cast<Eigen::Index>(k)] = secants[k].c;
  }
  return p;
}

namespace detail {

inline constexpr std::size_t kSecantChunk = 1 << 14;

struct Relaxed {
  Matrix S;  // sigma_alpha(X W^T), P x M
  Vector v;  // relaxed pair distances
};

inline Relaxed relax(const Matrix& W, const SecantProblem& p, double alpha) {
  Relaxed out;
  out.S = (p.X * W.transpose()).unaryExpr([alpha](double t) { return sigmoid(t, alpha); });
  out.v.resize(static_cast<Eigen::Index>(p.size()));
  const ChunkPlan plan{p.size(), kSecantChunk};
  parallel_for(plan.count(), [&](std::size_t ch) {
    for (std::size_t k = plan.begin(ch); k < plan.end(ch); ++k) {
      out.v[static_cast<Eigen::Index>(k)] = (out.S.row(p.local[k].i) - out.S.row(p.local[k].j)).squaredNorm();
    }
  });
  return out;
}

inline void require_finite(const Vector& r, const SecantProblem& p, const char* what) {
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    if (!std::isfinite(r[k])) {
      const auto& s = p.global[static_cast<std::size_t>(k)];
      throw SolverError(std::string("non-finite ") + what + " at secant (" + std::to_string(s.i) + ", " +
                        std::to_string(s.j) + ")");
    }
  }
}

}  // namespace detail

/// v(W) at rate alpha for every secant of the problem.
inline Vector relaxed_distances(const Matrix& W, const SecantProblem& p, double alpha) {
  return detail::relax(W, p, alpha).v;
}

/// f(W) = 1/2 sum_k r_k^2 with r = u - lambda v(W) + c + y.
inline double w_objective(const Matrix& W, const SolverState& s, const SecantProblem& p) {
  const Vector v = relaxed_distances(W, p, s.alpha);
  const Vector r = s.u - s.lambda * v + p.c + s.y;
  detail::require_finite(r, p, "residual");
  return 0.5 * r.squaredNorm();
}

struct ObjectiveGradient {
  double value = 0.0;
  Matrix grad;
};

inline ObjectiveGradient w_objective_gradient(const Matrix& W, const SolverState& s, const SecantProblem& p) {
  const auto rel = detail::relax(W, p, s.alpha);
  const Vector r = s.u - s.lambda * rel.v + p.c + s.y;
  detail::require_finite(r, p, "residual");
  const double alpha = s.alpha;
  const Matrix Sp = rel.S.unaryExpr([alpha](double x) { return alpha * x * (1.0 - x); });

  // G(point, m) collects d f / d (W x_point)_m; the chain rule through X finishes the job.
  Matrix G = Matrix::Zero(rel.S.rows(), rel.S.cols());
  const ChunkPlan plan{p.size(), detail::kSecantChunk};
  ordered_reduce(
      plan.count(), [&] { return Matrix(Matrix::Zero(rel.S.rows(), rel.S.cols())); },
      [&](Matrix& part, std::size_t ch) {
        for (std::size_t k = plan.begin(ch); k < plan.end(ch); ++k) {
          const auto a = p.local[k].i;
          const auto b = p.local[k].j;
          const double coef = -2.0 * s.lambda * r[static_cast<Eigen::Index>(k)];
          for (Eigen::Index m = 0; m < rel.S.cols(); ++m) {
            const double d = coef * (rel.S(a, m) - rel.S(b, m));
            part(a, m) += d * Sp(a, m);
            part(b, m) -= d * Sp(b, m);
          }
        }
      },
      [&](const Matrix& part) { G += part; });

  ObjectiveGradient out;
  out.value = 0.5 * r.squaredNorm();
  out.grad = G.transpose() * p.X;
  for (Eigen::Index k = 0; k < out.grad.size(); ++k) {
    if (!std::isfinite(out.grad.data()[k])) throw SolverError("non-finite gradient entry in W-step");
  }
  return out;
}

struct WStepResult {
  Matrix W;
  double entry_loss = 0.0;
  double exit_loss = 0.0;
  int iterations = 0;
  double lipschitz = 1.0;
};

/// Accelerated gradient with backtracking on f(W); restarts momentum whenever a step would raise f,
/// so exit_loss <= entry_loss.
inline WStepResult w_step(const SolverState& s, const SecantProblem& p, const SolverConfig& cfg) {
  WStepResult res;
  double L = std::max(s.lipschitz, 1e-12);
  Matrix x = s.W;
  Matrix yk = s.W;
  double t = 1.0;
  double fx = w_objective(x, s, p);
  res.entry_loss = fx;
  for (int k = 0; k < cfg.inner_gd_iters; ++k) {
    ++res.iterations;
    const auto og = w_objective_gradient(yk, s, p);
    const double gnorm2 = og.grad.squaredNorm();
    if (gnorm2 == 0.0) {
      if (og.value <= fx) {
        x = yk;
        fx = og.value;
      }
      break;
    }
    Matrix z;
    double fz = 0.0;
    for (;;) {
      z = yk - og.grad / L;
      fz = w_objective(z, s, p);
      if (fz <= og.value - 0.5 / L * gnorm2) break;
      L *= 2.0;
      if (!std::isfinite(L)) throw SolverError("W-step line search failed to find a decreasing step");
    }
    if (fz > fx) {
      t = 1.0;
      yk = x;
      continue;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    yk = z + ((t - 1.0) / tn) * (z - x);
    const double rel = (fx - fz) / std::max(fx, std::numeric_limits<double>::min());
    x = std::move(z);
    fx = fz;
    t = tn;
    L *= 0.8;
    if (rel < cfg.inner_gd_tol) break;
  }
  res.W = std::move(x);
  res.exit_loss = fx;
  res.lipschitz = L;
  return res;
}

/// argmin_u ||u||_inf + (rho/2) ||u - z||^2 for z = lambda v - c - y.
inline Vector u_step(const Vector& z, double rho) { return prox_linf(z, rho); }

struct LambdaStep {
  double lambda = 0.0;
  bool degenerate = false;  // <v, v> = 0; lambda kept
};

/// max(lambda_min, <v, u + c + y> / <v, v>).
inline LambdaStep lambda_step(const Vector& u, const Vector& v, const Vector& c, const Vector& y, double lambda_min,
                              double previous) {
  const double vv = v.squaredNorm();
  if (vv == 0.0) return {previous, true};
  return {std::max(lambda_min, v.dot(u + c + y) / vv), false};
}

/// y + eta (u - lambda v + c).
inline Vector y_step(const Vector& y, const Vector& u, const Vector& v, const Vector& c, double lambda, double eta) {
  return y + eta * (u - lambda * v + c);
}

inline double augmented_loss(const SolverState& s, const SecantProblem& p, double rho) {
  const Vector v = relaxed_distances(s.W, p, s.alpha);
  const double linf = s.u.size() == 0 ? 0.0 : s.u.cwiseAbs().maxCoeff();
  return linf + 0.5 * rho * (s.u - s.lambda * v + p.c + s.y).squaredNorm();
}

inline double augmented_loss(const SolverState& s, std::span<const SecantRef> secants, const Dataset& data,
                             double rho) {
  return augmented_loss(s, make_problem(data, secants), rho);
}

/// Max distortion of the quantized embedding over the problem's secants, at the optimal scale.
inline DistortionReport problem_distortion(const Matrix& W, const SecantProblem& p) {
  return distortion_over_secants(codes_from_projections(project_rows(p.X, W)), p.local, 1);
}

/// max_k |lambda d_H(k) - c_k| over the problem's secants, at a fixed scale.
inline double residual_at_scale(const Matrix& W, const SecantProblem& p, double lambda) {
  const BinaryCodes codes = codes_from_projections(project_rows(p.X, W));
  double worst = 0.0;
  for (const auto& s : p.local) worst = std::max(worst, std::abs(lambda * codes.distance(s.i, s.j) - s.c));
  return worst;
}

struct TrainResult {
  HashModel model;
  SolverState state;
  SolverStatus status = SolverStatus::max_iterations;
  double initial_delta = 0.0;  // delta of W_0 before any update
  int lambda_warnings = 0;
};

/// Full NIBH solve on a fixed secant problem, starting from W0.
inline TrainResult train_nibh(const SecantProblem& p, const Matrix& W0, const SolverConfig& cfg,
                              std::ostream* progress = nullptr) {
  cfg.validate();
  if (W0.cols() != p.X.cols() || W0.rows() < 1) {
    throw DimensionError("initial W is " + shape_str(W0.rows(), W0.cols()) + " but data has N = " +
                         std::to_string(p.X.cols()));
  }
  const auto n = static_cast<Eigen::Index>(p.size());
  SolverState s;
  s.W = W0;
  s.u = Vector::Zero(n);
  s.y = Vector::Zero(n);
  s.alpha = cfg.alpha_start;
  s.lambda = 1.0;
  if (cfg.initial_lambda > 0.0) {
    s.lambda = cfg.initial_lambda;
  } else if (cfg.fit_initial_lambda) {
    const Vector v = relaxed_distances(s.W, p, cfg.alpha_end);
    const double vv = v.squaredNorm();
    if (vv > 0.0) s.lambda = std::max(cfg.lambda_min, v.dot(p.c) / vv);
  }

  if (cfg.warm_u) s.u = s.lambda * relaxed_distances(s.W, p, s.alpha) - p.c;

  TrainResult out;
  auto record = [&](double loss) {
    HistoryEntry e;
    e.iter = s.iter;
    e.loss = loss;
    const Vector v = relaxed_distances(s.W, p, s.alpha);
    e.relaxed_linf = (s.lambda * v - p.c).cwiseAbs().maxCoeff();
    e.delta = cfg.track_delta ? problem_distortion(s.W, p).delta : std::numeric_limits<double>::quiet_NaN();
    e.alpha = s.alpha;
    e.lambda = s.lambda;
    s.loss_history.push_back(e);
    if (progress != nullptr) {
      nlohmann::ordered_json j;
      j["iteration"] = e.iter;
      j["loss"] = e.loss;
      j["relaxed_linf"] = e.relaxed_linf;
      j["delta"] = cfg.track_delta ? nlohmann::ordered_json(e.delta) : nlohmann::ordered_json(nullptr);
      j["alpha"] = e.alpha;
      j["lambda"] = e.lambda;
      *progress << j.dump() << '\n';
    }
  };

  out.initial_delta = problem_distortion(s.W, p).delta;
  record(augmented_loss(s, p, cfg.rho));

  double min_loss = std::numeric_limits<double>::infinity();
  int above = 0;
  SolverState best;
  double prev_loss = std::numeric_limits<double>::quiet_NaN();
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    const auto ws = w_step(s, p, cfg);
    s.W = ws.W;
    s.lipschitz = ws.lipschitz;

    const Vector v = relaxed_distances(s.W, p, s.alpha);
    s.u = u_step(s.lambda * v - p.c - s.y, cfg.rho);
    if (!cfg.freeze_lambda) {
      const auto ls = lambda_step(s.u, v, p.c, s.y, cfg.lambda_min, s.lambda);
      if (ls.degenerate) ++out.lambda_warnings;
      s.lambda = ls.lambda;
    }
    s.y = y_step(s.y, s.u, v, p.c, s.lambda, cfg.eta);
    s.iter = it;

    const double loss = augmented_loss(s, p, cfg.rho);
    if (!std::isfinite(loss)) throw SolverError("augmented loss became non-finite at iteration " + std::to_string(it));
    record(loss);

    if (loss < min_loss) {
      min_loss = loss;
      above = 0;
      best = s;
    } else if (loss > 10.0 * min_loss) {
      if (++above >= 20) {
        out.status = SolverStatus::diverged;
        auto history = std::move(s.loss_history);
        s = std::move(best);
        s.loss_history = std::move(history);
        break;
      }
    } else {
      above = 0;
    }

    const bool at_end = s.alpha >= cfg.alpha_end;
    if (at_end && std::isfinite(prev_loss) &&
        std::abs(loss - prev_loss) <= cfg.convergence_tol * std::max(std::abs(prev_loss), 1e-300)) {
      out.status = SolverStatus::converged;
      break;
    }
    prev_loss = at_end ? loss : std::numeric_limits<double>::quiet_NaN();
    s.alpha = std::min(s.alpha * cfg.alpha_growth, cfg.alpha_end);
  }

  out.model.W = s.W;
  out.model.lambda = s.lambda;
  out.model.alpha = cfg.alpha_end;
  out.state = std::move(s);
  return out;
}

/// NIBH on a dataset and secant list; W_0 is Gaussian under cfg.seed.
inline TrainResult train_nibh(const Dataset& data, std::span<const SecantRef> secants, std::size_t bits,
                              const SolverConfig& cfg, std::ostream* progress = nullptr) {
  if (bits < 1) throw std::invalid_argument("M must be at least 1");
  const SecantProblem p = make_problem(data, secants);
  auto res = train_nibh(p, gaussian_matrix(bits, data.dim(), cfg.seed), cfg, progress);
  res.model.mean = data.mean;
  res.model.normalized = data.normalized;
  return res;
}

inline nlohmann::ordered_json to_json(const HistoryEntry& e) {
  nlohmann::ordered_json j;
  j["iter"] = e.iter;
  j["loss"] = e.loss;
  j["relaxed_linf"] = e.relaxed_linf;
  j["delta"] = e.delta;
  j["alpha"] = e.alpha;
  j["lambda"] = e.lambda;
  return j;
}

inline nlohmann::ordered_json to_json(const SolverConfig& c) {
  nlohmann::ordered_json j;
  j["rho"] = c.rho;
  j["eta"] = c.eta;
  j["alpha_start"] = c.alpha_start;
  j["alpha_end"] = c.alpha_end;
  j["alpha_growth"] = c.alpha_growth;
  j["max_outer_iters"] = c.max_outer_iters;
  j["inner_gd_iters"] = c.inner_gd_iters;
  j["inner_gd_tol"] = c.inner_gd_tol;
  j["convergence_tol"] = c.convergence_tol;
  j["lambda_min"] = c.lambda_min;
  j["seed"] = c.seed;
  j["fit_initial_lambda"] = c.fit_initial_lambda;
  j["target_convention"] = kTargetConvention;
  return j;
}

}  // namespace isohash
