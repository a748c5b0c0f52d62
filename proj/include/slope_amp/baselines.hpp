#pragma once

// Proximal-gradient reference solvers for the SLOPE cost
//   C(b) = 0.5 ||y - X b||^2 + J_lambda(b).

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "slope_amp/errors.hpp"
#include "slope_amp/random.hpp"
#include "slope_amp/sorted_l1.hpp"

namespace slope_amp {

inline double slope_cost(const VectorCRef& b, const MatrixCRef& X, const VectorCRef& y,
                         const LambdaSeq& lambda) {
  if (X.rows() != y.size() || X.cols() != b.size()) {
    throw InvalidArgument("slope_cost: dimension mismatch");
  }
  return 0.5 * (y - X * b).squaredNorm() + sorted_l1_norm(b, lambda);
}

/// Largest singular value of X by power iteration on X^T X, started from a
/// fixed pseudo-random unit vector. Stops when the Rayleigh quotient changes
/// by less than tol (relative).
inline double power_iteration_sigma_max(const MatrixCRef& X, double tol = 1e-8,
                                        int max_iter = 20000) {
  if (X.size() == 0 || X.cwiseAbs().maxCoeff() == 0.0) {
    throw InvalidArgument("power_iteration_sigma_max: X must be nonzero");
  }
  CounterRng rng(0, StreamRole::kPowerIteration);
  Vector v(X.cols());
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  v.normalize();
  double sigma_sq = 0.0;
  for (int k = 0; k < max_iter; ++k) {
    const Vector xv = X * v;
    const double next = xv.squaredNorm();
    Vector w = X.transpose() * xv;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;  // start vector in the null space
    v = w / norm;
    if (k > 0 && std::abs(next - sigma_sq) <= tol * next) return std::sqrt(next);
    sigma_sq = next;
  }
  throw NonConvergence("power_iteration_sigma_max: no convergence after " +
                       std::to_string(max_iter) + " iterations");
}

struct SolverRecord {
  int iter = 0;
  double cost = std::numeric_limits<double>::quiet_NaN();
  double step_diff = std::numeric_limits<double>::quiet_NaN();  // ||b^k - b^{k-1}||^2 / p
};

struct SolverTrace {
  std::vector<SolverRecord> records;
  Vector beta;
  int iterations = 0;
  bool converged = false;
};

/// Lipschitz bound L for the gradient of 0.5 ||y - X b||^2; the step is 1/L.
enum class StepRule {
  kSpectral,   // L = sigma_max(X)^2 (tight)
  kFrobenius,  // L = ||X||_F^2 >= sigma_max(X)^2
};

inline double lipschitz_bound(const MatrixCRef& X, StepRule rule) {
  if (rule == StepRule::kFrobenius) return X.squaredNorm();
  const double s = power_iteration_sigma_max(X, 1e-10);
  // The Rayleigh quotient approaches sigma^2 from below; 1/L must not exceed 1/sigma^2.
  return s * s * (1.0 + 1e-8);
}

struct SolverOptions {
  int max_iter = 100000;
  double opt_tol = 1e-12;  // stop once ||b^k - b^{k-1}||^2 / p <= opt_tol
  bool record_cost = true;
  StepRule step_rule = StepRule::kSpectral;
  double lipschitz = 0.0;  // overrides step_rule when > 0
  const Vector* start = nullptr;
};

/// Called with (k, b^k) after every iteration; returning true stops the run.
using SolverObserver = std::function<bool(int, const Vector&)>;

namespace detail {

inline double step_size(const MatrixCRef& X, const SolverOptions& opts) {
  return 1.0 / (opts.lipschitz > 0.0 ? opts.lipschitz : lipschitz_bound(X, opts.step_rule));
}

inline void check_solver_inputs(const MatrixCRef& X, const VectorCRef& y,
                                const LambdaSeq& lambda, const SolverOptions& opts) {
  if (X.rows() != y.size() || X.cols() != lambda.size()) {
    throw InvalidArgument("solver: dimension mismatch between X, y and lambda");
  }
  if (opts.start && opts.start->size() != X.cols()) {
    throw InvalidArgument("solver: start vector has wrong length");
  }
  if (opts.max_iter < 1) throw InvalidArgument("solver: max_iter must be >= 1");
  if (!(opts.opt_tol > 0.0)) throw InvalidArgument("solver: opt_tol must be > 0");
}

}  // namespace detail

/// ISTA: b <- prox_{J_{s lambda}}(b - s X^T (X b - y)) with s = 1 / sigma_max(X)^2.
inline SolverTrace ista_run(const MatrixCRef& X, const VectorCRef& y, const LambdaSeq& lambda,
                            const SolverOptions& opts = {},
                            const SolverObserver& observer = {}) {
  detail::check_solver_inputs(X, y, lambda, opts);
  const double step = detail::step_size(X, opts);
  const LambdaSeq scaled = lambda.scaled(step);
  const double inv_p = 1.0 / static_cast<double>(X.cols());

  SolverTrace trace;
  Vector b = opts.start ? *opts.start : Vector::Zero(X.cols());
  Vector residual = X * b - y;
  for (int k = 1; k <= opts.max_iter; ++k) {
    Vector next = prox_sorted_l1(b - step * (X.transpose() * residual), scaled);
    if (!next.allFinite()) throw NumericFailure(k, "ista iterate");
    residual = X * next - y;
    SolverRecord rec;
    rec.iter = k;
    rec.step_diff = (next - b).squaredNorm() * inv_p;
    if (opts.record_cost) rec.cost = 0.5 * residual.squaredNorm() + sorted_l1_norm(next, lambda);
    trace.records.push_back(rec);
    b = std::move(next);
    trace.iterations = k;
    const bool stop = observer && observer(k, b);
    if (rec.step_diff <= opts.opt_tol) trace.converged = true;
    if (stop || trace.converged) break;
  }
  trace.beta = std::move(b);
  return trace;
}

/// FISTA with the standard momentum sequence t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2,
/// no restarts.
inline SolverTrace fista_run(const MatrixCRef& X, const VectorCRef& y, const LambdaSeq& lambda,
                             const SolverOptions& opts = {},
                             const SolverObserver& observer = {}) {
  detail::check_solver_inputs(X, y, lambda, opts);
  const double step = detail::step_size(X, opts);
  const LambdaSeq scaled = lambda.scaled(step);
  const double inv_p = 1.0 / static_cast<double>(X.cols());

  SolverTrace trace;
  Vector x = opts.start ? *opts.start : Vector::Zero(X.cols());
  Vector xx = X * x;        // X x^{k}
  Vector extrap = x;        // y^k
  Vector x_extrap = xx;     // X y^k
  double t = 1.0;
  for (int k = 1; k <= opts.max_iter; ++k) {
    Vector next = prox_sorted_l1(extrap - step * (X.transpose() * (x_extrap - y)), scaled);
    if (!next.allFinite()) throw NumericFailure(k, "fista iterate");
    Vector x_next = X * next;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    extrap = next + momentum * (next - x);
    x_extrap = (1.0 + momentum) * x_next - momentum * xx;

    SolverRecord rec;
    rec.iter = k;
    rec.step_diff = (next - x).squaredNorm() * inv_p;
    if (opts.record_cost) {
      rec.cost = 0.5 * (x_next - y).squaredNorm() + sorted_l1_norm(next, lambda);
    }
    trace.records.push_back(rec);
    x = std::move(next);
    xx = std::move(x_next);
    t = t_next;
    trace.iterations = k;
    const bool stop = observer && observer(k, x);
    if (rec.step_diff <= opts.opt_tol) trace.converged = true;
    if (stop || trace.converged) break;
  }
  trace.beta = std::move(x);
  return trace;
}

/// Surrogate for the exact SLOPE minimizer: FISTA run to a step difference
/// of `tol` (at most max_iter iterations), then one ISTA step.
inline Vector reference_solution(const MatrixCRef& X, const VectorCRef& y,
                                 const LambdaSeq& lambda, double tol = 1e-14,
                                 int max_iter = 100000) {
  SolverOptions opts;
  opts.max_iter = max_iter;
  opts.opt_tol = tol;
  opts.record_cost = false;
  opts.lipschitz = lipschitz_bound(X, StepRule::kSpectral);
  const SolverTrace fista = fista_run(X, y, lambda, opts);
  SolverOptions polish = opts;
  polish.max_iter = 1;
  polish.start = &fista.beta;
  return ista_run(X, y, lambda, polish).beta;
}

}  // namespace slope_amp
