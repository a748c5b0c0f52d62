#pragma once

// Seeded problem generation, the AMP / FISTA / ISTA convergence benchmark
// and the empirical-vs-predicted MSE experiment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "slope_amp/amp.hpp"
#include "slope_amp/baselines.hpp"
#include "slope_amp/calibration.hpp"
#include "slope_amp/errors.hpp"
#include "slope_amp/parallel.hpp"
#include "slope_amp/random.hpp"
#include "slope_amp/sorted_l1.hpp"
#include "slope_amp/state_evolution.hpp"

namespace slope_amp {

/// y = X beta + w with X_ij ~ N(0, 1/n), beta_i ~ prior, w_i ~ N(0, sigma_w^2).
struct ProblemInstance {
  Matrix X;
  Vector beta_true;
  Vector w;
  Vector y;
  double delta = 0.0;
  double sigma_w = 0.0;
  std::uint64_t seed = 0;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
};

/// Column j of X, the signal and the noise each come from their own stream,
/// so the instance is a pure function of (n, p, prior, sigma_w, seed).
inline ProblemInstance gen_instance(Index n, Index p, const PriorSpec& prior, double sigma_w,
                                    std::uint64_t seed) {
  if (n < 1 || p < 1) throw InvalidArgument("gen_instance: n and p must be >= 1");
  if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w)) {
    throw InvalidArgument("gen_instance: sigma_w must be finite and >= 0");
  }
  prior.validate();
  ProblemInstance inst;
  inst.seed = seed;
  inst.sigma_w = sigma_w;
  inst.delta = static_cast<double>(n) / static_cast<double>(p);
  inst.X.resize(n, p);
  const double sd = 1.0 / std::sqrt(static_cast<double>(n));
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t j) {
    CounterRng rng(seed, StreamRole::kDesign, j);
    for (Index i = 0; i < n; ++i) inst.X(i, static_cast<Index>(j)) = sd * rng.normal();
  });
  CounterRng sig(seed, StreamRole::kSignal);
  inst.beta_true.resize(p);
  for (Index i = 0; i < p; ++i) inst.beta_true[i] = prior.draw(sig);
  inst.w = Vector::Zero(n);
  if (sigma_w > 0.0) {
    CounterRng noise(seed, StreamRole::kNoise);
    for (Index i = 0; i < n; ++i) inst.w[i] = sigma_w * noise.normal();
  }
  inst.y = inst.X * inst.beta_true + inst.w;
  return inst;
}

/// ||b_t - b_ref||^2 / p.
inline double opt_error(const VectorCRef& b_t, const VectorCRef& b_ref) {
  detail::require_same_length(b_t.size(), b_ref.size(), "opt_error");
  if (b_t.size() == 0) return 0.0;
  return (b_t - b_ref).squaredNorm() / static_cast<double>(b_t.size());
}

/// Size of the symmetric difference of supp(b_t) = {i : b_t,i != 0} and
/// supp(b_ref) = {i : |b_ref,i| > ref_tol}.
inline Index support_set_diff(const VectorCRef& b_t, const VectorCRef& b_ref,
                              double ref_tol = 0.0) {
  detail::require_same_length(b_t.size(), b_ref.size(), "support_set_diff");
  Index diff = 0;
  for (Index i = 0; i < b_t.size(); ++i) {
    if ((b_t[i] != 0.0) != (std::abs(b_ref[i]) > ref_tol)) ++diff;
  }
  return diff;
}

/// Support tolerance for a reference solution: 1e-10 * max|b|.
inline double reference_support_tol(const VectorCRef& b_ref) {
  return b_ref.size() ? 1e-10 * b_ref.cwiseAbs().maxCoeff() : 0.0;
}

struct TraceRow {
  int iter = 0;
  double opt_error = 0.0;
  Index set_diff = 0;
  double cost = std::numeric_limits<double>::quiet_NaN();
  double tau_hat = std::numeric_limits<double>::quiet_NaN();
};

struct SolverBench {
  std::string solver;
  std::vector<int> first_iter;  // per threshold; -1 when never reached
  int first_zero_set_diff = -1;
  std::vector<TraceRow> trace;
};

struct BenchReport {
  std::vector<double> thresholds;
  std::vector<SolverBench> solvers;  // AMP, FISTA, ISTA
  LambdaSeq lambda_requested;
  LambdaSeq alpha;
  LambdaSeq lambda_solved;  // penalty whose minimizer the AMP fixed point is
  double lambda_mismatch = 0.0;  // ||lambda_solved - lambda_requested|| / ||lambda_requested||
  Vector reference;

  const SolverBench& solver(const std::string& name) const {
    for (const auto& s : solvers) {
      if (s.solver == name) return s;
    }
    throw InvalidArgument("bench report: unknown solver " + name);
  }
};

struct BenchOptions {
  std::vector<double> thresholds{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  int amp_max_iter = 1000;
  int fista_max_iter = 50000;
  int ista_max_iter = 100000;
  double pilot_tol = 1e-24;  // AMP step difference defining its fixed point
  double reference_tol = 1e-14;
  int reference_max_iter = 100000;
  int trace_stride = 1;  // keep every k-th trace row (first-hit iterations are exact regardless)
  StepRule step_rule = StepRule::kFrobenius;  // FISTA / ISTA step 1/L
};

namespace detail {

/// Tracks first-hit iterations for one solver.
class BenchTracker {
 public:
  BenchTracker(std::string name, const std::vector<double>& thresholds, const Vector& reference,
               int stride)
      : thresholds_(thresholds),
        reference_(reference),
        ref_tol_(reference_support_tol(reference)),
        stride_(std::max(1, stride)) {
    result_.solver = std::move(name);
    result_.first_iter.assign(thresholds.size(), -1);
  }

  /// Returns true once every threshold and a zero set difference were hit.
  bool observe(int iter, const Vector& beta, double cost, double tau_hat) {
    TraceRow row;
    row.iter = iter;
    row.opt_error = opt_error(beta, reference_);
    row.set_diff = support_set_diff(beta, reference_, ref_tol_);
    row.cost = cost;
    row.tau_hat = tau_hat;
    for (std::size_t k = 0; k < thresholds_.size(); ++k) {
      if (result_.first_iter[k] < 0 && row.opt_error <= thresholds_[k]) {
        result_.first_iter[k] = iter;
      }
    }
    if (result_.first_zero_set_diff < 0 && row.set_diff == 0) result_.first_zero_set_diff = iter;
    if (iter % stride_ == 0 || done()) result_.trace.push_back(row);
    return done();
  }

  bool done() const {
    if (result_.first_zero_set_diff < 0) return false;
    return std::all_of(result_.first_iter.begin(), result_.first_iter.end(),
                       [](int v) { return v >= 0; });
  }

  SolverBench take() { return std::move(result_); }

 private:
  const std::vector<double>& thresholds_;
  const Vector& reference_;
  double ref_tol_;
  int stride_;
  SolverBench result_;
};

}  // namespace detail

/// Runs AMP with threshold direction `alpha`, takes the penalty solved by
/// its fixed point, computes the reference minimizer for that penalty and
/// records when AMP, FISTA and ISTA (all started at zero) reach each
/// optimization-error threshold and a zero support difference.
inline BenchReport run_convergence_bench(const ProblemInstance& inst, const LambdaSeq& alpha,
                                         const LambdaSeq& lambda_requested,
                                         const BenchOptions& opts = {}) {
  if (alpha.size() != inst.p()) throw InvalidArgument("bench: alpha length mismatch");
  if (lambda_requested.size() != inst.p()) throw InvalidArgument("bench: lambda length mismatch");
  BenchReport report;
  report.thresholds = opts.thresholds;
  report.lambda_requested = lambda_requested;
  report.alpha = alpha;

  AmpConfig pilot_cfg;
  pilot_cfg.alpha = alpha;
  pilot_cfg.max_iter = opts.amp_max_iter;
  pilot_cfg.opt_tol = opts.pilot_tol;
  pilot_cfg.record_trajectory = false;
  const AmpResult pilot = amp_run(inst.X, inst.y, pilot_cfg);
  report.lambda_solved = fixed_point_lambda(pilot.state, alpha, inst.n());
  report.lambda_mismatch = (report.lambda_solved.values() - lambda_requested.values()).norm() /
                           lambda_requested.values().norm();

  report.reference = reference_solution(inst.X, inst.y, report.lambda_solved,
                                        opts.reference_tol, opts.reference_max_iter);
  const LambdaSeq& lambda = report.lambda_solved;

  {
    detail::BenchTracker tracker("AMP", report.thresholds, report.reference, opts.trace_stride);
    AmpState state = amp_init(inst.y, inst.p());
    for (int t = 1; t <= opts.amp_max_iter; ++t) {
      state = amp_step(state, inst.X, inst.y, alpha);
      const double cost = slope_cost(state.beta, inst.X, inst.y, lambda);
      if (tracker.observe(t, state.beta, cost, state.tau_hat)) break;
    }
    report.solvers.push_back(tracker.take());
  }

  SolverOptions sopts;
  sopts.opt_tol = std::numeric_limits<double>::min();
  sopts.record_cost = true;
  sopts.lipschitz = lipschitz_bound(inst.X, opts.step_rule);
  auto run_solver = [&](const std::string& name, int max_iter, auto&& solver) {
    detail::BenchTracker tracker(name, report.thresholds, report.reference, opts.trace_stride);
    SolverOptions o = sopts;
    o.max_iter = max_iter;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    // Cost is recorded in the solver trace; pair it with the tracked rows below.
    const SolverTrace trace = solver(inst.X, inst.y, lambda, o, [&](int k, const Vector& b) {
      return tracker.observe(k, b, nan, nan);
    });
    SolverBench bench = tracker.take();
    for (TraceRow& row : bench.trace) {
      row.cost = trace.records[static_cast<std::size_t>(row.iter - 1)].cost;
    }
    report.solvers.push_back(std::move(bench));
  };
  run_solver("FISTA", opts.fista_max_iter,
             [](auto&&... args) { return fista_run(args...); });
  run_solver("ISTA", opts.ista_max_iter, [](auto&&... args) { return ista_run(args...); });
  return report;
}

struct MseReport {
  Index n = 0;
  Index p = 0;
  double delta = 0.0;
  double sigma_w = 0.0;
  double empirical_mse = 0.0;
  double stderr_ = 0.0;  // 0 in single-seed mode
  double predicted_mse = 0.0;
  double tau_star_sq = 0.0;
  std::vector<double> per_seed;
  CalibrationResult calibration;
};

struct MseOptions {
  std::uint64_t base_seed = 1;
  double solver_tol = 1e-12;
  int solver_max_iter = 100000;
  SeConfig se;  // p_se, sigma_w and delta are overwritten from the instance dimensions
  CalibrationOptions calibration;
};

/// Empirical ||beta_hat - beta||^2 / p over seeds versus delta (tau_*^2 - sigma_w^2),
/// with tau_* from the state evolution at the calibrated alpha.
inline MseReport mse_experiment(Index n, Index p, const PriorSpec& prior, double sigma_w,
                                const LambdaSeq& lambda, int n_seeds,
                                const MseOptions& opts = {}) {
  if (n_seeds < 1) throw InvalidArgument("mse_experiment: n_seeds must be >= 1");
  if (lambda.size() != p) throw InvalidArgument("mse_experiment: lambda length mismatch");
  MseReport rep;
  rep.n = n;
  rep.p = p;
  rep.delta = static_cast<double>(n) / static_cast<double>(p);
  rep.sigma_w = sigma_w;

  SeConfig se = opts.se;
  se.p_se = p;
  se.sigma_w = sigma_w;
  se.delta = rep.delta;
  rep.calibration = alpha_of_lambda(lambda, prior, se, opts.calibration);
  rep.tau_star_sq = rep.calibration.tau_star_sq;
  rep.predicted_mse = predicted_mse(rep.tau_star_sq, se);

  rep.per_seed.assign(static_cast<std::size_t>(n_seeds), 0.0);
  parallel_for(rep.per_seed.size(), [&](std::size_t k) {
    const ProblemInstance inst = gen_instance(n, p, prior, sigma_w, opts.base_seed + k);
    const Vector beta_hat =
        reference_solution(inst.X, inst.y, lambda, opts.solver_tol, opts.solver_max_iter);
    rep.per_seed[k] = opt_error(beta_hat, inst.beta_true);
  });
  const McEstimate est = detail::summarize(rep.per_seed);
  rep.empirical_mse = est.mean;
  rep.stderr_ = est.stderr_;
  return rep;
}

}  // namespace slope_amp
