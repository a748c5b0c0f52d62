#pragma once

// Approximate message passing for SLOPE:
//
//   beta^{t+1} = prox_{J_{theta_t}}(X^T z^t + beta^t),   theta_t = alpha * tau_t
//   z^{t+1}    = y - X beta^{t+1} + (z^t / n) ||beta^{t+1}||_0^*
//
// starting from beta^0 = 0, z^0 = y.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "slope_amp/errors.hpp"
#include "slope_amp/sorted_l1.hpp"

namespace slope_amp {

struct AmpState {
  Vector beta;
  Vector z;
  double tau_hat = 0.0;  // ||z|| / sqrt(n)
  int iter = 0;
};

struct AmpConfig {
  LambdaSeq alpha;
  int max_iter = 500;
  double opt_tol = 1e-12;  // stop once ||beta^{t+1} - beta^t||^2 / p <= opt_tol
  bool record_trajectory = true;
  /// When non-empty, iteration t thresholds at alpha * tau_schedule[t]
  /// (last entry reused) instead of the empirical tau_hat.
  std::vector<double> tau_schedule;

  void validate() const {
    if (max_iter < 1) throw InvalidArgument("amp: max_iter must be >= 1");
    if (!(opt_tol > 0.0)) throw InvalidArgument("amp: opt_tol must be > 0");
    if (alpha.size() == 0) throw InvalidArgument("amp: alpha is empty");
    for (double tau : tau_schedule) {
      if (!(tau >= 0.0) || !std::isfinite(tau)) {
        throw InvalidArgument("amp: tau schedule entries must be finite and >= 0");
      }
    }
  }
};

/// One row of the AMP trajectory.
struct AmpRecord {
  int iter = 0;
  double tau_hat = 0.0;
  Index unique_nonzeros = 0;  // ||beta^t||_0^*
  double step_diff = std::numeric_limits<double>::quiet_NaN();  // ||beta^t - beta^{t-1}||^2 / p
  double ref_error = std::numeric_limits<double>::quiet_NaN();  // ||beta^t - ref||^2 / p
};

struct AmpResult {
  AmpState state;
  std::vector<AmpRecord> trajectory;
  bool converged = false;
};

inline double empirical_tau(const VectorCRef& z) {
  return z.size() ? z.norm() / std::sqrt(static_cast<double>(z.size())) : 0.0;
}

inline AmpState amp_init(const VectorCRef& y, Index p) {
  if (y.size() == 0) throw InvalidArgument("amp_init: empty response");
  if (p < 1) throw InvalidArgument("amp_init: p must be >= 1");
  AmpState s;
  s.beta = Vector::Zero(p);
  s.z = y;
  s.tau_hat = empirical_tau(y);
  s.iter = 0;
  return s;
}

namespace detail {

inline void check_amp_dims(const AmpState& s, const MatrixCRef& X, const VectorCRef& y,
                           const LambdaSeq& alpha) {
  if (X.rows() != y.size() || X.rows() != s.z.size() || X.cols() != s.beta.size() ||
      X.cols() != alpha.size()) {
    throw InvalidArgument("amp: dimension mismatch between X, y, state and alpha");
  }
}

}  // namespace detail

/// One AMP iteration. `tau` overrides the empirical noise level used for the
/// threshold theta = alpha * tau.
inline AmpState amp_step(const AmpState& s, const MatrixCRef& X, const VectorCRef& y,
                         const LambdaSeq& alpha, std::optional<double> tau = std::nullopt) {
  detail::check_amp_dims(s, X, y, alpha);
  const double level = tau.value_or(s.tau_hat);
  if (!std::isfinite(level)) throw NumericFailure(s.iter, "tau");
  const Index n = X.rows();

  const Vector pseudo_data = X.transpose() * s.z + s.beta;
  AmpState next;
  next.beta = prox_sorted_l1(pseudo_data, alpha.scaled(level));
  if (!next.beta.allFinite()) throw NumericFailure(s.iter + 1, "beta");

  const double onsager = static_cast<double>(divergence_unique_nonzeros(next.beta)) /
                         static_cast<double>(n);
  next.z = y - X * next.beta + onsager * s.z;
  if (!next.z.allFinite()) throw NumericFailure(s.iter + 1, "residual z");
  next.tau_hat = empirical_tau(next.z);
  next.iter = s.iter + 1;
  return next;
}

/// Called after every step with (new state, previous state).
using AmpObserver = std::function<void(const AmpState&, const AmpState&)>;

inline AmpResult amp_run(const MatrixCRef& X, const VectorCRef& y, const AmpConfig& cfg,
                         const Vector* reference = nullptr, const AmpObserver& observer = {}) {
  cfg.validate();
  const Index p = X.cols();
  if (reference && reference->size() != p) {
    throw InvalidArgument("amp_run: reference length mismatch");
  }
  const double inv_p = 1.0 / static_cast<double>(p);
  auto record = [&](const AmpState& s, double step_diff) {
    AmpRecord r;
    r.iter = s.iter;
    r.tau_hat = s.tau_hat;
    r.unique_nonzeros = divergence_unique_nonzeros(s.beta);
    r.step_diff = step_diff;
    if (reference) r.ref_error = (s.beta - *reference).squaredNorm() * inv_p;
    return r;
  };

  AmpResult result;
  result.state = amp_init(y, p);
  if (cfg.record_trajectory) {
    result.trajectory.push_back(record(result.state, std::numeric_limits<double>::quiet_NaN()));
  }
  for (int t = 0; t < cfg.max_iter; ++t) {
    std::optional<double> tau;
    if (!cfg.tau_schedule.empty()) {
      tau = cfg.tau_schedule[std::min<std::size_t>(static_cast<std::size_t>(t),
                                                   cfg.tau_schedule.size() - 1)];
    }
    AmpState next = amp_step(result.state, X, y, cfg.alpha, tau);
    const double step_diff = (next.beta - result.state.beta).squaredNorm() * inv_p;
    if (observer) observer(next, result.state);
    if (cfg.record_trajectory) result.trajectory.push_back(record(next, step_diff));
    result.state = std::move(next);
    if (step_diff <= cfg.opt_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

/// The subgradient certificate built from two consecutive AMP iterates:
/// nu^t = mu_t (X^T z^{t-1} + beta^{t-1} - beta^t) with
/// mu_t = <lambda, theta_{t-1}> / ||theta_{t-1}||^2 and theta_{t-1} = alpha * tau_hat_{t-1}.
/// nu^t lies in the subdifferential of J_{mu_t theta_{t-1}} at beta^t.
struct KktCertificate {
  Vector nu;
  double mu = 0.0;
  LambdaSeq theta_prev;
};

inline KktCertificate kkt_certificate(const AmpState& current, const AmpState& prev,
                                      const MatrixCRef& X, const LambdaSeq& lambda,
                                      const LambdaSeq& alpha) {
  if (current.iter != prev.iter + 1) {
    throw InvalidArgument("kkt_residual: states are not consecutive iterates");
  }
  detail::require_same_length(lambda.size(), alpha.size(), "kkt_residual");
  detail::require_same_length(X.cols(), lambda.size(), "kkt_residual");
  KktCertificate cert;
  cert.theta_prev = alpha.scaled(prev.tau_hat);
  const double theta_sq = cert.theta_prev.values().squaredNorm();
  cert.mu = theta_sq > 0.0 ? lambda.values().dot(cert.theta_prev.values()) / theta_sq : 0.0;
  cert.nu = cert.mu * (X.transpose() * prev.z + prev.beta - current.beta);
  return cert;
}

/// ||nu^t - X^T (y - X beta^t)|| / sqrt(p): the norm of an element of the
/// SLOPE subdifferential at beta^t, scaled per coordinate.
inline double kkt_residual(const AmpState& current, const AmpState& prev, const MatrixCRef& X,
                           const VectorCRef& y, const LambdaSeq& lambda,
                           const LambdaSeq& alpha) {
  const KktCertificate cert = kkt_certificate(current, prev, X, lambda, alpha);
  const Vector grad = X.transpose() * (y - X * current.beta);
  return (cert.nu - grad).norm() / std::sqrt(static_cast<double>(X.cols()));
}

/// The SLOPE penalty solved by an AMP fixed point:
/// lambda = theta (1 - ||beta||_0^* / n) with theta = alpha * tau_hat.
inline LambdaSeq fixed_point_lambda(const AmpState& s, const LambdaSeq& alpha, Index n) {
  const double omega = static_cast<double>(divergence_unique_nonzeros(s.beta)) /
                       static_cast<double>(n);
  if (omega >= 1.0) {
    throw CalibrationError("fixed_point_lambda: ||beta||_0^* >= n, no valid penalty");
  }
  return alpha.scaled(s.tau_hat * (1.0 - omega));
}

}  // namespace slope_amp
