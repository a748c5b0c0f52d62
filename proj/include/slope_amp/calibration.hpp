#pragma once

// Calibration between a SLOPE penalty lambda and the AMP threshold
// direction alpha:
//
//   lambda(alpha) = alpha tau_* (1 - E ||prox_{J_{alpha tau_*}}(B + tau_* Z)||_0^* / n)
//
// and its inverse by bisection along the ray alpha = a * lambda / lambda_1.

#include <cmath>
#include <string>

#include "slope_amp/errors.hpp"
#include "slope_amp/sorted_l1.hpp"
#include "slope_amp/state_evolution.hpp"

namespace slope_amp {

struct LambdaOfAlpha {
  Vector lambda;  // may hold negative entries close to A_min
  double scale = 0.0;  // tau_* (1 - E||.||_0^* / n)
  double tau_star_sq = 0.0;
  double scale_stderr = 0.0;  // Monte-Carlo standard error of `scale`
};

struct CalibrationResult {
  LambdaSeq alpha;
  double alpha_scale = 0.0;  // a with alpha = a * lambda / lambda_1
  double scale = 0.0;        // lambda = alpha * scale
  double tau_star_sq = 0.0;
  Vector lambda_check;  // lambda(alpha) recomputed at the solution
  double mc_stderr = 0.0;  // standard error of lambda_check per unit of alpha
  int evaluations = 0;
};

struct CalibrationOptions {
  double rel_tol = 1e-3;  // bisection stops when (a2 - a1) <= rel_tol * a2
  int max_doublings = 40;
};

inline LambdaOfAlpha lambda_of_alpha(const LambdaSeq& alpha, const StateEvolution& se) {
  const SeResult fp = se.fixed_point(alpha);
  const double tau = std::sqrt(fp.tau_star_sq);
  const McEstimate count = se.unique_nonzeros(fp.tau_star_sq, alpha);
  const double n = se.config().n();
  LambdaOfAlpha out;
  out.tau_star_sq = fp.tau_star_sq;
  out.scale = tau * (1.0 - count.mean / n);
  const double tau_err = tau > 0.0 ? fp.mc_stderr / (2.0 * tau) : 0.0;
  out.scale_stderr = std::hypot(tau * count.stderr_ / n, (1.0 - count.mean / n) * tau_err);
  out.lambda = alpha.values() * out.scale;
  return out;
}

inline LambdaOfAlpha lambda_of_alpha(const LambdaSeq& alpha, const PriorSpec& prior,
                                     const SeConfig& cfg) {
  return lambda_of_alpha(alpha, StateEvolution(prior, cfg));
}

namespace detail {

/// sign(lambda(a l) - lambda) with every coordinate required to agree.
/// Values within 1e-12 relative of the target count as zero.
inline int calibration_sign(const Vector& mapped, const LambdaSeq& lambda) {
  int sign = 0;
  for (Index i = 0; i < mapped.size(); ++i) {
    const double diff = mapped[i] - lambda[i];
    if (std::abs(diff) <= 1e-12 * lambda[i]) continue;
    const int s = diff > 0.0 ? 1 : -1;
    if (sign == 0) {
      sign = s;
    } else if (s != sign) {
      throw CalibrationError(
          "calibration: lambda(alpha) - lambda has entries of mixed sign; increase mc_reps");
    }
  }
  return sign;
}

}  // namespace detail

/// Finds alpha parallel to lambda with lambda(alpha) = lambda.
///
/// Starts at the A_min scale a1 along l = lambda / lambda_1 (where
/// lambda(a1 l) = -infinity), doubles a2 until lambda(a2 l) >= lambda and
/// then bisects. Points where the fixed point does not exist or does not
/// converge are treated as lying below the root.
inline CalibrationResult alpha_of_lambda(const LambdaSeq& lambda, const StateEvolution& se,
                                         const CalibrationOptions& opts = {}) {
  if (lambda.size() != se.config().p_se) {
    throw InvalidArgument("alpha_of_lambda: lambda length does not match p_se");
  }
  if (!(lambda.min() > 0.0)) {
    throw InvalidArgument("alpha_of_lambda: min(lambda) must be > 0");
  }
  const LambdaSeq direction = lambda.normalized();
  CalibrationResult res;

  auto evaluate = [&](double a) -> int {
    ++res.evaluations;
    try {
      return detail::calibration_sign(lambda_of_alpha(direction.scaled(a), se).lambda, lambda);
    } catch (const AlphaBelowAmin&) {
      return -1;
    } catch (const NonConvergence&) {
      return -1;
    }
  };

  double a1 = alpha_min_scale(direction, se);
  double a2 = a1 > 0.0 ? 2.0 * a1 : 1.0;
  int doublings = 0;
  int s2 = evaluate(a2);
  while (s2 < 0) {
    if (++doublings > opts.max_doublings) {
      throw CalibrationError("alpha_of_lambda: no bracket after " +
                             std::to_string(opts.max_doublings) + " doublings");
    }
    a1 = a2;
    a2 *= 2.0;
    s2 = evaluate(a2);
  }
  double root = a2;
  if (s2 > 0) {
    while (a2 - a1 > opts.rel_tol * a2) {
      const double mid = 0.5 * (a1 + a2);
      const int s = evaluate(mid);
      if (s == 0) {
        a1 = a2 = mid;
        break;
      }
      if (s < 0) {
        a1 = mid;
      } else {
        a2 = mid;
      }
    }
    root = 0.5 * (a1 + a2);
  }

  res.alpha_scale = root;
  res.alpha = direction.scaled(root);
  const LambdaOfAlpha check = lambda_of_alpha(res.alpha, se);
  ++res.evaluations;
  res.scale = check.scale;
  res.tau_star_sq = check.tau_star_sq;
  res.lambda_check = check.lambda;
  res.mc_stderr = check.scale_stderr;
  return res;
}

inline CalibrationResult alpha_of_lambda(const LambdaSeq& lambda, const PriorSpec& prior,
                                         const SeConfig& cfg,
                                         const CalibrationOptions& opts = {}) {
  return alpha_of_lambda(lambda, StateEvolution(prior, cfg), opts);
}

}  // namespace slope_amp
