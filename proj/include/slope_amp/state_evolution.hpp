#pragma once

// Finite-p state evolution for SLOPE AMP, evaluated by Monte Carlo:
//
//   F(tau^2, alpha tau) = sigma_w^2 + E || prox_{J_{alpha tau}}(B + tau Z) - B ||^2 / (delta p)
//
// iterated to its fixed point tau_*^2, plus the boundary function f(alpha)
// whose level set {f = delta} is A_min.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slope_amp/errors.hpp"
#include "slope_amp/parallel.hpp"
#include "slope_amp/random.hpp"
#include "slope_amp/sorted_l1.hpp"

namespace slope_amp {

/// Distribution of the i.i.d. signal entries B.
struct PriorSpec {
  enum class Kind { kBernoulliGaussian, kPointMass, kEmpirical };

  Kind kind = Kind::kPointMass;
  double epsilon = 0.0;  // P(B != 0) for Bernoulli-Gaussian
  double sigma_b = 1.0;  // std of the Gaussian part
  double value = 0.0;    // point-mass location
  std::vector<double> sample;

  static PriorSpec bernoulli_gaussian(double epsilon, double sigma_b) {
    PriorSpec p;
    p.kind = Kind::kBernoulliGaussian;
    p.epsilon = epsilon;
    p.sigma_b = sigma_b;
    p.validate();
    return p;
  }
  static PriorSpec point_mass(double value) {
    PriorSpec p;
    p.kind = Kind::kPointMass;
    p.value = value;
    p.validate();
    return p;
  }
  static PriorSpec empirical(std::vector<double> sample) {
    PriorSpec p;
    p.kind = Kind::kEmpirical;
    p.sample = std::move(sample);
    p.validate();
    return p;
  }

  void validate() const {
    switch (kind) {
      case Kind::kBernoulliGaussian:
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
          throw InvalidArgument("prior: epsilon must lie in [0, 1]");
        }
        if (!(sigma_b >= 0.0) || !std::isfinite(sigma_b)) {
          throw InvalidArgument("prior: sigma_b must be finite and >= 0");
        }
        break;
      case Kind::kPointMass:
        if (!std::isfinite(value)) throw InvalidArgument("prior: point mass must be finite");
        break;
      case Kind::kEmpirical:
        if (sample.empty()) throw InvalidArgument("prior: empirical sample is empty");
        for (double s : sample) {
          if (!std::isfinite(s)) throw InvalidArgument("prior: empirical sample not finite");
        }
        break;
    }
  }

  /// E[B^2].
  double second_moment() const {
    switch (kind) {
      case Kind::kBernoulliGaussian:
        return epsilon * sigma_b * sigma_b;
      case Kind::kPointMass:
        return value * value;
      case Kind::kEmpirical: {
        double acc = 0.0;
        for (double s : sample) acc += s * s;
        return acc / static_cast<double>(sample.size());
      }
    }
    return 0.0;
  }

  double draw(CounterRng& rng) const {
    switch (kind) {
      case Kind::kBernoulliGaussian: {
        const bool active = rng.bernoulli(epsilon);
        const double g = rng.normal();
        return active ? sigma_b * g : 0.0;
      }
      case Kind::kPointMass:
        return value;
      case Kind::kEmpirical: {
        const auto k = static_cast<std::size_t>(rng() % sample.size());
        return sample[k];
      }
    }
    return 0.0;
  }
};

struct SeConfig {
  Index p_se = 1000;
  int mc_reps = 64;
  std::uint64_t seed = 0;
  double fp_tol = 1e-6;
  int max_fp_iter = 200;
  double sigma_w = 0.0;
  double delta = 0.5;

  void validate() const {
    if (p_se < 1) throw InvalidArgument("se config: p_se must be >= 1");
    if (mc_reps < 1) throw InvalidArgument("se config: mc_reps must be >= 1");
    if (!(fp_tol > 0.0)) throw InvalidArgument("se config: fp_tol must be > 0");
    if (max_fp_iter < 1) throw InvalidArgument("se config: max_fp_iter must be >= 1");
    if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w)) {
      throw InvalidArgument("se config: sigma_w must be finite and >= 0");
    }
    if (!(delta > 0.0) || !std::isfinite(delta)) {
      throw InvalidArgument("se config: delta must be finite and > 0");
    }
  }

  /// Effective number of rows n = delta * p_se used in 1/n factors.
  double n() const { return delta * static_cast<double>(p_se); }
};

/// Monte-Carlo mean and its standard error.
struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct SeResult {
  std::vector<double> tau_sq_trajectory;
  double tau_star_sq = 0.0;
  bool converged = false;
  double mc_stderr = 0.0;
};

namespace detail {

inline McEstimate summarize(const std::vector<double>& values) {
  McEstimate est;
  const auto r = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  est.mean = sum / r;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - est.mean) * (v - est.mean);
    est.stderr_ = std::sqrt(ss / (r - 1.0) / r);
  }
  return est;
}

}  // namespace detail

/// Monte-Carlo evaluator with common random numbers: the replicate draws
/// (B_r, Z_r) are fixed at construction, so every quantity is a
/// deterministic function of its arguments for a given seed.
class StateEvolution {
 public:
  StateEvolution(PriorSpec prior, SeConfig cfg) : prior_(std::move(prior)), cfg_(cfg) {
    prior_.validate();
    cfg_.validate();
    const Index p = cfg_.p_se;
    const int reps = cfg_.mc_reps;
    signal_ = Matrix(p, reps);
    gaussian_ = Matrix(p, reps);
    f_gaussian_ = Matrix(p, reps);
    for (int r = 0; r < reps; ++r) {
      CounterRng sig(cfg_.seed, StreamRole::kSeSignal, static_cast<std::uint64_t>(r));
      CounterRng gau(cfg_.seed, StreamRole::kSeGaussian, static_cast<std::uint64_t>(r));
      CounterRng fga(cfg_.seed, StreamRole::kFAlphaGaussian, static_cast<std::uint64_t>(r));
      for (Index i = 0; i < p; ++i) {
        signal_(i, r) = prior_.draw(sig);
        gaussian_(i, r) = gau.normal();
        f_gaussian_(i, r) = fga.normal();
      }
    }
  }

  const PriorSpec& prior() const noexcept { return prior_; }
  const SeConfig& config() const noexcept { return cfg_; }

  /// tau_0^2 = sigma_w^2 + E[B^2] / delta.
  double initial_tau_sq() const {
    return cfg_.sigma_w * cfg_.sigma_w + prior_.second_moment() / cfg_.delta;
  }

  /// F(tau^2, alpha tau).
  McEstimate F(double tau_sq, const LambdaSeq& alpha) const {
    check_alpha(alpha);
    if (!(tau_sq >= 0.0) || !std::isfinite(tau_sq)) {
      throw InvalidArgument("se_F: tau^2 must be finite and >= 0");
    }
    const double tau = std::sqrt(tau_sq);
    const LambdaSeq theta = alpha.scaled(tau);
    const double scale = 1.0 / (cfg_.delta * static_cast<double>(cfg_.p_se));
    std::vector<double> values(static_cast<std::size_t>(cfg_.mc_reps));
    parallel_for(values.size(), [&](std::size_t r) {
      const auto col = static_cast<Index>(r);
      const Vector x = signal_.col(col) + tau * gaussian_.col(col);
      values[r] = (prox_sorted_l1(x, theta) - signal_.col(col)).squaredNorm() * scale;
    });
    McEstimate est = detail::summarize(values);
    est.mean += cfg_.sigma_w * cfg_.sigma_w;
    return est;
  }

  /// E ||prox_{J_{alpha tau}}(B + tau Z)||_0^*.
  McEstimate unique_nonzeros(double tau_sq, const LambdaSeq& alpha) const {
    check_alpha(alpha);
    const double tau = std::sqrt(tau_sq);
    const LambdaSeq theta = alpha.scaled(tau);
    std::vector<double> values(static_cast<std::size_t>(cfg_.mc_reps));
    parallel_for(values.size(), [&](std::size_t r) {
      const auto col = static_cast<Index>(r);
      const Vector x = signal_.col(col) + tau * gaussian_.col(col);
      values[r] = static_cast<double>(divergence_unique_nonzeros(prox_sorted_l1(x, theta)));
    });
    return detail::summarize(values);
  }

  /// f(alpha) = (1/p) sum_i E{(1 - |eta_i| sum_{j in I_i} alpha_j) / D_i},
  /// eta = prox_{J_alpha}(Z). Zero entries of eta contribute nothing; the
  /// alpha entries of an atom are those at the ranks it occupies.
  McEstimate f_alpha(const LambdaSeq& alpha) const {
    check_alpha(alpha);
    const double inv_p = 1.0 / static_cast<double>(cfg_.p_se);
    std::vector<double> values(static_cast<std::size_t>(cfg_.mc_reps));
    parallel_for(values.size(), [&](std::size_t r) {
      const Vector eta = prox_sorted_l1(f_gaussian_.col(static_cast<Index>(r)), alpha);
      const MagnitudePartition part = magnitude_partition(eta);
      double acc = 0.0;
      for (const Atom& atom : part.star_support()) {
        const double alpha_sum = alpha.values().segment(atom.first_rank, atom.size()).sum();
        acc += 1.0 - std::abs(eta[atom.indices.front()]) * alpha_sum;
      }
      values[r] = acc * inv_p;
    });
    return detail::summarize(values);
  }

  /// Runs `iterations` steps of tau_{t+1}^2 = F(tau_t^2) from tau0_sq, or
  /// stops early once consecutive values agree to fp_tol when `stop_early`.
  SeResult trajectory(const LambdaSeq& alpha, double tau0_sq, int iterations,
                      bool stop_early) const {
    if (!(tau0_sq >= 0.0) || !std::isfinite(tau0_sq)) {
      throw InvalidArgument("state evolution: tau0^2 must be finite and >= 0");
    }
    SeResult res;
    res.tau_sq_trajectory.push_back(tau0_sq);
    double tau_sq = tau0_sq;
    for (int t = 0; t < iterations; ++t) {
      const McEstimate next = F(tau_sq, alpha);
      res.tau_sq_trajectory.push_back(next.mean);
      res.mc_stderr = next.stderr_;
      const bool close = std::abs(next.mean - tau_sq) <= cfg_.fp_tol * std::max(1.0, tau_sq);
      tau_sq = next.mean;
      if (close) {
        res.converged = true;
        if (stop_early) break;
      }
    }
    res.tau_star_sq = tau_sq;
    return res;
  }

  /// Fixed point tau_*^2 of the finite-p recursion. Throws AlphaBelowAmin
  /// when f(alpha) >= delta and NonConvergence after max_fp_iter steps.
  SeResult fixed_point(const LambdaSeq& alpha, std::optional<double> tau0_sq = {}) const {
    const McEstimate f = f_alpha(alpha);
    if (f.mean >= cfg_.delta) throw AlphaBelowAmin(f.mean, cfg_.delta);
    SeResult res = trajectory(alpha, tau0_sq.value_or(initial_tau_sq()), cfg_.max_fp_iter, true);
    if (!res.converged) {
      throw NonConvergence("state evolution: no fixed point within " +
                           std::to_string(cfg_.max_fp_iter) + " iterations (last tau^2 = " +
                           std::to_string(res.tau_star_sq) + ")");
    }
    return res;
  }

 private:
  void check_alpha(const LambdaSeq& alpha) const {
    if (alpha.size() != cfg_.p_se) {
      throw InvalidArgument("state evolution: alpha length " + std::to_string(alpha.size()) +
                            " does not match p_se " + std::to_string(cfg_.p_se));
    }
  }

  PriorSpec prior_;
  SeConfig cfg_;
  Matrix signal_;      // B draws, one column per replicate
  Matrix gaussian_;    // Z draws paired with signal_
  Matrix f_gaussian_;  // Z draws for f(alpha)
};

inline McEstimate se_F(double tau_sq, const LambdaSeq& alpha, const PriorSpec& prior,
                       const SeConfig& cfg) {
  return StateEvolution(prior, cfg).F(tau_sq, alpha);
}

inline SeResult se_fixed_point(const LambdaSeq& alpha, const PriorSpec& prior,
                               const SeConfig& cfg, std::optional<double> tau0_sq = {}) {
  return StateEvolution(prior, cfg).fixed_point(alpha, tau0_sq);
}

inline McEstimate f_alpha(const LambdaSeq& alpha, const SeConfig& cfg) {
  return StateEvolution(PriorSpec::point_mass(0.0), cfg).f_alpha(alpha);
}

/// Scale a* with f(a* direction) = delta, by bisection along the ray
/// (f decreases from f(0) = 1 to 0). Returns 0 when delta >= 1.
inline double alpha_min_scale(const LambdaSeq& direction, const StateEvolution& se,
                              double rel_tol = 1e-4) {
  if (direction.is_zero()) throw InvalidArgument("alpha_min_scale: zero direction");
  if (std::abs(direction.max() - 1.0) > 1e-12) {
    throw InvalidArgument("alpha_min_scale: direction must be normalized to max entry 1");
  }
  const double delta = se.config().delta;
  if (delta >= 1.0) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (se.f_alpha(direction.scaled(hi)).mean >= delta) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw CalibrationError("alpha_min_scale: no bracket found");
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (se.f_alpha(direction.scaled(mid)).mean >= delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double alpha_min_scale(const LambdaSeq& direction, const SeConfig& cfg) {
  return alpha_min_scale(direction, StateEvolution(PriorSpec::point_mass(0.0), cfg));
}

/// delta (tau_*^2 - sigma_w^2): the asymptotic MSE of the SLOPE estimate.
inline double predicted_mse(double tau_star_sq, const SeConfig& cfg) {
  const double excess = tau_star_sq - cfg.sigma_w * cfg.sigma_w;
  if (excess < 0.0) throw InvalidArgument("predicted_mse: tau_*^2 below sigma_w^2");
  return cfg.delta * excess;
}

}  // namespace slope_amp
