#pragma once

// Sorted-l1 (SLOPE) penalty: norm, proximal operator, its Jacobian and
// divergence, magnitude partitions and a subgradient membership test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/math/distributions/normal.hpp>

#include "slope_amp/errors.hpp"

namespace slope_amp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorCRef = Eigen::Ref<const Eigen::VectorXd>;
using MatrixCRef = Eigen::Ref<const Eigen::MatrixXd>;
using Index = Eigen::Index;

namespace detail {

inline void require_same_length(Index a, Index b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": length mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
  }
}

/// Indices of `v` ordered by decreasing |v_i|, ties broken by index.
inline std::vector<Index> order_by_magnitude(const VectorCRef& v) {
  std::vector<Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(v[a]) > std::abs(v[b]); });
  return order;
}

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

/// Non-increasing, non-negative weight sequence: lambda_1 >= ... >= lambda_p >= 0.
///
/// Used both as a SLOPE penalty (lambda), as an AMP threshold direction
/// (alpha) and as a scaled threshold (theta = alpha * tau).
class LambdaSeq {
 public:
  LambdaSeq() = default;

  /// Validates ordering, sign and finiteness. The all-zero sequence is
  /// accepted here; use `penalty()` when it must be rejected.
  explicit LambdaSeq(Vector values) : values_(std::move(values)) {
    for (Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw InvalidArgument("lambda sequence: non-finite entry at index " + std::to_string(i));
      }
      if (values_[i] < 0.0) {
        throw InvalidArgument("lambda sequence: negative entry at index " + std::to_string(i));
      }
      if (i > 0 && values_[i] > values_[i - 1]) {
        throw InvalidArgument("lambda sequence: not non-increasing at index " +
                              std::to_string(i));
      }
    }
  }

  /// A sequence usable as a SLOPE penalty: validated and not identically zero.
  static LambdaSeq penalty(Vector values) {
    LambdaSeq seq(std::move(values));
    if (seq.size() == 0 || seq.is_zero()) {
      throw InvalidArgument("lambda sequence: penalty must have a positive entry");
    }
    return seq;
  }

  static LambdaSeq constant(Index p, double value) {
    return LambdaSeq(Vector::Constant(p, value));
  }

  /// Linear decay from `first` down to `last` (inclusive).
  static LambdaSeq linear(Index p, double first, double last) {
    if (p == 1) return LambdaSeq(Vector::Constant(1, first));
    return LambdaSeq(Vector::LinSpaced(p, first, last));
  }

  /// Benjamini-Hochberg shape: lambda_i = scale * Phi^{-1}(1 - q i / (2p)).
  static LambdaSeq bhq(Index p, double q, double scale = 1.0) {
    if (p < 1) throw InvalidArgument("lambda sequence: bhq needs p >= 1");
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("lambda sequence: bhq needs q in (0, 1)");
    const boost::math::normal standard;
    Vector v(p);
    for (Index i = 0; i < p; ++i) {
      const double tail = q * static_cast<double>(i + 1) / (2.0 * static_cast<double>(p));
      v[i] = scale * boost::math::quantile(boost::math::complement(standard, tail));
    }
    return LambdaSeq(std::move(v));
  }

  Index size() const noexcept { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }
  const Vector& values() const noexcept { return values_; }
  double max() const { return size() ? values_[0] : 0.0; }
  double min() const { return size() ? values_[size() - 1] : 0.0; }
  bool is_zero() const { return size() == 0 || values_[0] == 0.0; }

  LambdaSeq scaled(double factor) const {
    if (!(factor >= 0.0) || !std::isfinite(factor)) {
      throw InvalidArgument("lambda sequence: scale factor must be finite and non-negative");
    }
    LambdaSeq out;
    out.values_ = values_ * factor;
    return out;
  }

  /// Rescaled so that the leading entry is one.
  LambdaSeq normalized() const {
    if (is_zero()) throw InvalidArgument("lambda sequence: cannot normalize a zero sequence");
    return scaled(1.0 / values_[0]);
  }

 private:
  Vector values_;
};

/// J_lambda(b) = sum_i lambda_i |b|_(i) with |b|_(1) >= ... >= |b|_(p).
inline double sorted_l1_norm(const VectorCRef& b, const LambdaSeq& lambda) {
  detail::require_same_length(b.size(), lambda.size(), "sorted_l1_norm");
  Vector mag = b.cwiseAbs();
  std::sort(mag.begin(), mag.end(), std::greater<>());
  return mag.dot(lambda.values());
}

/// Elementwise soft thresholding at a common level.
inline Vector soft_threshold(const VectorCRef& v, double level) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]) - level;
    out[i] = m > 0.0 ? detail::sign(v[i]) * m : 0.0;
  }
  return out;
}

/// prox_{J_theta}(v) = argmin_b 0.5 ||v - b||^2 + J_theta(b).
///
/// Sorts |v| in decreasing order, subtracts theta, and projects onto the
/// non-increasing cone with a stack of pooled blocks (each block is replaced
/// by its average). Only strict order violations merge, so equal entries of
/// |v| - theta stay unpooled and reproduce soft thresholding exactly.
/// Negative block values clip to an exact 0.
inline Vector prox_sorted_l1(const VectorCRef& v, const LambdaSeq& theta) {
  detail::require_same_length(v.size(), theta.size(), "prox_sorted_l1");
  const Index p = v.size();
  const std::vector<Index> order = detail::order_by_magnitude(v);

  struct Block {
    Index start;
    Index end;  // exclusive
    double sum;
    double mean() const { return sum / static_cast<double>(end - start); }
  };
  std::vector<Block> stack;
  stack.reserve(static_cast<std::size_t>(p));
  for (Index r = 0; r < p; ++r) {
    stack.push_back({r, r + 1, std::abs(v[order[r]]) - theta[r]});
    while (stack.size() > 1 && stack[stack.size() - 2].mean() < stack.back().mean()) {
      const Block top = stack.back();
      stack.pop_back();
      stack.back().end = top.end;
      stack.back().sum += top.sum;
    }
  }

  Vector out(p);
  for (const Block& block : stack) {
    const double value = std::max(block.mean(), 0.0);
    for (Index r = block.start; r < block.end; ++r) {
      const Index i = order[r];
      out[i] = value > 0.0 ? detail::sign(v[i]) * value : 0.0;
    }
  }
  return out;
}

/// Default tie tolerance for grouping magnitudes: 1e-10 * max(1, max|v|).
inline double default_tie_tolerance(const VectorCRef& v) {
  const double scale = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  return 1e-10 * std::max(1.0, scale);
}

/// A maximal atom: indices sharing one absolute value.
struct Atom {
  std::vector<Index> indices;  // in rank order (decreasing |v|, then index)
  Index first_rank = 0;        // rank of the first member in the sorted order
  double magnitude = 0.0;      // largest member magnitude
  bool zero = false;

  Index size() const noexcept { return static_cast<Index>(indices.size()); }
};

/// Partition of {0, ..., p-1} into maximal atoms, ordered by decreasing
/// magnitude. The zero atom, when present, is last.
struct MagnitudePartition {
  std::vector<Atom> atoms;

  /// Atoms with nonzero common magnitude.
  std::span<const Atom> star_support() const {
    std::size_t k = atoms.size();
    if (k > 0 && atoms.back().zero) --k;
    return {atoms.data(), k};
  }
};

/// Groups entries whose magnitudes chain together within `tol`; entries with
/// |v_i| <= tol form the zero atom.
inline MagnitudePartition magnitude_partition(const VectorCRef& b, double tol) {
  if (!(tol >= 0.0)) throw InvalidArgument("magnitude_partition: tol must be >= 0");
  MagnitudePartition part;
  const std::vector<Index> order = detail::order_by_magnitude(b);
  double prev = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Index i = order[r];
    const double m = std::abs(b[i]);
    const bool is_zero = m <= tol;
    const bool start_new = part.atoms.empty() || (is_zero && !part.atoms.back().zero) ||
                           (!is_zero && prev - m > tol);
    if (start_new) {
      Atom atom;
      atom.first_rank = static_cast<Index>(r);
      atom.magnitude = m;
      atom.zero = is_zero;
      part.atoms.push_back(std::move(atom));
    }
    part.atoms.back().indices.push_back(i);
    prev = m;
  }
  return part;
}

inline MagnitudePartition magnitude_partition(const VectorCRef& b) {
  return magnitude_partition(b, default_tie_tolerance(b));
}

/// ||b||_0^*: number of distinct nonzero magnitudes (merged within tol).
inline Index divergence_unique_nonzeros(const VectorCRef& b, double tol) {
  if (!(tol >= 0.0)) throw InvalidArgument("divergence_unique_nonzeros: tol must be >= 0");
  std::vector<double> mag;
  mag.reserve(static_cast<std::size_t>(b.size()));
  for (Index i = 0; i < b.size(); ++i) {
    const double m = std::abs(b[i]);
    if (m > tol) mag.push_back(m);
  }
  std::sort(mag.begin(), mag.end(), std::greater<>());
  Index count = 0;
  for (std::size_t r = 0; r < mag.size(); ++r) {
    if (r == 0 || mag[r - 1] - mag[r] > tol) ++count;
  }
  return count;
}

inline Index divergence_unique_nonzeros(const VectorCRef& b) {
  return divergence_unique_nonzeros(b, default_tie_tolerance(b));
}

/// Dense Jacobian of the prox evaluated from its output x = prox(v; theta):
/// d x_i / d v_j = sign(x_i) sign(x_j) / #{k : |x_k| = |x_j|} when |x_i| = |x_j|,
/// zero otherwise.
inline Matrix prox_jacobian(const VectorCRef& x, double tol) {
  const Index p = x.size();
  Matrix jac = Matrix::Zero(p, p);
  const MagnitudePartition part = magnitude_partition(x, tol);
  for (const Atom& atom : part.star_support()) {
    const double inv = 1.0 / static_cast<double>(atom.size());
    for (Index i : atom.indices) {
      for (Index j : atom.indices) jac(i, j) = detail::sign(x[i]) * detail::sign(x[j]) * inv;
    }
  }
  return jac;
}

/// Trace of the prox Jacobian, accumulated from its diagonal entries
/// 1/#{k : |x_k| = |x_i|} as an exact fraction.
inline double prox_jacobian_trace(const VectorCRef& x, double tol) {
  std::int64_t num = 0;
  std::int64_t den = 1;
  const MagnitudePartition part = magnitude_partition(x, tol);
  for (const Atom& atom : part.star_support()) {
    for (std::size_t k = 0; k < atom.indices.size(); ++k) {
      // num/den + 1/|atom|
      const std::int64_t d = atom.size();
      const std::int64_t l = std::lcm(den, d);
      num = num * (l / den) + l / d;
      den = l;
      const std::int64_t g = std::gcd(num, den);
      num /= g;
      den /= g;
    }
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

namespace detail {

/// Largest violation of the majorization constraints "sum of the k largest
/// entries of u <= sum of the k largest entries of w" for all k, plus the
/// total-sum equality when `equal_sum` is set. `w` is sorted decreasing.
inline double majorization_violation(std::vector<double> u, std::span<const double> w,
                                     bool equal_sum) {
  std::sort(u.begin(), u.end(), std::greater<>());
  double su = 0.0;
  double sw = 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    su += u[k];
    sw += w[k];
    worst = std::max(worst, su - sw);
  }
  if (equal_sum) worst = std::max(worst, std::abs(su - sw));
  return worst;
}

}  // namespace detail

/// Distance-like violation of g in the subdifferential of J_lambda at b.
///
/// Each atom I of b is matched with the lambda entries at its ranks, w.
/// Nonzero atoms require g_I * sign(b_I) to lie in the permutohedron of w;
/// the zero atom requires |g_I| to be weakly majorized by w. Returns 0 on
/// membership, otherwise the largest constraint violation (infinity for a
/// sign mismatch on a nonzero atom).
inline double subgradient_distance(const VectorCRef& b, const VectorCRef& g,
                                   const LambdaSeq& lambda, double tol) {
  detail::require_same_length(b.size(), g.size(), "subgradient_distance");
  detail::require_same_length(b.size(), lambda.size(), "subgradient_distance");
  const MagnitudePartition part = magnitude_partition(b, tol);
  const double sign_tol = default_tie_tolerance(g);
  double worst = 0.0;
  for (const Atom& atom : part.atoms) {
    std::vector<double> u;
    u.reserve(atom.indices.size());
    for (Index i : atom.indices) {
      if (atom.zero) {
        u.push_back(std::abs(g[i]));
      } else {
        const double ui = g[i] * detail::sign(b[i]);
        if (ui < -sign_tol) return std::numeric_limits<double>::infinity();
        u.push_back(ui);
      }
    }
    const std::span<const double> w(lambda.values().data() + atom.first_rank,
                                    atom.indices.size());
    worst = std::max(worst, detail::majorization_violation(std::move(u), w, !atom.zero));
  }
  return worst;
}

inline double subgradient_distance(const VectorCRef& b, const VectorCRef& g,
                                   const LambdaSeq& lambda) {
  return subgradient_distance(b, g, lambda, default_tie_tolerance(b));
}

}  // namespace slope_amp
