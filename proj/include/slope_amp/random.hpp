#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace slope_amp {

/// Named random streams. A stream is identified by (seed, role, index), so
/// any replicate can be regenerated without touching the others.
enum class StreamRole : std::uint64_t {
  kDesign = 1,
  kSignal = 2,
  kNoise = 3,
  kSeSignal = 4,
  kSeGaussian = 5,
  kFAlphaGaussian = 6,
  kPowerIteration = 7,
  kTest = 99,
};

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: output k of a stream is mix64(key + k * gamma),
/// where the key hashes (seed, role, index). Equivalent to SplitMix64 with a
/// derived starting state.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, StreamRole role, std::uint64_t index = 0)
      : key_(derive_key(seed, static_cast<std::uint64_t>(role), index)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return detail::mix64(key_ + (++counter_) * kGamma); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal via the Box-Muller transform; values come in pairs.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  bool bernoulli(double prob) { return uniform() < prob; }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t role,
                                            std::uint64_t index) {
    std::uint64_t k = detail::mix64(seed + kGamma);
    k = detail::mix64(k ^ (role * 0xd1b54a32d192ed03ULL));
    k = detail::mix64(k ^ (index * 0xaef17502108ef2d9ULL + 0x2545f4914f6cdd1dULL));
    return k;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace slope_amp
