#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace voices
{

/// SplitMix64 finalizer (Steele, Lea & Flood). Used for seeding and stream derivation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over bytes; maps field names onto stream ids.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/**
 * xoshiro256** generator with explicit stream splitting.
 *
 * A stream is identified by (seed, a, b): the four state words are produced by
 * SplitMix64 from mix64(mix64(mix64(seed) ^ a) ^ b). Every randomized component
 * derives its stream from its own (row, field) coordinates, so output does not
 * depend on the order in which streams are consumed. All draws use integer
 * arithmetic except normal(), which relies on std::log/std::cos.
 */
class Rng
{
public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) noexcept;
  Rng(std::uint64_t seed, std::string_view field, std::uint64_t index = 0) noexcept
      : Rng(seed, fnv1a64(field), index)
  {
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept;

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller (one output per call).
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }
  /// Index drawn from an unnormalized discrete distribution.
  std::size_t categorical(std::span<const double> weights) noexcept;

  template <typename It>
  void shuffle(It first, It last) noexcept
  {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

private:
  std::uint64_t s_[4];
};

}  // namespace voices
