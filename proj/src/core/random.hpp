#ifndef SMPC_CORE_RANDOM_HPP_
#define SMPC_CORE_RANDOM_HPP_

#include <cstdint>
#include <limits>

namespace smpc {

/**
 * Counter-based random stream. The key is derived from up to three ids
 * (e.g. master seed, trajectory, step) so any draw can be reproduced without
 * replaying earlier ones; output i is the SplitMix64 finaliser of
 * key + (i + 1) * golden gamma. Satisfies UniformRandomBitGenerator, so it
 * plugs into <random> distributions.
 */
class RngStream
{
public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0)
      : key_(mix(mix(mix(seed) ^ (a + kGamma)) ^ (b + 2 * kGamma)))
  {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z)
  {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace smpc

#endif  // SMPC_CORE_RANDOM_HPP_
