// SPDX-License-Identifier: Apache-2.0
/**
 * @file   rng.hpp
 * @brief  Splittable counter-based random generator.
 *
 * Every draw is a pure function of (key, counter), so a stream can be
 * checkpointed as two integers and child streams derived by tag never
 * interfere with each other regardless of evaluation order.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace synctva {

class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  /// Independent child stream identified by `tag`.
  Rng split(std::uint64_t tag) const {
    return Rng(mix(key_ ^ mix(tag + 0x9e3779b97f4a7c15ULL)), 0);
  }
  Rng split(std::string_view tag) const;

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

} // namespace synctva
