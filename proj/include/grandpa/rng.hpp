/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <string>

#include "grandpa/ids.hpp"

namespace grandpa {

/// Deterministic RNG with explicit, platform-independent sampling.
/// std::uniform_*_distribution is implementation-defined, which would break
/// the bit-identical-trace guarantee, so all draws are implemented here.
///
/// Independent named streams keep unrelated consumers (network delays,
/// per-voter commit backoff, primary selection) from perturbing each other.
class DetRng {
 public:
  DetRng() : state_(0x853c49e6748fea9bULL) {}

  DetRng(std::uint64_t seed, const std::string &stream)
      : state_(splitmix64(seed ^ fnv1a64(stream))) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  /// Uniform integer in [lo, hi], inclusive. Uses rejection-free modulo;
  /// the tiny bias is irrelevant here and the result is fully portable.
  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) {
      return lo;
    }
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  /// Uniform double in (0, 1].
  double unit_open() {
    const std::uint64_t x = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(x) + 1.0) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

}  // namespace grandpa
