/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace grandpa {

/// Simulated time, in integer ticks. All protocol bounds (T, GST,
/// backoffs) are tick counts so that timing assertions are exact.
using Tick = std::int64_t;

using RoundNumber = std::uint64_t;

/// Opaque fixed-width block identifier (stand-in for a block hash).
/// Totally ordered; the order is used for deterministic tie-breaking only.
struct BlockId {
  std::uint64_t value = 0;

  auto operator<=>(const BlockId &) const = default;
};

/// Voter identifier, totally ordered. Scenarios use dense indices 0..n-1.
struct VoterId {
  std::uint32_t index = 0;

  auto operator<=>(const VoterId &) const = default;
};

std::string to_string(BlockId id);
std::string to_string(VoterId v);

/// splitmix64: tiny deterministic mixer used for ids, auth tags and RNG
/// seeding. Not cryptographic; the simulation only needs collision-free
/// determinism at desk scale.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

/// FNV-1a over a byte string; used for trace digests and scenario digests.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(const void *data, std::size_t len,
                             std::uint64_t state = kFnvOffset) {
  const auto *p = static_cast<const unsigned char *>(data);
  for (std::size_t i = 0; i < len; ++i) {
    state ^= p[i];
    state *= kFnvPrime;
  }
  return state;
}

inline std::uint64_t fnv1a64(const std::string &s,
                             std::uint64_t state = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), state);
}

}  // namespace grandpa

template <>
struct std::hash<grandpa::BlockId> {
  std::size_t operator()(const grandpa::BlockId &id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};

template <>
struct std::hash<grandpa::VoterId> {
  std::size_t operator()(const grandpa::VoterId &v) const noexcept {
    return std::hash<std::uint32_t>{}(v.index);
  }
};
