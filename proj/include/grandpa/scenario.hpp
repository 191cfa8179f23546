/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "grandpa/ids.hpp"
#include "grandpa/vote_math.hpp"

namespace grandpa {

enum class Behavior {
  Equivocator,
  Mute,
  VoteSplitter,
  BadPrimary,
  ConflictingFinalizer,
};

/// Byzantine behaviors only ever forge their own votes; other voters'
/// authenticity is never violated.
struct AdversarySpec {
  Behavior behavior = Behavior::Mute;

  // VoteSplitter: extra delay before releasing the held prevote.
  Tick splitter_delay = 3;

  // ConflictingFinalizer: identical across all colluders. The honest
  // voters are split into two partitions that each finalise their own
  // branch; commit_round_a/b pick the rounds in which the colluders let
  // each partition finalise.
  std::vector<std::uint32_t> partition_a;
  std::vector<std::uint32_t> partition_b;
  RoundNumber commit_round_a = 3;
  RoundNumber commit_round_b = 3;

  bool operator==(const AdversarySpec &) const = default;
};

enum class PreGstPolicy {
  Uniform,        // pre-GST behaves like post-GST
  WithholdAll,    // everything delivered at exactly GST + T
  WithholdVotes,  // blocks flow normally; votes/commits/broadcasts held
  RandomDelay,    // uniform in [1, GST + T - send_time]
  Partition,      // two groups; cross-group traffic held until GST + T
};

enum class NetworkMode {
  PartialSynchrony,  // GST / T model
  AsyncEventual,     // heavy-tailed delays with a finite per-message cap
};

enum class PrimaryMode { RoundRobin, SeededRandom };

/// Full description of one simulated run. A (Scenario, seed) pair
/// determines the trace bit for bit.
struct Scenario {
  std::string name;
  std::string description;

  std::size_t n = 4;
  std::size_t f = 1;
  Tick net_bound = 1;  // T
  Tick gst = 0;
  Tick duration = 240;
  std::uint64_t seed = 1;
  Tick block_interval = 3;
  PrimaryMode primary_mode = PrimaryMode::RoundRobin;
  Tick commit_backoff_max = 1;
  bool precommit_rule_iii = true;
  PreGstPolicy pre_gst_policy = PreGstPolicy::Uniform;
  NetworkMode network_mode = NetworkMode::PartialSynchrony;
  Tick async_delay_cap = 16;
  bool accountability = false;  // permits more than f adversaries
  std::map<std::uint32_t, AdversarySpec> adversaries;

  bool operator==(const Scenario &) const = default;

  bool is_byzantine(VoterId v) const {
    return adversaries.count(v.index) != 0;
  }
  std::vector<VoterId> honest_voters() const;

  /// Throws ConfigError when any invariant is violated.
  void validate() const;

  nlohmann::json to_json() const;
  /// Strict parse: unknown keys are rejected, defaults applied, and the
  /// result validated.
  static Scenario from_json(const nlohmann::json &j);

  std::string digest() const;
};

Scenario scenario_from_file(const std::string &path);
void scenario_to_file(const Scenario &s, const std::string &path);

}  // namespace grandpa
