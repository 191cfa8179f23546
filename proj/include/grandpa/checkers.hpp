/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <string>
#include <vector>

#include "grandpa/scenario.hpp"
#include "grandpa/trace.hpp"

namespace grandpa {

struct Violation {
  std::string code;  // safety, estimate-corollary, timing-*, ...
  Tick time = 0;
  std::int64_t actor = -1;
  std::string detail;

  bool operator==(const Violation &) const = default;
};

struct RunStats {
  std::uint64_t blocks_produced = 0;
  std::uint64_t blocks_finalized = 0;  // by at least one honest participant
  RoundNumber max_round_started = 0;
  RoundNumber max_round_completed = 0;  // r such that some honest entered r+1
  Tick last_round_start = 0;
  // Block production -> first honest finalisation, in ticks.
  Tick latency_p50 = 0;
  Tick latency_p90 = 0;
  Tick latency_max = 0;
  double rounds_per_finalization = 0.0;
  std::uint64_t verdicts = 0;
};

struct CheckReport {
  std::vector<Violation> violations;
  RunStats stats;

  bool clean() const { return violations.empty(); }
  std::string summary() const;
};

/// Evaluates every protocol property checker against a finished trace:
/// (a) safety, (b) the estimate corollary, (c) the four timing bounds,
/// (d) honest-primary finalisation, (e) deadlock freeness, (f) recent
/// validity, (g) fast termination. Checkers whose premises do not hold
/// for the scenario (e.g. timing bounds with more than f Byzantine
/// voters) are skipped.
CheckReport run_checkers(const Trace &trace, const Scenario &scenario);

}  // namespace grandpa
