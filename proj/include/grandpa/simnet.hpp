/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include "grandpa/accountability.hpp"
#include "grandpa/scenario.hpp"
#include "grandpa/trace.hpp"

namespace grandpa {

inline constexpr const char *kToolVersion = "grandpa-sim 0.1.0";

/// The round primary, as every participant and the offline checkers
/// compute it: round-robin over the voter set by default, or a seeded
/// pseudorandom pick.
VoterId primary_for(const Scenario &scenario, RoundNumber round);

/// Executes one scenario to completion. The result is a pure function of
/// (scenario, seed): identical traces byte for byte on every run and
/// platform.
Trace run_scenario(const Scenario &scenario);

}  // namespace grandpa
