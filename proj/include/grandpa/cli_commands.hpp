/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <optional>
#include <string>

namespace grandpa {

// Exit codes shared by all subcommands:
//   0 clean, 1 config/usage error (including corrupt traces and missing
//   conflicts), 2 protocol-property violation, 3 evidence verification
//   failure.
inline constexpr int kExitClean = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitViolation = 2;
inline constexpr int kExitEvidence = 3;

/// Directory used for outputs when no explicit path is given.
inline constexpr const char *kOutDirEnv = "GRANDPA_SIM_OUT";

struct RunOptions {
  std::string scenario_path;
  std::string out_path;  // empty: derive from scenario name + seed
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;
};

struct SweepOptions {
  std::string scenario_path;
  std::uint64_t seed_from = 0;
  std::uint64_t seed_to = 0;
  std::string out_dir;  // empty: no per-seed trace files
  bool quiet = false;
};

int cmd_run(const RunOptions &opts);
int cmd_check(const std::string &trace_path, bool quiet = false);
int cmd_challenge(const std::string &trace_path, bool quiet = false);
int cmd_sweep(const SweepOptions &opts);

}  // namespace grandpa
