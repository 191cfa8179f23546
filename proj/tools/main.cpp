/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include <CLI11.hpp>

#include "grandpa/cli_commands.hpp"
#include "grandpa/simnet.hpp"

int main(int argc, char **argv) {
  CLI::App app{"GRANDPA finality gadget simulator and property checker"};
  app.set_version_flag("--version", grandpa::kToolVersion);
  app.require_subcommand(1);

  grandpa::RunOptions run_opts;
  auto *run = app.add_subcommand("run", "run a scenario and check it");
  run->add_option("--scenario", run_opts.scenario_path, "scenario JSON file")
      ->required();
  run->add_option("--out", run_opts.out_path,
                  "trace output path (default: $GRANDPA_SIM_OUT or cwd)");
  std::uint64_t seed_override = 0;
  auto *seed_flag =
      run->add_option("--seed", seed_override, "override the scenario seed");

  std::string check_trace;
  auto *check = app.add_subcommand("check", "re-run checkers on a trace");
  check->add_option("--trace", check_trace, "trace file")->required();

  std::string challenge_trace;
  auto *challenge = app.add_subcommand(
      "challenge", "replay and verify the accountability challenge");
  challenge->add_option("--trace", challenge_trace, "trace file")->required();

  grandpa::SweepOptions sweep_opts;
  std::string seeds_range;
  auto *sweep = app.add_subcommand("sweep", "run a scenario across seeds");
  sweep->add_option("--scenario", sweep_opts.scenario_path, "scenario file")
      ->required();
  sweep->add_option("--seeds", seeds_range, "seed range A..B (inclusive)")
      ->required();
  sweep->add_option("--out-dir", sweep_opts.out_dir,
                    "write per-seed traces into this directory");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    if (seed_flag->count() > 0) {
      run_opts.seed_override = seed_override;
    }
    return grandpa::cmd_run(run_opts);
  }
  if (check->parsed()) {
    return grandpa::cmd_check(check_trace);
  }
  if (challenge->parsed()) {
    return grandpa::cmd_challenge(challenge_trace);
  }
  if (sweep->parsed()) {
    const auto sep = seeds_range.find("..");
    if (sep == std::string::npos) {
      std::fprintf(stderr, "config error: --seeds expects A..B\n");
      return grandpa::kExitConfig;
    }
    try {
      sweep_opts.seed_from = std::stoull(seeds_range.substr(0, sep));
      sweep_opts.seed_to = std::stoull(seeds_range.substr(sep + 2));
    } catch (const std::exception &) {
      std::fprintf(stderr, "config error: malformed seed range\n");
      return grandpa::kExitConfig;
    }
    return grandpa::cmd_sweep(sweep_opts);
  }
  return grandpa::kExitConfig;
}
