/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include "grandpa/cli_commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <map>
#include <sstream>

#include "grandpa/checkers.hpp"
#include "grandpa/simnet.hpp"

namespace grandpa {

namespace {

std::string default_out_path(const std::string &name, std::uint64_t seed) {
  std::string dir = ".";
  if (const char *env = std::getenv(kOutDirEnv)) {
    dir = env;
  }
  const std::string base = name.empty() ? "run" : name;
  return dir + "/" + base + "-seed" + std::to_string(seed) + ".trace.jsonl";
}

BlockTree tree_from_trace(const Trace &trace) {
  BlockTree tree;
  tree.insert(make_genesis());
  for (const TraceEvent &ev : trace.events) {
    if (ev.kind == "block-produced") {
      tree.insert(Block{block_id_from_json(ev.payload.at("block")),
                        block_id_from_json(ev.payload.at("parent")),
                        ev.payload.at("number").get<std::uint64_t>()});
    }
  }
  return tree;
}

struct ReplayedChallenge {
  ConflictClaim claim;
  Verdict verdict;
};

/// Re-drives the recorded challenge session from the trace alone: the
/// claim and every response come from the stored records, the session
/// logic is re-executed, and the resulting verdict must match the
/// recorded one with all evidence re-verifying.
std::optional<std::string> replay_challenge(
    const Trace &trace, const Scenario &sc, const BlockTree &tree,
    std::optional<ReplayedChallenge> &out) {
  const TraceEvent *verdict_ev = nullptr;
  for (const TraceEvent &ev : trace.events) {
    if (ev.kind == "verdict") {
      verdict_ev = &ev;
      break;
    }
  }
  if (verdict_ev == nullptr) {
    return std::nullopt;  // no recorded session
  }

  auto voters = std::make_shared<VoterSet>(sc.n, sc.f);
  ConflictClaim claim;
  claim.commit_a =
      commit_from_json(verdict_ev->payload.at("claim").at("commit_a"));
  claim.commit_b =
      commit_from_json(verdict_ev->payload.at("claim").at("commit_b"));
  const Verdict recorded = verdict_from_json(verdict_ev->payload);

  auto tree_copy = std::make_shared<BlockTree>(tree);
  std::variant<Verdict, ChallengeSession> result;
  try {
    result = start_challenge(claim, voters, tree_copy);
  } catch (const NotAConflictError &e) {
    return std::string("recorded claim does not validate: ") + e.what();
  }

  Verdict replayed;
  if (const auto *immediate = std::get_if<Verdict>(&result)) {
    replayed = *immediate;
  } else {
    auto session = std::get<ChallengeSession>(std::move(result));
    // Responses grouped by session step, in trace order.
    std::map<std::size_t, std::vector<std::pair<VoterId, Response>>> by_step;
    Tick last_response_time = 0;
    for (const TraceEvent &ev : trace.events) {
      if (ev.kind != "response") {
        continue;
      }
      by_step[ev.payload.at("step").get<std::size_t>()].emplace_back(
          VoterId{ev.payload.at("responder").get<std::uint32_t>()},
          response_from_json(ev.payload));
      last_response_time = std::max(last_response_time, ev.time);
    }
    Tick deadline = verdict_ev->time;
    std::size_t step = 0;
    while (!session.done()) {
      const auto it = by_step.find(step);
      const auto responses =
          it == by_step.end()
              ? std::vector<std::pair<VoterId, Response>>{}
              : it->second;
      const auto verdict = session.step(responses, deadline);
      if (verdict) {
        replayed = *verdict;
        break;
      }
      ++step;
      if (step > claim.commit_b.round + 2) {
        return std::string("replay did not terminate");
      }
    }
  }

  if (!(replayed == recorded)) {
    return std::string("replayed verdict differs from the recorded one");
  }
  if (!verify_verdict(replayed, voters)) {
    return std::string("verdict evidence does not verify");
  }
  out = ReplayedChallenge{std::move(claim), std::move(replayed)};
  return std::nullopt;
}

}  // namespace

int cmd_run(const RunOptions &opts) {
  Scenario sc;
  try {
    sc = scenario_from_file(opts.scenario_path);
    if (opts.seed_override) {
      sc.seed = *opts.seed_override;
      sc.validate();
    }
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  Trace trace;
  try {
    trace = run_scenario(sc);
  } catch (const std::exception &e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::string out_path =
      opts.out_path.empty() ? default_out_path(sc.name, sc.seed)
                            : opts.out_path;
  try {
    write_trace_file(out_path, trace);
  } catch (const std::exception &e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitConfig;
  }

  const CheckReport report = run_checkers(trace, sc);
  if (!opts.quiet) {
    std::cout << "scenario " << (sc.name.empty() ? "<unnamed>" : sc.name)
              << " seed " << sc.seed << " -> " << out_path << '\n'
              << report.summary();
  }
  return report.clean() ? kExitClean : kExitViolation;
}

int cmd_check(const std::string &trace_path, bool quiet) {
  Trace trace;
  Scenario sc;
  try {
    trace = read_trace_file(trace_path);
    sc = Scenario::from_json(trace.header.scenario);
    if (sc.digest() != trace.header.scenario_digest) {
      throw CorruptTraceError("scenario digest mismatch");
    }
  } catch (const CorruptTraceError &e) {
    std::cerr << "corrupt trace: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  const CheckReport report = run_checkers(trace, sc);
  if (!quiet) {
    std::cout << report.summary();
  }
  return report.clean() ? kExitClean : kExitViolation;
}

int cmd_challenge(const std::string &trace_path, bool quiet) {
  Trace trace;
  Scenario sc;
  try {
    trace = read_trace_file(trace_path);
    sc = Scenario::from_json(trace.header.scenario);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  const BlockTree tree = tree_from_trace(trace);
  std::optional<ReplayedChallenge> replayed;
  const auto error = replay_challenge(trace, sc, tree, replayed);
  if (error) {
    std::cerr << "challenge replay failed: " << *error << '\n';
    return kExitEvidence;
  }
  if (!replayed) {
    // No recorded session; check whether a conflict exists at all.
    auto voters = std::make_shared<VoterSet>(sc.n, sc.f);
    std::vector<CommitMessage> commits;
    for (const TraceEvent &ev : trace.events) {
      if (ev.kind == "commit-sent") {
        CommitMessage msg;
        msg.round = ev.payload.at("round").get<RoundNumber>();
        msg.target = block_id_from_json(ev.payload.at("target"));
        for (const auto &v : ev.payload.at("precommits")) {
          msg.precommits.push_back(vote_from_json(v));
        }
        if (validate_commit(msg, voters, tree)) {
          commits.push_back(std::move(msg));
        }
      }
    }
    for (std::size_t i = 0; i < commits.size(); ++i) {
      for (std::size_t j = i + 1; j < commits.size(); ++j) {
        if (!tree.same_chain(commits[i].target, commits[j].target)) {
          std::cerr << "conflicting commits present but no challenge "
                       "session recorded\n";
          return kExitEvidence;
        }
      }
    }
    if (!quiet) {
      std::cout << "no conflicting commits in trace\n";
    }
    return kExitConfig;  // NoConflict
  }

  const std::size_t named = replayed->verdict.byzantine.size();
  std::size_t misnamed = 0;
  for (VoterId v : replayed->verdict.byzantine) {
    if (!sc.is_byzantine(v)) {
      ++misnamed;
    }
  }
  if (!quiet) {
    std::cout << "verdict names " << named << " voter(s) (f+1 = "
              << sc.f + 1 << "):";
    for (VoterId v : replayed->verdict.byzantine) {
      std::cout << ' ' << to_string(v);
    }
    std::cout << "\nevidence re-verified offline\n";
    if (misnamed > 0) {
      std::cout << "warning: " << misnamed
                << " named voter(s) not configured Byzantine\n";
    }
  }
  if (named < sc.f + 1) {
    std::cerr << "verdict names fewer than f+1 voters\n";
    return kExitEvidence;
  }
  return kExitClean;
}

int cmd_sweep(const SweepOptions &opts) {
  if (opts.seed_to < opts.seed_from) {
    std::cerr << "config error: empty seed range\n";
    return kExitConfig;
  }
  Scenario base;
  try {
    base = scenario_from_file(opts.scenario_path);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::string out_dir = opts.out_dir;
  if (out_dir.empty()) {
    if (const char *env = std::getenv(kOutDirEnv)) {
      out_dir = env;
    }
  }

  struct SeedResult {
    std::uint64_t seed = 0;
    CheckReport report;
  };
  const std::size_t count = opts.seed_to - opts.seed_from + 1;
  std::vector<SeedResult> results(count);

  // Runs are fully independent; spread them over a small pool.
  const std::size_t workers =
      std::min<std::size_t>(count,
                            std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::future<void>> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < count; i += workers) {
        Scenario sc = base;
        sc.seed = opts.seed_from + i;
        const Trace trace = run_scenario(sc);
        results[i] = SeedResult{sc.seed, run_checkers(trace, sc)};
        if (!out_dir.empty()) {
          write_trace_file(default_out_path(sc.name, sc.seed), trace);
        }
      }
    }));
  }
  for (auto &f : pool) {
    f.get();
  }

  std::size_t violating = 0;
  std::map<std::string, std::size_t> by_code;
  std::vector<Tick> p50s;
  for (const SeedResult &r : results) {
    if (!r.report.clean()) {
      ++violating;
      for (const Violation &v : r.report.violations) {
        ++by_code[v.code];
      }
    }
    p50s.push_back(r.report.stats.latency_p50);
  }
  std::sort(p50s.begin(), p50s.end());

  if (!opts.quiet) {
    std::cout << "seeds " << opts.seed_from << ".." << opts.seed_to << ": "
              << count - violating << "/" << count << " clean\n";
    if (!p50s.empty()) {
      std::cout << "median finalisation latency p50 across seeds: "
                << p50s[p50s.size() / 2] << " ticks\n";
    }
    for (const auto &[code, n] : by_code) {
      std::cout << "  " << code << ": " << n << " violation(s)\n";
    }
    for (const SeedResult &r : results) {
      if (!r.report.clean()) {
        std::cout << "seed " << r.seed << ":\n" << r.report.summary();
      }
    }
  }
  return violating == 0 ? kExitClean : kExitViolation;
}

}  // namespace grandpa
