/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "grandpa/cli_commands.hpp"
#include "grandpa/scenario.hpp"
#include "grandpa/simnet.hpp"
#include "grandpa/trace.hpp"
#include "support.hpp"

using namespace grandpa;
using namespace grandpa::testing;

namespace {

Scenario small_scenario() {
  Scenario sc;
  sc.name = "fmt-test";
  sc.n = 4;
  sc.f = 1;
  sc.duration = 60;
  sc.seed = 9;
  return sc;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string &name)
      : path((std::filesystem::temp_directory_path() / name).string()) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("scenario: parse -> serialize -> parse is identity") {
  Scenario sc = small_scenario();
  sc.adversaries.emplace(2, AdversarySpec{Behavior::Equivocator});
  sc.pre_gst_policy = PreGstPolicy::WithholdVotes;
  sc.gst = 30;
  sc.validate();

  const auto j = sc.to_json();
  const Scenario back = Scenario::from_json(j);
  CHECK(back == sc);
  CHECK(back.to_json() == j);
  CHECK(back.digest() == sc.digest());
}

TEST_CASE("scenario: defaults are materialized") {
  const auto j = nlohmann::json{{"n", 7}};
  const Scenario sc = Scenario::from_json(j);
  CHECK(sc.f == 2);  // floor((n-1)/3)
  CHECK(sc.net_bound == 1);
  CHECK(sc.duration == 240);
  CHECK(sc.precommit_rule_iii);
  CHECK(sc.primary_mode == PrimaryMode::RoundRobin);
}

TEST_CASE("scenario: unknown keys and bad configs are rejected") {
  CHECK_THROWS_AS(Scenario::from_json({{"n", 4}, {"banana", 1}}), ConfigError);
  CHECK_THROWS_AS(Scenario::from_json({{"n", 4},
                                       {"adversaries",
                                        {{"1", {{"behavior", "mute"},
                                                {"oops", true}}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(Scenario::from_json({{"n", 4}, {"f", 2}}), ConfigError);
  CHECK_THROWS_AS(Scenario::from_json(nlohmann::json::array()), ConfigError);

  // more than f adversaries without the accountability flag
  CHECK_THROWS_AS(
      Scenario::from_json({{"n", 4},
                           {"adversaries",
                            {{"1", {{"behavior", "mute"}}},
                             {"2", {{"behavior", "mute"}}}}}}),
      ConfigError);

  // partition policy without conflicting finalizers
  CHECK_THROWS_AS(
      Scenario::from_json({{"n", 4}, {"pre_gst_policy", "partition"}}),
      ConfigError);

  // conflicting finalizers need exactly f+1 colluders
  CHECK_THROWS_AS(
      Scenario::from_json(
          {{"n", 4},
           {"gst", 50},
           {"accountability", true},
           {"pre_gst_policy", "partition"},
           {"adversaries",
            {{"3",
              {{"behavior", "conflicting-finalizer"},
               {"partition_a", {0}},
               {"partition_b", {1, 2}}}}}}}),
      ConfigError);
}

TEST_CASE("vote and commit JSON round-trips") {
  FixtureTree fx;
  const Vote vote = make_vote(3, VoteKind::Precommit, fx.a2, VoterId{2});
  CHECK(vote_from_json(json_of(vote)) == vote);

  CommitMessage msg;
  msg.round = 3;
  msg.target = fx.a1;
  msg.precommits = {vote, make_vote(3, VoteKind::Precommit, fx.a1, VoterId{0})};
  CHECK(commit_from_json(json_of(msg)) == msg);
}

TEST_CASE("trace: serialize -> parse round-trip and digest protection") {
  Scenario sc = small_scenario();
  const Trace trace = run_scenario(sc);
  REQUIRE(!trace.events.empty());

  const std::string text = serialize_trace(trace);
  const Trace back = parse_trace(text);
  CHECK(back.header == trace.header);
  REQUIRE(back.events.size() == trace.events.size());
  CHECK(back.events.front() == trace.events.front());
  CHECK(back.events.back() == trace.events.back());
  CHECK(serialize_trace(back) == text);

  // Any flipped byte in the body breaks the digest.
  std::string corrupted = text;
  corrupted[text.size() / 3] ^= 1;
  CHECK_THROWS_AS(parse_trace(corrupted), CorruptTraceError);

  CHECK_THROWS_AS(parse_trace("{}\n"), CorruptTraceError);
  CHECK_THROWS_AS(parse_trace("not json\nat all\n"), CorruptTraceError);
}

TEST_CASE("cmd_run/cmd_check exit codes") {
  TempFile scenario_file("grandpa-fmt-scenario.json");
  TempFile trace_file("grandpa-fmt-trace.jsonl");

  Scenario sc = small_scenario();
  scenario_to_file(sc, scenario_file.path);

  RunOptions opts;
  opts.scenario_path = scenario_file.path;
  opts.out_path = trace_file.path;
  opts.quiet = true;
  CHECK(cmd_run(opts) == kExitClean);
  CHECK(cmd_check(trace_file.path, true) == kExitClean);
  CHECK(cmd_challenge(trace_file.path, true) == kExitConfig);  // no conflict

  // Malformed scenario file.
  {
    std::ofstream bad(scenario_file.path);
    bad << "{\"n\": 4, \"nonsense\": true}\n";
  }
  CHECK(cmd_run(opts) == kExitConfig);

  // Corrupt trace file.
  {
    std::ifstream in(trace_file.path, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    text[text.size() / 2] ^= 1;
    std::ofstream out(trace_file.path, std::ios::binary);
    out << text;
  }
  CHECK(cmd_check(trace_file.path, true) == kExitConfig);
}

TEST_CASE("cmd_sweep rejects an empty seed range") {
  TempFile scenario_file("grandpa-fmt-sweep.json");
  scenario_to_file(small_scenario(), scenario_file.path);
  SweepOptions opts;
  opts.scenario_path = scenario_file.path;
  opts.seed_from = 5;
  opts.seed_to = 4;
  opts.quiet = true;
  CHECK(cmd_sweep(opts) == kExitConfig);
}
