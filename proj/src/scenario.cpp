/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include "grandpa/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace grandpa {

namespace {

const char *behavior_name(Behavior b) {
  switch (b) {
    case Behavior::Equivocator:
      return "equivocator";
    case Behavior::Mute:
      return "mute";
    case Behavior::VoteSplitter:
      return "vote-splitter";
    case Behavior::BadPrimary:
      return "bad-primary";
    case Behavior::ConflictingFinalizer:
      return "conflicting-finalizer";
  }
  return "?";
}

Behavior behavior_from(const std::string &s) {
  if (s == "equivocator") return Behavior::Equivocator;
  if (s == "mute") return Behavior::Mute;
  if (s == "vote-splitter") return Behavior::VoteSplitter;
  if (s == "bad-primary") return Behavior::BadPrimary;
  if (s == "conflicting-finalizer") return Behavior::ConflictingFinalizer;
  throw ConfigError("unknown adversary behavior: " + s);
}

const char *policy_name(PreGstPolicy p) {
  switch (p) {
    case PreGstPolicy::Uniform:
      return "uniform";
    case PreGstPolicy::WithholdAll:
      return "withhold-all";
    case PreGstPolicy::WithholdVotes:
      return "withhold-votes";
    case PreGstPolicy::RandomDelay:
      return "random-delay";
    case PreGstPolicy::Partition:
      return "partition";
  }
  return "?";
}

PreGstPolicy policy_from(const std::string &s) {
  if (s == "uniform") return PreGstPolicy::Uniform;
  if (s == "withhold-all") return PreGstPolicy::WithholdAll;
  if (s == "withhold-votes") return PreGstPolicy::WithholdVotes;
  if (s == "random-delay") return PreGstPolicy::RandomDelay;
  if (s == "partition") return PreGstPolicy::Partition;
  throw ConfigError("unknown pre_gst_policy: " + s);
}

const char *mode_name(NetworkMode m) {
  return m == NetworkMode::PartialSynchrony ? "partial-synchrony"
                                            : "async-eventual";
}

NetworkMode mode_from(const std::string &s) {
  if (s == "partial-synchrony") return NetworkMode::PartialSynchrony;
  if (s == "async-eventual") return NetworkMode::AsyncEventual;
  throw ConfigError("unknown network_mode: " + s);
}

const char *primary_mode_name(PrimaryMode m) {
  return m == PrimaryMode::RoundRobin ? "round-robin" : "seeded-random";
}

PrimaryMode primary_mode_from(const std::string &s) {
  if (s == "round-robin") return PrimaryMode::RoundRobin;
  if (s == "seeded-random") return PrimaryMode::SeededRandom;
  throw ConfigError("unknown primary_mode: " + s);
}

void reject_unknown_keys(const nlohmann::json &j,
                         const std::set<std::string> &allowed,
                         const std::string &where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (allowed.count(it.key()) == 0) {
      throw ConfigError("unknown key in " + where + ": " + it.key());
    }
  }
}

}  // namespace

std::vector<VoterId> Scenario::honest_voters() const {
  std::vector<VoterId> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!is_byzantine(VoterId{i})) {
      out.push_back(VoterId{i});
    }
  }
  return out;
}

void Scenario::validate() const {
  VoterSet check(n, f);  // throws on bad (n, f)
  if (net_bound < 1) {
    throw ConfigError("T must be at least one tick");
  }
  if (duration < 1) {
    throw ConfigError("duration must be positive");
  }
  if (gst < 0) {
    throw ConfigError("GST must be non-negative");
  }
  if (block_interval < 1) {
    throw ConfigError("block_interval must be positive");
  }
  if (commit_backoff_max < 0) {
    throw ConfigError("commit_backoff_max must be non-negative");
  }
  if (network_mode == NetworkMode::AsyncEventual &&
      async_delay_cap < net_bound) {
    throw ConfigError("async_delay_cap must be at least T");
  }

  std::size_t conflicting = 0;
  for (const auto &[index, spec] : adversaries) {
    if (index >= n) {
      throw ConfigError("adversary index out of range");
    }
    if (spec.behavior == Behavior::ConflictingFinalizer) {
      ++conflicting;
    }
    if (spec.behavior == Behavior::VoteSplitter && spec.splitter_delay < 0) {
      throw ConfigError("splitter_delay must be non-negative");
    }
  }
  if (!accountability && adversaries.size() > f) {
    throw ConfigError(
        "more than f Byzantine voters requires the accountability flag");
  }

  if (conflicting > 0) {
    if (!accountability) {
      throw ConfigError("conflicting-finalizer requires accountability");
    }
    if (conflicting != adversaries.size()) {
      throw ConfigError("conflicting-finalizer colluders cannot be mixed "
                        "with other behaviors");
    }
    if (conflicting != f + 1) {
      throw ConfigError("conflicting-finalizer requires exactly f+1 "
                        "colluders");
    }
    if (pre_gst_policy != PreGstPolicy::Partition) {
      throw ConfigError("conflicting-finalizer requires the partition "
                        "policy");
    }
    if (gst < 1) {
      throw ConfigError("conflicting-finalizer requires GST > 0");
    }
    const AdversarySpec &first = adversaries.begin()->second;
    std::set<std::uint32_t> seen;
    for (const auto &[index, spec] : adversaries) {
      if (spec != first) {
        throw ConfigError("colluder specs must be identical");
      }
    }
    for (std::uint32_t v : first.partition_a) {
      seen.insert(v);
    }
    for (std::uint32_t v : first.partition_b) {
      if (!seen.insert(v).second) {
        throw ConfigError("partitions must be disjoint");
      }
    }
    for (std::uint32_t i = 0; i < n; ++i) {
      const bool honest = !is_byzantine(VoterId{i});
      if (honest && seen.count(i) == 0) {
        throw ConfigError("partitions must cover every honest voter");
      }
      if (!honest && seen.count(i) != 0) {
        throw ConfigError("partitions must not contain colluders");
      }
    }
    if (first.partition_a.empty() || first.partition_b.empty()) {
      throw ConfigError("both partitions must be non-empty");
    }
    if (first.commit_round_a < 1 || first.commit_round_b < 1) {
      throw ConfigError("commit rounds must be at least 1");
    }
  } else if (pre_gst_policy == PreGstPolicy::Partition) {
    throw ConfigError("partition policy requires conflicting-finalizer "
                      "adversaries");
  }
  (void)check;
}

nlohmann::json Scenario::to_json() const {
  nlohmann::json adv = nlohmann::json::object();
  for (const auto &[index, spec] : adversaries) {
    nlohmann::json s{{"behavior", behavior_name(spec.behavior)}};
    if (spec.behavior == Behavior::VoteSplitter) {
      s["delay"] = spec.splitter_delay;
    }
    if (spec.behavior == Behavior::ConflictingFinalizer) {
      s["partition_a"] = spec.partition_a;
      s["partition_b"] = spec.partition_b;
      s["commit_round_a"] = spec.commit_round_a;
      s["commit_round_b"] = spec.commit_round_b;
    }
    adv[std::to_string(index)] = std::move(s);
  }
  return nlohmann::json{{"name", name},
                        {"description", description},
                        {"n", n},
                        {"f", f},
                        {"T", net_bound},
                        {"gst", gst},
                        {"duration", duration},
                        {"seed", seed},
                        {"block_interval", block_interval},
                        {"primary_mode", primary_mode_name(primary_mode)},
                        {"commit_backoff_max", commit_backoff_max},
                        {"precommit_rule_iii", precommit_rule_iii},
                        {"pre_gst_policy", policy_name(pre_gst_policy)},
                        {"network_mode", mode_name(network_mode)},
                        {"async_delay_cap", async_delay_cap},
                        {"accountability", accountability},
                        {"adversaries", std::move(adv)}};
}

Scenario Scenario::from_json(const nlohmann::json &j) {
  static const std::set<std::string> kKeys{
      "name",           "description",       "n",
      "f",              "T",                 "gst",
      "duration",       "seed",              "block_interval",
      "primary_mode",   "commit_backoff_max", "precommit_rule_iii",
      "pre_gst_policy", "network_mode",      "async_delay_cap",
      "accountability", "adversaries"};
  if (!j.is_object()) {
    throw ConfigError("scenario must be a JSON object");
  }
  reject_unknown_keys(j, kKeys, "scenario");

  Scenario s;
  s.name = j.value("name", std::string{});
  s.description = j.value("description", std::string{});
  if (!j.contains("n")) {
    throw ConfigError("scenario requires n");
  }
  s.n = j.at("n").get<std::size_t>();
  s.f = j.contains("f") ? j.at("f").get<std::size_t>()
                        : (s.n >= 1 ? (s.n - 1) / 3 : 0);
  s.net_bound = j.value("T", Tick{1});
  s.gst = j.value("gst", Tick{0});
  s.duration = j.value("duration", Tick{240});
  s.seed = j.value("seed", std::uint64_t{1});
  s.block_interval = j.value("block_interval", Tick{3});
  s.primary_mode =
      primary_mode_from(j.value("primary_mode", std::string{"round-robin"}));
  s.commit_backoff_max = j.value("commit_backoff_max", Tick{1});
  s.precommit_rule_iii = j.value("precommit_rule_iii", true);
  s.pre_gst_policy =
      policy_from(j.value("pre_gst_policy", std::string{"uniform"}));
  s.network_mode =
      mode_from(j.value("network_mode", std::string{"partial-synchrony"}));
  s.async_delay_cap = j.value("async_delay_cap", Tick{16});
  s.accountability = j.value("accountability", false);

  if (j.contains("adversaries")) {
    static const std::set<std::string> kAdvKeys{
        "behavior",      "delay",          "partition_a",
        "partition_b",   "commit_round_a", "commit_round_b"};
    for (auto it = j.at("adversaries").begin(); it != j.at("adversaries").end();
         ++it) {
      reject_unknown_keys(it.value(), kAdvKeys, "adversary " + it.key());
      AdversarySpec spec;
      spec.behavior =
          behavior_from(it.value().at("behavior").get<std::string>());
      spec.splitter_delay = it.value().value("delay", Tick{3});
      if (it.value().contains("partition_a")) {
        spec.partition_a =
            it.value().at("partition_a").get<std::vector<std::uint32_t>>();
      }
      if (it.value().contains("partition_b")) {
        spec.partition_b =
            it.value().at("partition_b").get<std::vector<std::uint32_t>>();
      }
      spec.commit_round_a = it.value().value("commit_round_a", RoundNumber{3});
      spec.commit_round_b = it.value().value("commit_round_b", RoundNumber{3});
      std::uint32_t index = 0;
      try {
        index = static_cast<std::uint32_t>(std::stoul(it.key()));
      } catch (const std::exception &) {
        throw ConfigError("adversary keys must be voter indices");
      }
      s.adversaries.emplace(index, std::move(spec));
    }
  }
  s.validate();
  return s;
}

std::string Scenario::digest() const {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

Scenario scenario_from_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open scenario file: " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed scenario JSON: ") + e.what());
  }
  return Scenario::from_json(j);
}

void scenario_to_file(const Scenario &s, const std::string &path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot open scenario file for write: " + path);
  }
  out << s.to_json().dump(2) << '\n';
}

}  // namespace grandpa
