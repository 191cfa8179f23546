/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "grandpa/ids.hpp"
#include "grandpa/round_engine.hpp"

namespace grandpa {

struct CorruptTraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One timestamped record in a run's event log. Events are totally
/// ordered by (time, seq); re-running a scenario with the same seed
/// reproduces the log byte for byte.
struct TraceEvent {
  Tick time = 0;
  std::uint64_t seq = 0;
  std::int64_t actor = -1;  // voter index; -1 for the harness
  std::string kind;
  nlohmann::json payload;   // kind-specific fields, flat object

  bool operator==(const TraceEvent &) const = default;
};

struct TraceHeader {
  std::string tool;
  std::uint64_t seed = 0;
  std::string scenario_digest;  // fnv1a64 over the canonical scenario JSON
  nlohmann::json scenario;      // canonical scenario, embedded for replay

  bool operator==(const TraceHeader &) const = default;
};

struct Trace {
  TraceHeader header;
  std::vector<TraceEvent> events;
};

// JSON helpers shared by trace payloads and evidence serialization.
nlohmann::json json_of(BlockId id);
BlockId block_id_from_json(const nlohmann::json &j);
nlohmann::json json_of(const Vote &vote);
Vote vote_from_json(const nlohmann::json &j);
nlohmann::json json_of(const CommitMessage &msg);
CommitMessage commit_from_json(const nlohmann::json &j);

/// Line-delimited serialization: one header record, one record per event
/// in delivery order, and a trailing digest record over all preceding
/// bytes (FNV-1a 64). The digest is integrity-only, not cryptographic.
std::string serialize_trace(const Trace &trace);

/// Parses and verifies the digest; throws CorruptTraceError on any
/// mismatch or malformed record.
Trace parse_trace(const std::string &text);

void write_trace_file(const std::string &path, const Trace &trace);
Trace read_trace_file(const std::string &path);

}  // namespace grandpa
