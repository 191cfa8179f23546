/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include "grandpa/trace.hpp"

#include <fstream>
#include <sstream>

namespace grandpa {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string &s) {
  if (s.size() != 18 || s[0] != '0' || s[1] != 'x') {
    throw CorruptTraceError("malformed hex id: " + s);
  }
  return std::stoull(s.substr(2), nullptr, 16);
}

}  // namespace

nlohmann::json json_of(BlockId id) { return hex64(id.value); }

BlockId block_id_from_json(const nlohmann::json &j) {
  return BlockId{parse_hex64(j.get<std::string>())};
}

nlohmann::json json_of(const Vote &vote) {
  return nlohmann::json{{"round", vote.round},
                        {"kind", to_string(vote.kind)},
                        {"target", json_of(vote.target)},
                        {"voter", vote.voter.index},
                        {"auth", hex64(vote.auth)}};
}

Vote vote_from_json(const nlohmann::json &j) {
  Vote vote;
  vote.round = j.at("round").get<RoundNumber>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "prevote") {
    vote.kind = VoteKind::Prevote;
  } else if (kind == "precommit") {
    vote.kind = VoteKind::Precommit;
  } else {
    throw CorruptTraceError("unknown vote kind: " + kind);
  }
  vote.target = block_id_from_json(j.at("target"));
  vote.voter = VoterId{j.at("voter").get<std::uint32_t>()};
  vote.auth = parse_hex64(j.at("auth").get<std::string>());
  return vote;
}

nlohmann::json json_of(const CommitMessage &msg) {
  nlohmann::json precommits = nlohmann::json::array();
  for (const Vote &vote : msg.precommits) {
    precommits.push_back(json_of(vote));
  }
  return nlohmann::json{{"round", msg.round},
                        {"target", json_of(msg.target)},
                        {"precommits", std::move(precommits)}};
}

CommitMessage commit_from_json(const nlohmann::json &j) {
  CommitMessage msg;
  msg.round = j.at("round").get<RoundNumber>();
  msg.target = block_id_from_json(j.at("target"));
  for (const auto &v : j.at("precommits")) {
    msg.precommits.push_back(vote_from_json(v));
  }
  return msg;
}

std::string serialize_trace(const Trace &trace) {
  std::ostringstream out;
  nlohmann::json header{{"type", "header"},
                        {"tool", trace.header.tool},
                        {"seed", trace.header.seed},
                        {"scenario_digest", trace.header.scenario_digest},
                        {"scenario", trace.header.scenario}};
  out << header.dump() << '\n';
  for (const TraceEvent &ev : trace.events) {
    nlohmann::json line = ev.payload;
    line["t"] = ev.time;
    line["seq"] = ev.seq;
    line["actor"] = ev.actor;
    line["kind"] = ev.kind;
    out << line.dump() << '\n';
  }
  const std::string body = out.str();
  nlohmann::json digest{{"type", "digest"}, {"fnv1a64", hex64(fnv1a64(body))}};
  return body + digest.dump() + '\n';
}

Trace parse_trace(const std::string &text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      throw CorruptTraceError("trace not newline-terminated");
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.size() < 2) {
    throw CorruptTraceError("trace too short");
  }

  nlohmann::json digest_line;
  try {
    digest_line = nlohmann::json::parse(lines.back());
  } catch (const nlohmann::json::exception &e) {
    throw CorruptTraceError(std::string("malformed digest record: ") +
                            e.what());
  }
  if (digest_line.value("type", "") != "digest") {
    throw CorruptTraceError("missing digest record");
  }
  const std::size_t body_len =
      text.rfind('\n', text.size() - 2) + 1;  // start of the digest line
  const std::uint64_t want =
      parse_hex64(digest_line.at("fnv1a64").get<std::string>());
  if (fnv1a64(text.data(), body_len) != want) {
    throw CorruptTraceError("digest mismatch");
  }

  Trace trace;
  try {
    const auto header = nlohmann::json::parse(lines.front());
    if (header.value("type", "") != "header") {
      throw CorruptTraceError("missing header record");
    }
    trace.header.tool = header.at("tool").get<std::string>();
    trace.header.seed = header.at("seed").get<std::uint64_t>();
    trace.header.scenario_digest =
        header.at("scenario_digest").get<std::string>();
    trace.header.scenario = header.at("scenario");

    for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
      auto j = nlohmann::json::parse(lines[i]);
      TraceEvent ev;
      ev.time = j.at("t").get<Tick>();
      ev.seq = j.at("seq").get<std::uint64_t>();
      ev.actor = j.at("actor").get<std::int64_t>();
      ev.kind = j.at("kind").get<std::string>();
      j.erase("t");
      j.erase("seq");
      j.erase("actor");
      j.erase("kind");
      ev.payload = std::move(j);
      trace.events.push_back(std::move(ev));
    }
  } catch (const nlohmann::json::exception &e) {
    throw CorruptTraceError(std::string("malformed trace record: ") +
                            e.what());
  }
  return trace;
}

void write_trace_file(const std::string &path, const Trace &trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for write: " + path);
  }
  out << serialize_trace(trace);
}

Trace read_trace_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for read: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

}  // namespace grandpa
