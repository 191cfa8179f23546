/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include <json.hpp>

#include "grandpa/round_engine.hpp"

namespace grandpa {

struct NotAConflictError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotApplicableError : std::runtime_error {
  NotApplicableError()
      : std::runtime_error("query mis-addressed: addressee voted >= B") {}
};

/// Two validated commits whose targets do not share a chain. Normalized so
/// commit_a.round <= commit_b.round.
struct ConflictClaim {
  CommitMessage commit_a;
  CommitMessage commit_b;

  bool operator==(const ConflictClaim &) const = default;
};

ConflictClaim make_claim(CommitMessage a, CommitMessage b,
                         const std::shared_ptr<const VoterSet> &voters,
                         const BlockTree &tree);

struct Query {
  enum class Kind { WhyEstimate, PrevotesSeen };

  Kind kind = Kind::WhyEstimate;
  RoundNumber vote_round = 0;  // the round of the questioned vote
  BlockId block;               // B: the block the estimate should have covered
  VoterId addressee;
  Vote addressee_vote;  // the contrary vote being questioned

  bool operator==(const Query &) const = default;
};

/// A responder's defense: a set of round-(vote_round - 1) prevotes or
/// precommits for which a supermajority for B is impossible (WhyEstimate),
/// or the round-r prevotes backing its precommit (PrevotesSeen). The
/// claimed property always re-verifies from the raw votes alone.
struct Response {
  VoteKind set_kind = VoteKind::Prevote;
  RoundNumber set_round = 0;
  std::vector<Vote> votes;

  bool operator==(const Response &) const = default;
};

struct EquivocationEvidence {
  VoteKind kind = VoteKind::Prevote;
  RoundNumber round = 0;
  std::vector<Vote> votes;  // >= 2 distinct votes per named voter

  bool operator==(const EquivocationEvidence &) const = default;
};

struct NonResponseEvidence {
  std::vector<Query> queries;
  Tick deadline = 0;
  std::vector<VoterId> silent;

  bool operator==(const NonResponseEvidence &) const = default;
};

struct Verdict {
  std::vector<VoterId> byzantine;  // sorted, unique; >= f+1 when sound
  std::variant<EquivocationEvidence, NonResponseEvidence> evidence;

  bool operator==(const Verdict &) const = default;
};

/// Voters with at least two distinct recorded targets in the union set.
std::vector<VoterId> extract_equivocators(const VoteSet &merged);

/// Builds the honest reply from the responder's retained history: its
/// current round-(r''-1) prevotes when B is off-chain from their ghost
/// (impossibility by the off-chain rule), otherwise its current
/// round-(r''-1) precommits (impossibility inherited from the estimate
/// walk). For PrevotesSeen, the current round-r prevote set. Throws
/// NotApplicableError when the addressee's own vote was >= B.
Response honest_answer(const VoterState &history, const Query &q);

/// Recomputes the claimed property from the raw authenticated votes.
bool verify_response(const Response &resp, const Query &q,
                     const std::shared_ptr<const VoterSet> &voters,
                     const BlockTree &tree);

/// Offline re-verification of a verdict's evidence (no session state).
bool verify_verdict(const Verdict &verdict,
                    const std::shared_ptr<const VoterSet> &voters);

/// The interactive cross-round procedure. One step per query round:
/// the owner sends pending_queries(), collects responses until its
/// deadline, then calls step(). Produces a Verdict naming at least f+1
/// Byzantine voters (equivocation evidence when responses flow;
/// non-response evidence when an entire step stays silent).
class ChallengeSession {
 public:
  ChallengeSession(ConflictClaim claim,
                   std::shared_ptr<const VoterSet> voters,
                   std::shared_ptr<const BlockTree> tree);

  const ConflictClaim &claim() const { return claim_; }
  const std::vector<Query> &pending_queries() const { return queries_; }
  RoundNumber query_round() const { return vote_round_; }
  bool done() const { return verdict_.has_value(); }
  const std::optional<Verdict> &verdict() const { return verdict_; }

  /// Consumes the responses collected for the current step. Returns the
  /// final verdict, or nullopt when the session advanced to a new set of
  /// pending queries. `deadline` is recorded in non-response evidence.
  std::optional<Verdict> step(
      const std::vector<std::pair<VoterId, Response>> &responses,
      Tick deadline);

 private:
  std::vector<Query> why_estimate_queries(const VoteSet &contrary) const;
  Verdict non_response_verdict(Tick deadline) const;
  Verdict equivocation_verdict(const VoteSet &merged) const;

  ConflictClaim claim_;
  std::shared_ptr<const VoterSet> voters_;
  std::shared_ptr<const BlockTree> tree_;

  enum class Phase { Descending, PrevotesSeen };
  Phase phase_ = Phase::Descending;
  RoundNumber vote_round_ = 0;  // r'' while descending
  std::vector<Query> queries_;
  std::optional<VoteSet> round_r_prevotes_;  // S once the descent lands
  std::vector<VoterId> observed_equivocators_;
  std::optional<Verdict> verdict_;
};

/// Entry point: same-round conflicts resolve immediately by merging the
/// two precommit sets; cross-round conflicts return an interactive
/// session. Throws NotAConflictError when the claim does not hold up.
std::variant<Verdict, ChallengeSession> start_challenge(
    const ConflictClaim &claim, std::shared_ptr<const VoterSet> voters,
    std::shared_ptr<const BlockTree> tree);

// JSON forms used by trace records and offline replay.
nlohmann::json json_of(const Query &q);
Query query_from_json(const nlohmann::json &j);
nlohmann::json json_of(const Response &r);
Response response_from_json(const nlohmann::json &j);
nlohmann::json json_of(const Verdict &v);
Verdict verdict_from_json(const nlohmann::json &j);

}  // namespace grandpa
