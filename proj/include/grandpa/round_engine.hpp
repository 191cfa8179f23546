/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "grandpa/block_tree.hpp"
#include "grandpa/vote_math.hpp"

namespace grandpa {

struct NoGhostError : std::runtime_error {
  NoGhostError() : std::runtime_error("prevote ghost does not exist") {}
};

struct NotPrimaryError : std::runtime_error {
  NotPrimaryError() : std::runtime_error("caller is not the round primary") {}
};

struct AlreadyVotedError : std::runtime_error {
  AlreadyVotedError() : std::runtime_error("own vote already cast") {}
};

/// A finalisation proof: target block plus round-r precommits for blocks
/// descending from it that form a supermajority.
struct CommitMessage {
  RoundNumber round = 0;
  BlockId target;
  std::vector<Vote> precommits;

  bool operator==(const CommitMessage &) const = default;
};

/// True iff every precommit is an authentic round-r precommit from a voter
/// in `voters` targeting a descendant-or-equal of msg.target, and the
/// contained set has a supermajority for msg.target (equivocating voters
/// count once).
bool validate_commit(const CommitMessage &msg,
                     const std::shared_ptr<const VoterSet> &voters,
                     const BlockTree &tree);

/// One round as a single participant sees it: both vote sets, the round
/// primary, the primary's broadcast (if received), and the participant's
/// own votes. Own votes never change once cast. Derived values (ghosts,
/// estimate, completability) are recomputed on demand; cached descent
/// hints only accelerate the recomputation.
class RoundState {
 public:
  RoundState(std::shared_ptr<const VoterSet> voters, RoundNumber round,
             VoterId primary);

  RoundNumber round() const { return round_; }
  VoterId primary() const { return primary_; }

  VoteSet &prevotes() { return prevotes_; }
  const VoteSet &prevotes() const { return prevotes_; }
  VoteSet &precommits() { return precommits_; }
  const VoteSet &precommits() const { return precommits_; }

  std::optional<Tick> start_time;
  std::optional<BlockId> primary_block;
  std::optional<BlockId> own_prevote;
  std::optional<BlockId> own_precommit;

  std::optional<BlockId> ghost_prevotes(const BlockTree &tree) const;
  std::optional<BlockId> ghost_precommits(const BlockTree &tree) const;

  /// E_r: the deepest block on chain(g(V_r)) for which a precommit
  /// supermajority is still possible. Throws NoGhostError when g(V_r)
  /// does not exist.
  BlockId estimate(const BlockTree &tree) const;

  /// A round is completable once E_r provably contains everything the
  /// round could finalise: either E_r < g(V_r), or no child of g(V_r)
  /// can gain a precommit supermajority.
  bool completable(const BlockTree &tree) const;

 private:
  RoundNumber round_;
  VoterId primary_;
  VoteSet prevotes_;
  VoteSet precommits_;
  mutable std::optional<BlockId> gv_hint_;
  mutable std::optional<BlockId> gc_hint_;
};

struct EngineConfig {
  Tick net_bound = 1;  // T
  Tick commit_backoff_max = 1;
  bool precommit_rule_iii = true;
  RoundNumber round_horizon = 5;
  bool is_voter = true;
};

struct Finalization {
  BlockId block;
  std::uint64_t number = 0;
  RoundNumber round = 0;

  bool operator==(const Finalization &) const = default;
};

// Outputs of VoterState::poll. The harness turns these into gossip,
// timers, and trace records; the engine itself performs no I/O.
struct StartedRound {
  RoundNumber round = 0;
  Tick at = 0;
  BlockId prev_estimate;  // E_{r-1} at the moment the round started
  VoterId primary;
};
struct CastVote {
  Vote vote;
};
struct PrimaryBroadcast {
  RoundNumber round = 0;
  BlockId block;
};
struct ScheduleWake {
  Tick at = 0;
};
struct EmitCommit {
  CommitMessage msg;
};
using Action = std::variant<StartedRound, CastVote, PrimaryBroadcast,
                            ScheduleWake, EmitCommit, Finalization>;

using BestChainFn = std::function<BlockId(BlockId base)>;
using PrimaryFn = std::function<VoterId(RoundNumber round)>;
using BackoffFn = std::function<Tick(Tick max)>;  // uniform in [0, max]
/// Adversary injection point: replaces the block a precommit targets.
using PrecommitOverrideFn =
    std::function<BlockId(RoundNumber round, BlockId computed)>;

/// One participant's deterministic, event-driven protocol state machine.
/// Inputs are delivered votes/commits/broadcasts plus clock polls; outputs
/// are Actions. Full per-round history is retained so accountability
/// queries can be answered later.
class VoterState {
 public:
  VoterState(VoterId id, std::shared_ptr<const VoterSet> voters,
             std::shared_ptr<BlockTree> tree, EngineConfig config,
             BestChainFn best_chain, PrimaryFn primary, BackoffFn backoff);

  void set_precommit_override(PrecommitOverrideFn fn) {
    precommit_override_ = std::move(fn);
  }

  VoterId id() const { return id_; }
  RoundNumber current_round() const { return current_; }
  const BlockTree &tree() const { return *tree_; }
  BlockId last_finalized() const { return last_finalized_; }
  std::uint64_t last_finalized_number() const { return last_finalized_number_; }
  bool is_finalized(BlockId b) const { return finalized_ids_.count(b) != 0; }

  struct LogEntry {
    Finalization what;
    Tick at = 0;
  };
  const std::vector<LogEntry> &finalized_log() const { return log_; }

  bool has_round(RoundNumber r) const { return rounds_.count(r) != 0; }
  const RoundState &round(RoundNumber r) const { return rounds_.at(r); }
  RoundState &round_mutable(RoundNumber r) { return rounds_.at(r); }

  // --- ingestion -----------------------------------------------------

  enum class Ingest { Recorded, Duplicate, HorizonDropped };

  /// Routes an authenticated vote to its round's vote set. Votes for
  /// rounds more than `round_horizon` ahead are dropped (anti-spam).
  Ingest handle_vote(const Vote &vote);

  /// Validates and ingests a commit message. Returns false (dropped) for
  /// invalid commits. Finalisation happens on the next poll, once this
  /// participant is past the precommit step of msg.round.
  bool on_commit(const CommitMessage &msg);

  void on_primary_broadcast(RoundNumber round, BlockId block, VoterId from);

  // --- driver ---------------------------------------------------------

  /// Advances every enabled transition at time `now`: casting votes,
  /// starting rounds, finalising, emitting due commits. Idempotent when
  /// nothing is enabled.
  std::vector<Action> poll(Tick now);

  // --- protocol predicates (driver building blocks, unit-testable) ----

  /// E_{r}; genesis for round 0 by convention.
  BlockId estimate_of(RoundNumber r) const;
  bool round_completable(RoundNumber r) const;

  /// Round r can start when round r-1 is completable and this voter has
  /// cast both votes in every round it was a voter for (round 0 counts
  /// as completable).
  bool can_start_round(RoundNumber r) const;

  /// The primary's round-start duty: broadcast E_{r-1} unless it is
  /// already finalised. Throws NotPrimaryError for anyone else.
  std::optional<BlockId> primary_action(RoundNumber r) const;

  bool should_prevote(RoundNumber r, Tick now) const;
  /// Head of the best chain containing E_{r-1}, or containing the
  /// primary's block B when g(V_{r-1}) >= B > E_{r-1}.
  BlockId prevote_target(RoundNumber r) const;

  bool should_precommit(RoundNumber r, Tick now) const;
  BlockId precommit_target(RoundNumber r) const;

  /// Past the precommit step: own precommit cast (voters), or the local
  /// precommit timing condition met (non-voters); trivially true for
  /// rounds already left behind.
  bool past_precommit_step(RoundNumber r, Tick now) const;

  /// Finalises B = g(C_r) and its unfinalised ancestors when B is later
  /// than the last finalised block and V_r has a supermajority for it.
  /// No-op otherwise. Returns newly finalised blocks, ascending.
  std::vector<Finalization> try_finalize(RoundNumber r, Tick now);

 private:
  RoundState &ensure_round(RoundNumber r);
  std::vector<Finalization> finalize_chain(BlockId top, RoundNumber r,
                                           Tick now);
  void maybe_schedule_commit(RoundNumber r, BlockId block, Tick now,
                             std::vector<Action> &actions);
  std::optional<CommitMessage> build_commit(RoundNumber r, BlockId block) const;
  bool commit_suppressed(BlockId block) const;
  void note_valid_commit(BlockId target);

  VoterId id_;
  std::shared_ptr<const VoterSet> voters_;
  std::shared_ptr<BlockTree> tree_;
  EngineConfig config_;
  BestChainFn best_chain_;
  PrimaryFn primary_;
  BackoffFn backoff_;
  PrecommitOverrideFn precommit_override_;

  RoundNumber current_ = 0;
  std::map<RoundNumber, RoundState> rounds_;

  BlockId last_finalized_;
  std::uint64_t last_finalized_number_ = 0;
  std::set<BlockId> finalized_ids_;
  std::vector<LogEntry> log_;

  struct PendingCommit {
    CommitMessage msg;
    Tick due = 0;
  };
  std::vector<PendingCommit> pending_commits_;
  std::vector<CommitMessage> deferred_commits_;  // valid, awaiting step
  std::vector<std::pair<BlockId, RoundNumber>> seen_valid_commits_;
  std::set<RoundNumber> dirty_rounds_;
};

}  // namespace grandpa
