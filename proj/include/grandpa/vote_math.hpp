/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "grandpa/block_tree.hpp"
#include "grandpa/ids.hpp"

namespace grandpa {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownVoterError : std::runtime_error {
  explicit UnknownVoterError(VoterId v)
      : std::runtime_error("unknown voter " + to_string(v)) {}
};

struct BadAuthError : std::runtime_error {
  BadAuthError() : std::runtime_error("vote authentication failed") {}
};

struct KindMismatchError : std::runtime_error {
  KindMismatchError() : std::runtime_error("vote kind mismatch") {}
};

struct RoundMismatchError : std::runtime_error {
  RoundMismatchError() : std::runtime_error("vote round mismatch") {}
};

struct UnsafeInputError : std::runtime_error {
  UnsafeInputError() : std::runtime_error("vote set is not safe") {}
};

enum class VoteKind : std::uint8_t { Prevote = 0, Precommit = 1 };

const char *to_string(VoteKind kind);

/// Fixed voter set with fault bound f and the derived supermajority
/// threshold ceil((n+f+1)/2); with n = 3f+1 this is 2f+1.
class VoterSet {
 public:
  /// f defaults to floor((n-1)/3).
  explicit VoterSet(std::size_t n);
  VoterSet(std::size_t n, std::size_t f);  // requires 3f < n

  std::size_t n() const { return voters_.size(); }
  std::size_t f() const { return f_; }
  std::size_t threshold() const { return threshold_; }
  const std::vector<VoterId> &voters() const { return voters_; }
  bool contains(VoterId v) const { return v.index < voters_.size(); }

 private:
  std::vector<VoterId> voters_;  // dense 0..n-1
  std::size_t f_;
  std::size_t threshold_;
};

/// A signed vote. `auth` is the simulated signature binding
/// (round, kind, target, voter); forging another voter's tag never happens
/// in simulation, matching the authenticated-channel assumption.
struct Vote {
  RoundNumber round = 0;
  VoteKind kind = VoteKind::Prevote;
  BlockId target;
  VoterId voter;
  std::uint64_t auth = 0;

  bool operator==(const Vote &) const = default;
};

Vote make_vote(RoundNumber round, VoteKind kind, BlockId target, VoterId voter);
bool vote_auth_ok(const Vote &vote);

enum class RecordOutcome { Fresh, Duplicate, NewEquivocation };

struct SupermajorityVerdict {
  std::size_t weight_for = 0;      // voters voting >= B, plus equivocators
  std::size_t weight_against = 0;  // voters voting only !>= B, plus equivocators
  bool has = false;                // weight_for >= threshold
  bool impossible = false;         // weight_against >= threshold
};

/// Per-(round, kind) record of votes with equivocation tracking.
/// A voter's record only ever grows: NoVote -> Voted -> Equivocated, and
/// equivocated records retain every distinct target seen (the vote pairs
/// are the slashable evidence).
///
/// Value semantics; operations are pure functions of (set, tree).
class VoteSet {
 public:
  VoteSet(std::shared_ptr<const VoterSet> voters, VoteKind kind,
          RoundNumber round);

  VoteKind kind() const { return kind_; }
  RoundNumber round() const { return round_; }
  const VoterSet &voter_set() const { return *voters_; }
  std::shared_ptr<const VoterSet> voter_set_ptr() const { return voters_; }

  RecordOutcome record(const Vote &vote);

  /// Votes recorded for one voter, distinct by target, in arrival order.
  const std::vector<Vote> &votes_of(VoterId v) const;

  std::size_t participant_count() const { return participants_; }
  std::size_t equivocator_count() const { return equivocators_; }
  bool is_safe() const { return equivocators_ <= voters_->f(); }
  bool is_safe(std::size_t f) const { return equivocators_ <= f; }

  /// All distinct targets recorded in the set, ascending.
  std::vector<BlockId> targets() const;
  /// Every recorded vote (including all sides of equivocations).
  std::vector<Vote> all_votes() const;

  /// Union with `other` (same kind and round). Equivocations may emerge
  /// from the merge; that is the point for forensic evidence.
  void merge(const VoteSet &other);

  bool operator==(const VoteSet &) const = default;

 private:
  std::shared_ptr<const VoterSet> voters_;
  VoteKind kind_;
  RoundNumber round_;
  std::vector<std::vector<Vote>> records_;  // by voter index
  std::size_t participants_ = 0;
  std::size_t equivocators_ = 0;
};

/// Counts support for b: a voter is "for" if any of its targets descends
/// from b (or it equivocates), "against" if it voted and none do (or it
/// equivocates). Equivocators count on both sides — equivocations are
/// votes for everything, which keeps both verdict bits monotone under
/// observation of more votes.
SupermajorityVerdict supermajority(const VoteSet &set, const BlockTree &tree,
                                   BlockId b);

/// 2/3-GHOST g(S): the deepest block with a supermajority, found by
/// descending from genesis through children with a supermajority, taking
/// the smallest-BlockId child when several qualify (only possible for
/// unsafe sets; the choice makes runs reproducible). nullopt if even
/// genesis lacks a supermajority.
std::optional<BlockId> ghost(const VoteSet &set, const BlockTree &tree);

/// Same result as ghost() when `hint` is a block whose supermajority is
/// already established and the set grew monotonically since (the
/// incremental update: only the descent below the hint is re-examined).
/// Falls back to the full descent for unsafe sets or a stale hint.
std::optional<BlockId> ghost_with_hint(const VoteSet &set,
                                       const BlockTree &tree,
                                       std::optional<BlockId> hint);

/// True iff the set has votes from at least 2f+1 voters and a
/// supermajority is impossible for every child of b lying on the chain of
/// any vote in the set (vacuously true when there is no such child).
bool impossible_any_child(const VoteSet &set, const BlockTree &tree,
                          BlockId b);

/// Constructive possibility witness: a safe superset of `set` with a
/// supermajority for b, built by voting b with every absent voter and then
/// converting voters with contrary votes into equivocators up to the f
/// cap. Returns nullopt when a supermajority is impossible — and, for
/// voter sets where n+f+1 is odd, in the boundary case where the f cap is
/// too tight for any safe completion to exist (with n = 3f+1 the two
/// conditions coincide). Used as the test oracle for the
/// possibility <-> witness equivalence.
std::optional<VoteSet> possible_witness(const VoteSet &set,
                                        const BlockTree &tree, BlockId b);

}  // namespace grandpa
