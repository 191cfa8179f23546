/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include "grandpa/vote_math.hpp"

#include <algorithm>

namespace grandpa {

namespace {

constexpr std::uint64_t kAuthDomain = 0x617574682d746167ULL;

std::uint64_t voter_secret(VoterId v) {
  return splitmix64(kAuthDomain ^ (static_cast<std::uint64_t>(v.index) + 7));
}

std::uint64_t auth_tag(RoundNumber round, VoteKind kind, BlockId target,
                       VoterId voter) {
  std::uint64_t h = voter_secret(voter);
  h = mix64(h, round);
  h = mix64(h, static_cast<std::uint64_t>(kind));
  h = mix64(h, target.value);
  return h;
}

}  // namespace

const char *to_string(VoteKind kind) {
  return kind == VoteKind::Prevote ? "prevote" : "precommit";
}

VoterSet::VoterSet(std::size_t n) : VoterSet(n, n == 0 ? 0 : (n - 1) / 3) {}

VoterSet::VoterSet(std::size_t n, std::size_t f) : f_(f) {
  if (n == 0) {
    throw ConfigError("voter set must not be empty");
  }
  if (3 * f >= n) {
    throw ConfigError("fault bound must satisfy f < n/3");
  }
  voters_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    voters_.push_back(VoterId{static_cast<std::uint32_t>(i)});
  }
  threshold_ = (n + f + 2) / 2;  // ceil((n+f+1)/2)
}

Vote make_vote(RoundNumber round, VoteKind kind, BlockId target,
               VoterId voter) {
  return Vote{round, kind, target, voter, auth_tag(round, kind, target, voter)};
}

bool vote_auth_ok(const Vote &vote) {
  return vote.auth == auth_tag(vote.round, vote.kind, vote.target, vote.voter);
}

VoteSet::VoteSet(std::shared_ptr<const VoterSet> voters, VoteKind kind,
                 RoundNumber round)
    : voters_(std::move(voters)),
      kind_(kind),
      round_(round),
      records_(voters_->n()) {}

RecordOutcome VoteSet::record(const Vote &vote) {
  if (vote.kind != kind_) {
    throw KindMismatchError{};
  }
  if (vote.round != round_) {
    throw RoundMismatchError{};
  }
  if (!vote_auth_ok(vote)) {
    throw BadAuthError{};
  }
  if (!voters_->contains(vote.voter)) {
    throw UnknownVoterError(vote.voter);
  }

  auto &rec = records_[vote.voter.index];
  for (const Vote &seen : rec) {
    if (seen.target == vote.target) {
      return RecordOutcome::Duplicate;
    }
  }
  rec.push_back(vote);
  if (rec.size() == 1) {
    ++participants_;
    return RecordOutcome::Fresh;
  }
  if (rec.size() == 2) {
    ++equivocators_;
  }
  return RecordOutcome::NewEquivocation;
}

const std::vector<Vote> &VoteSet::votes_of(VoterId v) const {
  if (!voters_->contains(v)) {
    throw UnknownVoterError(v);
  }
  return records_[v.index];
}

std::vector<BlockId> VoteSet::targets() const {
  std::vector<BlockId> out;
  for (const auto &rec : records_) {
    for (const Vote &vote : rec) {
      out.push_back(vote.target);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Vote> VoteSet::all_votes() const {
  std::vector<Vote> out;
  for (const auto &rec : records_) {
    out.insert(out.end(), rec.begin(), rec.end());
  }
  return out;
}

void VoteSet::merge(const VoteSet &other) {
  if (other.kind_ != kind_) {
    throw KindMismatchError{};
  }
  if (other.round_ != round_) {
    throw RoundMismatchError{};
  }
  for (const auto &rec : other.records_) {
    for (const Vote &vote : rec) {
      record(vote);
    }
  }
}

SupermajorityVerdict supermajority(const VoteSet &set, const BlockTree &tree,
                                   BlockId b) {
  if (!tree.contains(b)) {
    throw UnknownBlockError(b);
  }
  const VoterSet &voters = set.voter_set();
  SupermajorityVerdict verdict;
  for (VoterId v : voters.voters()) {
    const auto &rec = set.votes_of(v);
    if (rec.empty()) {
      continue;
    }
    if (rec.size() >= 2) {
      ++verdict.weight_for;
      ++verdict.weight_against;
      continue;
    }
    if (tree.is_descendant_or_equal(rec.front().target, b)) {
      ++verdict.weight_for;
    } else {
      ++verdict.weight_against;
    }
  }
  verdict.has = verdict.weight_for >= voters.threshold();
  verdict.impossible = verdict.weight_against >= voters.threshold();
  return verdict;
}

namespace {

/// Descends from `start` through children with a supermajority, smallest
/// BlockId first. `start` must itself have a supermajority.
BlockId descend(const VoteSet &set, const BlockTree &tree, BlockId start) {
  BlockId cur = start;
  for (;;) {
    BlockId next = cur;
    for (BlockId child : tree.children_of(cur)) {  // ascending by id
      if (supermajority(set, tree, child).has) {
        next = child;
        break;
      }
    }
    if (next == cur) {
      return cur;
    }
    cur = next;
  }
}

}  // namespace

std::optional<BlockId> ghost(const VoteSet &set, const BlockTree &tree) {
  if (tree.empty()) {
    return std::nullopt;
  }
  const BlockId root = tree.genesis();
  if (!supermajority(set, tree, root).has) {
    return std::nullopt;
  }
  return descend(set, tree, root);
}

std::optional<BlockId> ghost_with_hint(const VoteSet &set,
                                       const BlockTree &tree,
                                       std::optional<BlockId> hint) {
  // The shortcut is exact only for safe sets, where the descent path is
  // unique at every level and previously established supermajorities
  // persist as the set grows.
  if (!set.is_safe() || !hint || !tree.contains(*hint) ||
      !supermajority(set, tree, *hint).has) {
    return ghost(set, tree);
  }
  return descend(set, tree, *hint);
}

bool impossible_any_child(const VoteSet &set, const BlockTree &tree,
                          BlockId b) {
  if (!tree.contains(b)) {
    throw UnknownBlockError(b);
  }
  if (set.participant_count() < 2 * set.voter_set().f() + 1) {
    return false;
  }
  const auto heads = set.targets();
  for (BlockId child : tree.children_on_vote_chains(b, heads)) {
    if (!supermajority(set, tree, child).impossible) {
      return false;
    }
  }
  return true;
}

std::optional<VoteSet> possible_witness(const VoteSet &set,
                                        const BlockTree &tree, BlockId b) {
  if (!set.is_safe()) {
    throw UnsafeInputError{};
  }
  if (supermajority(set, tree, b).impossible) {
    return std::nullopt;
  }

  const VoterSet &voters = set.voter_set();
  VoteSet witness = set;
  for (VoterId v : voters.voters()) {
    if (witness.votes_of(v).empty()) {
      witness.record(make_vote(set.round(), set.kind(), b, v));
    }
  }
  for (VoterId v : voters.voters()) {
    if (supermajority(witness, tree, b).has) {
      break;
    }
    if (witness.equivocator_count() >= voters.f()) {
      break;  // f cap reached; no safe completion from here
    }
    const auto &rec = witness.votes_of(v);
    if (rec.size() == 1 && !tree.is_descendant_or_equal(rec.front().target, b)) {
      witness.record(make_vote(set.round(), set.kind(), b, v));
    }
  }

  if (!supermajority(witness, tree, b).has || !witness.is_safe()) {
    return std::nullopt;
  }
  return witness;
}

}  // namespace grandpa
