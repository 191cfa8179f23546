/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "grandpa/block_tree.hpp"
#include "grandpa/rng.hpp"
#include "grandpa/vote_math.hpp"

// Test-only oracles. Everything here recomputes protocol arithmetic from
// first principles (parent-pointer walks, direct counting) so the checks
// stay independent of the library's descent/lifting implementations.

namespace grandpa::testing {

/// Fixture tree used throughout: G <- A1 <- A2 and G <- B1 (<- B2 when
/// with_b2). Ids are fixed so expectations are stable.
struct FixtureTree {
  BlockTree tree;
  BlockId g{kGenesisId};
  BlockId a1{0x0a10};
  BlockId a2{0x0a20};
  BlockId a3{0x0a30};
  BlockId b1{0x0b10};
  BlockId b2{0x0b20};

  explicit FixtureTree(bool with_b2 = false, bool with_a3 = false) {
    tree.insert(make_genesis());
    tree.insert(Block{a1, g, 1});
    tree.insert(Block{a2, a1, 2});
    tree.insert(Block{b1, g, 1});
    if (with_b2) {
      tree.insert(Block{b2, b1, 2});
    }
    if (with_a3) {
      tree.insert(Block{a3, a2, 3});
    }
  }
};

/// Ancestor-path membership by a plain parent walk.
inline bool oracle_descends(const BlockTree &tree, BlockId b, BlockId a) {
  std::optional<BlockId> cur = b;
  while (cur) {
    if (*cur == a) {
      return true;
    }
    cur = tree.block_of(*cur).parent;
  }
  return false;
}

/// Independent threshold arithmetic: smallest integer >= (n+f+1)/2.
inline std::size_t oracle_threshold(std::size_t n, std::size_t f) {
  const std::size_t num = n + f + 1;
  return num % 2 == 0 ? num / 2 : num / 2 + 1;
}

struct OracleTally {
  std::size_t weight_for = 0;
  std::size_t weight_against = 0;
};

/// Direct per-voter counting over the raw records.
inline OracleTally oracle_tally(const VoteSet &set, const BlockTree &tree,
                                BlockId b) {
  OracleTally t;
  for (VoterId v : set.voter_set().voters()) {
    const auto &rec = set.votes_of(v);
    if (rec.empty()) {
      continue;
    }
    bool any_for = false;
    for (const Vote &vote : rec) {
      if (oracle_descends(tree, vote.target, b)) {
        any_for = true;
      }
    }
    const bool equivocated = rec.size() >= 2;
    if (any_for || equivocated) {
      ++t.weight_for;
    }
    if (!any_for || equivocated) {
      ++t.weight_against;
    }
  }
  return t;
}

inline bool oracle_has(const VoteSet &set, const BlockTree &tree, BlockId b) {
  return oracle_tally(set, tree, b).weight_for >=
         oracle_threshold(set.voter_set().n(), set.voter_set().f());
}

inline bool oracle_impossible(const VoteSet &set, const BlockTree &tree,
                              BlockId b) {
  return oracle_tally(set, tree, b).weight_against >=
         oracle_threshold(set.voter_set().n(), set.voter_set().f());
}

/// Brute-force g(S). For safe sets this is the global argmax over all
/// blocks with a supermajority (which the uniqueness lemma says is a
/// single block at its height). For unsafe sets multiple maxima can exist
/// and the pinned semantics is the smallest-id-child descent, so the
/// oracle replays that rule over brute-force-computed supermajorities.
inline std::optional<BlockId> oracle_ghost(const VoteSet &set,
                                           const BlockTree &tree) {
  std::set<BlockId> with_super;
  for (BlockId id : tree.all_ids()) {
    if (oracle_has(set, tree, id)) {
      with_super.insert(id);
    }
  }
  if (with_super.empty() || with_super.count(tree.genesis()) == 0) {
    return std::nullopt;
  }
  if (set.is_safe()) {
    BlockId best = tree.genesis();
    for (BlockId id : with_super) {
      if (tree.number_of(id) > tree.number_of(best)) {
        best = id;
      }
    }
    return best;
  }
  BlockId cur = tree.genesis();
  for (;;) {
    std::optional<BlockId> next;
    for (BlockId child : tree.children_of(cur)) {
      if (with_super.count(child) != 0) {
        next = child;
        break;  // children_of is ascending by id
      }
    }
    if (!next) {
      return cur;
    }
    cur = *next;
  }
}

/// For safe sets: asserts the argmax height is achieved by exactly one
/// block. Returns false on a tie (a lemma violation).
inline bool oracle_unique_max(const VoteSet &set, const BlockTree &tree) {
  std::vector<BlockId> with_super;
  for (BlockId id : tree.all_ids()) {
    if (oracle_has(set, tree, id)) {
      with_super.push_back(id);
    }
  }
  if (with_super.empty()) {
    return true;
  }
  std::uint64_t max_n = 0;
  for (BlockId id : with_super) {
    max_n = std::max(max_n, tree.number_of(id));
  }
  std::size_t at_max = 0;
  for (BlockId id : with_super) {
    if (tree.number_of(id) == max_n) {
      ++at_max;
    }
  }
  return at_max == 1;
}

/// Random tree with ids assigned from the rng; max_depth limits chains.
inline BlockTree random_tree(DetRng &rng, std::size_t max_blocks,
                             std::uint64_t max_depth) {
  BlockTree tree;
  tree.insert(make_genesis());
  std::vector<BlockId> pool{tree.genesis()};
  while (tree.size() < max_blocks) {
    const BlockId parent =
        pool[static_cast<std::size_t>(rng.uniform(0, pool.size() - 1))];
    if (tree.number_of(parent) >= max_depth) {
      continue;
    }
    const BlockId id{rng.next_u64() | 1};  // avoid colliding with genesis
    if (tree.contains(id)) {
      continue;
    }
    tree.insert(Block{id, parent, tree.number_of(parent) + 1});
    pool.push_back(id);
  }
  return tree;
}

/// Random vote set over the tree. `equivocation_level` scales how many
/// voters double-vote; with level 2 the set is frequently unsafe.
inline VoteSet random_vote_set(DetRng &rng,
                               const std::shared_ptr<const VoterSet> &voters,
                               const BlockTree &tree, VoteKind kind,
                               RoundNumber round, int equivocation_level = 1) {
  VoteSet set(voters, kind, round);
  const auto ids = tree.all_ids();
  auto pick_block = [&] {
    return ids[static_cast<std::size_t>(rng.uniform(0, ids.size() - 1))];
  };
  for (VoterId v : voters->voters()) {
    const auto roll = rng.uniform(0, 9);
    if (roll < 2) {
      continue;  // abstain
    }
    set.record(make_vote(round, kind, pick_block(), v));
    const int extra = equivocation_level == 0
                          ? 0
                          : static_cast<int>(rng.uniform(0, 9)) <
                                    2 * equivocation_level
                                ? static_cast<int>(rng.uniform(1, 2))
                                : 0;
    for (int i = 0; i < extra; ++i) {
      set.record(make_vote(round, kind, pick_block(), v));
    }
  }
  return set;
}

/// Subset of `set`: each recorded vote kept with probability keep/10.
inline VoteSet random_subset(DetRng &rng, const VoteSet &set, int keep) {
  VoteSet out(set.voter_set_ptr(), set.kind(), set.round());
  for (const Vote &vote : set.all_votes()) {
    if (rng.uniform(0, 9) < keep) {
      out.record(vote);
    }
  }
  return out;
}

}  // namespace grandpa::testing
