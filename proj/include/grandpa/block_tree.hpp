/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "grandpa/ids.hpp"

namespace grandpa {

struct UnknownBlockError : std::runtime_error {
  explicit UnknownBlockError(BlockId id)
      : std::runtime_error("unknown block " + to_string(id)) {}
};

struct UnknownParentError : std::runtime_error {
  explicit UnknownParentError(BlockId id)
      : std::runtime_error("unknown parent for block " + to_string(id)) {}
};

struct DuplicateIdError : std::runtime_error {
  explicit DuplicateIdError(BlockId id)
      : std::runtime_error("duplicate block id " + to_string(id)) {}
};

struct BadNumberError : std::runtime_error {
  explicit BadNumberError(BlockId id)
      : std::runtime_error("bad block number for " + to_string(id)) {}
};

struct Block {
  BlockId id;
  std::optional<BlockId> parent;  // absent only for genesis
  std::uint64_t number = 0;       // n(B): distance from genesis

  bool operator==(const Block &) const = default;
};

/// Deterministic block id derived from (parent, producer, slot), so that
/// simulated runs are reproducible bit-for-bit.
BlockId derive_block_id(BlockId parent, VoterId producer, std::uint64_t slot);

constexpr BlockId kGenesisId{0x67656e6573697300ULL};

inline Block make_genesis() { return Block{kGenesisId, std::nullopt, 0}; }

/// Tree of blocks rooted at genesis. Answers all chain-order queries used
/// by vote arithmetic and the round engine.
///
/// Single-writer structure: callers serialize mutation; read-only access
/// is safe to share.
class BlockTree {
 public:
  BlockTree() = default;

  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  bool contains(BlockId id) const { return nodes_.count(id) != 0; }
  BlockId genesis() const;

  /// Inserts a block whose parent is already present (or genesis into an
  /// empty tree). Re-inserting an identical block is a no-op, so gossip
  /// re-deliveries are harmless.
  void insert(const Block &block);

  const Block &block_of(BlockId id) const;
  std::uint64_t number_of(BlockId id) const { return block_of(id).number; }

  /// Children of `id`, ascending by BlockId. The order is load-bearing:
  /// the GHOST descent uses it as its deterministic tie-break.
  const std::vector<BlockId> &children_of(BlockId id) const;

  /// "b >= a": a lies on the ancestor path of b (including b == a).
  bool is_descendant_or_equal(BlockId b, BlockId a) const;

  /// "a ~ b": a >= b or b >= a.
  bool same_chain(BlockId a, BlockId b) const;

  /// Strict "b > a".
  bool strictly_descends(BlockId b, BlockId a) const {
    return b != a && is_descendant_or_equal(b, a);
  }

  /// Children c of b such that c lies on chain(h) for some h in heads.
  std::vector<BlockId> children_on_vote_chains(
      BlockId b, std::span<const BlockId> heads) const;

  /// First block on the ancestor path from `from` toward genesis
  /// (inclusive) satisfying `stop`; nullopt if none does.
  std::optional<BlockId> walk_back(
      BlockId from, const std::function<bool(BlockId)> &stop) const;

  /// Ancestor of `from` at the given block number (requires
  /// number <= number_of(from)).
  BlockId ancestor_at(BlockId from, std::uint64_t number) const;

  BlockId lowest_common_ancestor(BlockId a, BlockId b) const;

  /// Head of the best chain containing `base`: the deepest descendant of
  /// `base` (including base itself), ties broken by smallest BlockId.
  /// This is the default voting rule's chain selection.
  BlockId best_chain_head(BlockId base) const;

  /// All block ids, ascending. Deterministic iteration for adversaries
  /// and test oracles.
  std::vector<BlockId> all_ids() const;

 private:
  struct Node {
    Block block;
    std::vector<BlockId> children;       // ascending
    std::vector<BlockId> jumps;          // binary-lifting ancestors: 1,2,4,..
    std::uint64_t best_number = 0;       // deepest descendant under this node
    BlockId best_head;                   // its head (smallest id on ties)
  };

  const Node &node_of(BlockId id) const;

  std::map<BlockId, Node> nodes_;
  std::optional<BlockId> genesis_;
};

}  // namespace grandpa
