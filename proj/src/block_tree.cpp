/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include "grandpa/block_tree.hpp"

#include <algorithm>
#include <cstdio>

namespace grandpa {

std::string to_string(BlockId id) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(id.value));
  return buf;
}

std::string to_string(VoterId v) { return "v" + std::to_string(v.index); }

BlockId derive_block_id(BlockId parent, VoterId producer, std::uint64_t slot) {
  return BlockId{mix64(mix64(parent.value, producer.index + 1), slot + 1)};
}

BlockId BlockTree::genesis() const {
  if (!genesis_) {
    throw UnknownBlockError(BlockId{});
  }
  return *genesis_;
}

const BlockTree::Node &BlockTree::node_of(BlockId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    throw UnknownBlockError(id);
  }
  return it->second;
}

const Block &BlockTree::block_of(BlockId id) const {
  return node_of(id).block;
}

const std::vector<BlockId> &BlockTree::children_of(BlockId id) const {
  return node_of(id).children;
}

void BlockTree::insert(const Block &block) {
  auto existing = nodes_.find(block.id);
  if (existing != nodes_.end()) {
    if (existing->second.block == block) {
      return;  // idempotent re-insert
    }
    throw DuplicateIdError(block.id);
  }

  Node node;
  node.block = block;
  node.best_number = block.number;
  node.best_head = block.id;

  if (!block.parent) {
    if (!nodes_.empty()) {
      throw UnknownParentError(block.id);
    }
    if (block.number != 0) {
      throw BadNumberError(block.id);
    }
    genesis_ = block.id;
    nodes_.emplace(block.id, std::move(node));
    return;
  }

  auto parent_it = nodes_.find(*block.parent);
  if (parent_it == nodes_.end()) {
    throw UnknownParentError(block.id);
  }
  if (block.number != parent_it->second.block.number + 1) {
    throw BadNumberError(block.id);
  }

  // Binary-lifting table: jumps[0] = parent, jumps[k] = 2^k-th ancestor.
  node.jumps.push_back(*block.parent);
  for (std::size_t k = 0;; ++k) {
    const Node &anc = nodes_.at(node.jumps[k]);
    if (k >= anc.jumps.size()) {
      break;
    }
    node.jumps.push_back(anc.jumps[k]);
  }

  auto &siblings = parent_it->second.children;
  siblings.insert(std::lower_bound(siblings.begin(), siblings.end(), block.id),
                  block.id);
  nodes_.emplace(block.id, std::move(node));

  // Propagate the best-descendant cache toward the root; stops as soon as
  // an ancestor already dominates the new leaf.
  BlockId cur = block.id;
  std::optional<BlockId> up = block.parent;
  while (up) {
    Node &anc = nodes_.at(*up);
    const Node &leaf = nodes_.at(block.id);
    if (leaf.best_number > anc.best_number ||
        (leaf.best_number == anc.best_number &&
         leaf.best_head < anc.best_head)) {
      anc.best_number = leaf.best_number;
      anc.best_head = leaf.best_head;
      cur = *up;
      up = anc.block.parent;
    } else {
      break;
    }
  }
  (void)cur;
}

bool BlockTree::is_descendant_or_equal(BlockId b, BlockId a) const {
  const Node &nb = node_of(b);
  const Node &na = node_of(a);
  if (na.block.number > nb.block.number) {
    return false;
  }
  return ancestor_at(b, na.block.number) == a;
}

BlockId BlockTree::ancestor_at(BlockId from, std::uint64_t number) const {
  const Node *cur = &node_of(from);
  if (number > cur->block.number) {
    throw BadNumberError(from);
  }
  std::uint64_t delta = cur->block.number - number;
  BlockId id = from;
  while (delta != 0) {
    const std::size_t k = static_cast<std::size_t>(
        63 - __builtin_clzll(static_cast<unsigned long long>(delta)));
    const std::size_t step = std::min(k, cur->jumps.size() - 1);
    id = cur->jumps[step];
    delta -= 1ULL << step;
    cur = &node_of(id);
  }
  return id;
}

bool BlockTree::same_chain(BlockId a, BlockId b) const {
  return is_descendant_or_equal(a, b) || is_descendant_or_equal(b, a);
}

BlockId BlockTree::lowest_common_ancestor(BlockId a, BlockId b) const {
  const std::uint64_t floor = std::min(number_of(a), number_of(b));
  a = ancestor_at(a, floor);
  b = ancestor_at(b, floor);
  if (a == b) {
    return a;
  }
  // Equal depth: lift both with the largest jumps that keep them apart.
  for (std::size_t k = node_of(a).jumps.size(); k-- > 0;) {
    const Node &na = node_of(a);
    const Node &nb = node_of(b);
    if (k < na.jumps.size() && na.jumps[k] != nb.jumps[k]) {
      a = na.jumps[k];
      b = nb.jumps[k];
    }
  }
  return node_of(a).jumps.front();
}

std::vector<BlockId> BlockTree::children_on_vote_chains(
    BlockId b, std::span<const BlockId> heads) const {
  std::vector<BlockId> result;
  for (BlockId child : children_of(b)) {
    for (BlockId head : heads) {
      if (is_descendant_or_equal(head, child)) {
        result.push_back(child);
        break;
      }
    }
  }
  return result;
}

std::optional<BlockId> BlockTree::walk_back(
    BlockId from, const std::function<bool(BlockId)> &stop) const {
  std::optional<BlockId> cur = from;
  node_of(from);
  while (cur) {
    if (stop(*cur)) {
      return cur;
    }
    cur = node_of(*cur).block.parent;
  }
  return std::nullopt;
}

BlockId BlockTree::best_chain_head(BlockId base) const {
  return node_of(base).best_head;
}

std::vector<BlockId> BlockTree::all_ids() const {
  std::vector<BlockId> ids;
  ids.reserve(nodes_.size());
  for (const auto &[id, node] : nodes_) {
    ids.push_back(id);
  }
  return ids;
}

}  // namespace grandpa
