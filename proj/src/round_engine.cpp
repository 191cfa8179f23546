/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include "grandpa/round_engine.hpp"

#include <algorithm>
#include <cassert>

namespace grandpa {

bool validate_commit(const CommitMessage &msg,
                     const std::shared_ptr<const VoterSet> &voters,
                     const BlockTree &tree) {
  if (msg.precommits.empty() || !tree.contains(msg.target)) {
    return false;
  }
  VoteSet set(voters, VoteKind::Precommit, msg.round);
  for (const Vote &vote : msg.precommits) {
    if (vote.kind != VoteKind::Precommit || vote.round != msg.round) {
      return false;
    }
    if (!vote_auth_ok(vote) || !voters->contains(vote.voter)) {
      return false;
    }
    if (!tree.contains(vote.target) ||
        !tree.is_descendant_or_equal(vote.target, msg.target)) {
      return false;
    }
    set.record(vote);
  }
  return supermajority(set, tree, msg.target).has;
}

RoundState::RoundState(std::shared_ptr<const VoterSet> voters,
                       RoundNumber round, VoterId primary)
    : round_(round),
      primary_(primary),
      prevotes_(voters, VoteKind::Prevote, round),
      precommits_(std::move(voters), VoteKind::Precommit, round) {}

std::optional<BlockId> RoundState::ghost_prevotes(const BlockTree &tree) const {
  gv_hint_ = ghost_with_hint(prevotes_, tree, gv_hint_);
  return gv_hint_;
}

std::optional<BlockId> RoundState::ghost_precommits(
    const BlockTree &tree) const {
  gc_hint_ = ghost_with_hint(precommits_, tree, gc_hint_);
  return gc_hint_;
}

BlockId RoundState::estimate(const BlockTree &tree) const {
  const auto gv = ghost_prevotes(tree);
  if (!gv) {
    throw NoGhostError{};
  }
  auto possible = tree.walk_back(*gv, [&](BlockId b) {
    return !supermajority(precommits_, tree, b).impossible;
  });
  // With a safe precommit set genesis is always possible, so the walk
  // terminates there at the latest. Degenerate unsafe sets (>= threshold
  // equivocators) can make even genesis impossible; clamp to genesis so
  // the engine stays total under attack.
  return possible.value_or(tree.genesis());
}

bool RoundState::completable(const BlockTree &tree) const {
  const auto gv = ghost_prevotes(tree);
  if (!gv) {
    return false;
  }
  if (estimate(tree) != *gv) {
    return true;  // E_r < g(V_r)
  }
  return impossible_any_child(precommits_, tree, *gv);
}

VoterState::VoterState(VoterId id, std::shared_ptr<const VoterSet> voters,
                       std::shared_ptr<BlockTree> tree, EngineConfig config,
                       BestChainFn best_chain, PrimaryFn primary,
                       BackoffFn backoff)
    : id_(id),
      voters_(std::move(voters)),
      tree_(std::move(tree)),
      config_(config),
      best_chain_(std::move(best_chain)),
      primary_(std::move(primary)),
      backoff_(std::move(backoff)) {
  last_finalized_ = tree_->genesis();
  last_finalized_number_ = 0;
  finalized_ids_.insert(last_finalized_);
}

RoundState &VoterState::ensure_round(RoundNumber r) {
  auto it = rounds_.find(r);
  if (it == rounds_.end()) {
    it = rounds_.emplace(r, RoundState(voters_, r, primary_(r))).first;
  }
  return it->second;
}

VoterState::Ingest VoterState::handle_vote(const Vote &vote) {
  if (!vote_auth_ok(vote)) {
    throw BadAuthError{};
  }
  if (!voters_->contains(vote.voter)) {
    throw UnknownVoterError(vote.voter);
  }
  if (vote.round > current_ + config_.round_horizon) {
    return Ingest::HorizonDropped;
  }
  RoundState &rs = ensure_round(vote.round);
  auto &set =
      vote.kind == VoteKind::Prevote ? rs.prevotes() : rs.precommits();
  const auto outcome = set.record(vote);
  dirty_rounds_.insert(vote.round);
  return outcome == RecordOutcome::Duplicate ? Ingest::Duplicate
                                             : Ingest::Recorded;
}

void VoterState::note_valid_commit(BlockId target) {
  // Cancel own pending commits covered by this one (it or a descendant).
  std::erase_if(pending_commits_, [&](const PendingCommit &p) {
    return tree_->is_descendant_or_equal(target, p.msg.target);
  });
}

bool VoterState::on_commit(const CommitMessage &msg) {
  if (!validate_commit(msg, voters_, *tree_)) {
    return false;
  }
  seen_valid_commits_.emplace_back(msg.target, msg.round);
  note_valid_commit(msg.target);
  if (msg.round <= current_ + config_.round_horizon) {
    RoundState &rs = ensure_round(msg.round);
    for (const Vote &vote : msg.precommits) {
      rs.precommits().record(vote);
    }
    dirty_rounds_.insert(msg.round);
    deferred_commits_.push_back(msg);
  }
  return true;
}

void VoterState::on_primary_broadcast(RoundNumber round, BlockId block,
                                      VoterId from) {
  if (round > current_ + config_.round_horizon) {
    return;
  }
  if (from != primary_(round)) {
    return;
  }
  RoundState &rs = ensure_round(round);
  if (!rs.primary_block) {
    rs.primary_block = block;  // first received wins
  }
}

BlockId VoterState::estimate_of(RoundNumber r) const {
  if (r == 0) {
    return tree_->genesis();
  }
  return rounds_.at(r).estimate(*tree_);
}

bool VoterState::round_completable(RoundNumber r) const {
  if (r == 0) {
    return true;
  }
  auto it = rounds_.find(r);
  return it != rounds_.end() && it->second.completable(*tree_);
}

bool VoterState::can_start_round(RoundNumber r) const {
  if (r != current_ + 1) {
    return false;
  }
  if (!round_completable(r - 1)) {
    return false;
  }
  if (config_.is_voter && r - 1 > 0) {
    const RoundState &prev = rounds_.at(r - 1);
    if (!prev.own_prevote || !prev.own_precommit) {
      return false;
    }
  }
  return true;
}

std::optional<BlockId> VoterState::primary_action(RoundNumber r) const {
  if (primary_(r) != id_) {
    throw NotPrimaryError{};
  }
  const BlockId e = estimate_of(r - 1);
  if (is_finalized(e)) {
    return std::nullopt;  // may broadcast anyway, but does not need to
  }
  return e;
}

bool VoterState::should_prevote(RoundNumber r, Tick now) const {
  const RoundState &rs = rounds_.at(r);
  if (!rs.start_time) {
    return false;
  }
  return now >= *rs.start_time + 2 * config_.net_bound ||
         round_completable(r);
}

BlockId VoterState::prevote_target(RoundNumber r) const {
  const RoundState &rs = rounds_.at(r);
  if (rs.own_prevote) {
    throw AlreadyVotedError{};
  }
  const BlockId prev_estimate = estimate_of(r - 1);
  BlockId base = prev_estimate;
  if (rs.primary_block && tree_->contains(*rs.primary_block) && r >= 1) {
    const BlockId b = *rs.primary_block;
    const auto gv_prev =
        r == 1 ? std::optional<BlockId>{}
               : (rounds_.count(r - 1)
                      ? rounds_.at(r - 1).ghost_prevotes(*tree_)
                      : std::optional<BlockId>{});
    if (gv_prev && tree_->is_descendant_or_equal(*gv_prev, b) &&
        tree_->strictly_descends(b, prev_estimate)) {
      base = b;
    }
  }
  return best_chain_(base);
}

bool VoterState::should_precommit(RoundNumber r, Tick now) const {
  const RoundState &rs = rounds_.at(r);
  if (!rs.start_time) {
    return false;
  }
  const auto gv = rs.ghost_prevotes(*tree_);
  if (!gv) {
    return false;
  }
  if (!tree_->is_descendant_or_equal(*gv, estimate_of(r - 1))) {
    return false;
  }
  if (now >= *rs.start_time + 4 * config_.net_bound) {
    return true;  // (i)
  }
  if (round_completable(r)) {
    return true;  // (ii)
  }
  return config_.precommit_rule_iii &&
         impossible_any_child(rs.prevotes(), *tree_, *gv);  // (iii), optional
}

BlockId VoterState::precommit_target(RoundNumber r) const {
  const RoundState &rs = rounds_.at(r);
  if (rs.own_precommit) {
    throw AlreadyVotedError{};
  }
  const auto gv = rs.ghost_prevotes(*tree_);
  if (!gv) {
    throw NoGhostError{};
  }
  if (precommit_override_) {
    return precommit_override_(r, *gv);
  }
  return *gv;
}

bool VoterState::past_precommit_step(RoundNumber r, Tick now) const {
  if (r == 0 || r < current_) {
    return true;
  }
  if (r > current_) {
    return false;
  }
  const RoundState &rs = rounds_.at(r);
  if (config_.is_voter) {
    return rs.own_precommit.has_value();
  }
  if (!rs.start_time) {
    return false;
  }
  return now >= *rs.start_time + 4 * config_.net_bound ||
         round_completable(r);
}

std::vector<Finalization> VoterState::finalize_chain(BlockId top,
                                                     RoundNumber r, Tick now) {
  std::vector<BlockId> path;
  std::optional<BlockId> cur = top;
  while (cur && finalized_ids_.count(*cur) == 0) {
    path.push_back(*cur);
    cur = tree_->block_of(*cur).parent;
  }
  std::reverse(path.begin(), path.end());
  std::vector<Finalization> out;
  for (BlockId b : path) {
    finalized_ids_.insert(b);
    Finalization fin{b, tree_->number_of(b), r};
    log_.push_back({fin, now});
    out.push_back(fin);
  }
  if (tree_->number_of(top) > last_finalized_number_) {
    last_finalized_ = top;
    last_finalized_number_ = tree_->number_of(top);
  }
  return out;
}

std::vector<Finalization> VoterState::try_finalize(RoundNumber r, Tick now) {
  if (!past_precommit_step(r, now)) {
    return {};
  }
  auto it = rounds_.find(r);
  if (it == rounds_.end()) {
    return {};
  }
  const RoundState &rs = it->second;
  const auto gc = rs.ghost_precommits(*tree_);
  if (!gc) {
    return {};
  }
  if (tree_->number_of(*gc) <= last_finalized_number_) {
    return {};
  }
  if (!supermajority(rs.prevotes(), *tree_, *gc).has) {
    return {};
  }
  return finalize_chain(*gc, r, now);
}

std::optional<CommitMessage> VoterState::build_commit(RoundNumber r,
                                                      BlockId block) const {
  auto it = rounds_.find(r);
  if (it == rounds_.end()) {
    return std::nullopt;
  }
  CommitMessage msg;
  msg.round = r;
  msg.target = block;
  for (VoterId v : voters_->voters()) {
    for (const Vote &vote : it->second.precommits().votes_of(v)) {
      if (tree_->is_descendant_or_equal(vote.target, block)) {
        msg.precommits.push_back(vote);
      }
    }
  }
  if (!validate_commit(msg, voters_, *tree_)) {
    // Happens only when finalisation leaned on equivocators whose targets
    // all lie off chain(block); such voters cannot appear in a commit.
    return std::nullopt;
  }
  return msg;
}

bool VoterState::commit_suppressed(BlockId block) const {
  return std::any_of(seen_valid_commits_.begin(), seen_valid_commits_.end(),
                     [&](const auto &seen) {
                       return tree_->is_descendant_or_equal(seen.first, block);
                     });
}

void VoterState::maybe_schedule_commit(RoundNumber r, BlockId block, Tick now,
                                       std::vector<Action> &actions) {
  if (commit_suppressed(block)) {
    return;
  }
  auto msg = build_commit(r, block);
  if (!msg) {
    return;
  }
  const Tick due = now + backoff_(config_.commit_backoff_max);
  pending_commits_.push_back({std::move(*msg), due});
  actions.push_back(ScheduleWake{due});
}

std::vector<Action> VoterState::poll(Tick now) {
  std::vector<Action> actions;

  bool progress = true;
  while (progress) {
    progress = false;

    if (current_ >= 1) {
      RoundState &rs = rounds_.at(current_);
      if (config_.is_voter && !rs.own_prevote &&
          should_prevote(current_, now)) {
        const BlockId target = prevote_target(current_);
        const Vote vote =
            make_vote(current_, VoteKind::Prevote, target, id_);
        rs.prevotes().record(vote);
        rs.own_prevote = target;
        dirty_rounds_.insert(current_);
        actions.push_back(CastVote{vote});
        progress = true;
      }
      if (config_.is_voter && !rs.own_precommit && rs.own_prevote &&
          should_precommit(current_, now)) {
        const BlockId target = precommit_target(current_);
        const Vote vote =
            make_vote(current_, VoteKind::Precommit, target, id_);
        rs.precommits().record(vote);
        rs.own_precommit = target;
        dirty_rounds_.insert(current_);
        actions.push_back(CastVote{vote});
        progress = true;
      }
    }

    if (can_start_round(current_ + 1)) {
      const BlockId prev_estimate = estimate_of(current_);
      current_ += 1;
      RoundState &rs = ensure_round(current_);
      rs.start_time = now;
      actions.push_back(
          StartedRound{current_, now, prev_estimate, rs.primary()});
      actions.push_back(ScheduleWake{now + 2 * config_.net_bound});
      actions.push_back(ScheduleWake{now + 4 * config_.net_bound});
      if (rs.primary() == id_) {
        if (auto broadcast = primary_action(current_)) {
          actions.push_back(PrimaryBroadcast{current_, *broadcast});
        }
      }
      dirty_rounds_.insert(current_);
      progress = true;
    }

    // Finalisation sweep over rounds touched since the last pass. New
    // finalisations can unlock commit emission but never round advance,
    // so one sweep per iteration is enough.
    while (!dirty_rounds_.empty()) {
      const RoundNumber r = *dirty_rounds_.begin();
      dirty_rounds_.erase(dirty_rounds_.begin());
      auto fins = try_finalize(r, now);
      for (const Finalization &fin : fins) {
        actions.push_back(fin);
      }
      if (!fins.empty()) {
        maybe_schedule_commit(r, fins.back().block, now, actions);
        progress = true;
      }
    }

    // Deferred commits finalise their target once this participant is
    // past the precommit step of their round.
    for (auto it = deferred_commits_.begin();
         it != deferred_commits_.end();) {
      if (!past_precommit_step(it->round, now)) {
        ++it;
        continue;
      }
      if (tree_->number_of(it->target) > last_finalized_number_) {
        for (const Finalization &fin :
             finalize_chain(it->target, it->round, now)) {
          actions.push_back(fin);
        }
        progress = true;
      }
      it = deferred_commits_.erase(it);
    }
  }

  // Emit own commits whose backoff elapsed and that were not overtaken by
  // an equivalent commit in the meantime.
  for (auto it = pending_commits_.begin(); it != pending_commits_.end();) {
    if (it->due > now) {
      ++it;
      continue;
    }
    if (!commit_suppressed(it->msg.target)) {
      seen_valid_commits_.emplace_back(it->msg.target, it->msg.round);
      actions.push_back(EmitCommit{it->msg});
    }
    it = pending_commits_.erase(it);
  }

  return actions;
}

}  // namespace grandpa
