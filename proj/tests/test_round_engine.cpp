/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>

#include "grandpa/round_engine.hpp"
#include "support.hpp"

using namespace grandpa;
using namespace grandpa::testing;

namespace {

VoterId v(std::uint32_t i) { return VoterId{i}; }

struct EngineFixture {
  FixtureTree fx;
  std::shared_ptr<const VoterSet> voters = std::make_shared<VoterSet>(4);
  std::shared_ptr<BlockTree> tree;
  std::unique_ptr<VoterState> state;

  explicit EngineFixture(VoterId self = VoterId{0}, EngineConfig cfg = {},
                         bool with_b2 = false, bool with_a3 = false)
      : fx(with_b2, with_a3) {
    tree = std::make_shared<BlockTree>(fx.tree);
    state = std::make_unique<VoterState>(
        self, voters, tree, cfg,
        [this](BlockId base) { return tree->best_chain_head(base); },
        [](RoundNumber r) { return VoterId{(std::uint32_t)((r - 1) % 4)}; },
        [](Tick) { return Tick{1}; });
  }

  void feed_prevote(RoundNumber r, BlockId target, VoterId voter) {
    state->handle_vote(make_vote(r, VoteKind::Prevote, target, voter));
  }
  void feed_precommit(RoundNumber r, BlockId target, VoterId voter) {
    state->handle_vote(make_vote(r, VoteKind::Precommit, target, voter));
  }
};

RoundState make_round(const std::shared_ptr<const VoterSet> &voters,
                      RoundNumber r = 1) {
  return RoundState(voters, r, VoterId{0});
}

}  // namespace

TEST_CASE("estimate: standing examples") {
  FixtureTree fx;
  auto voters = std::make_shared<VoterSet>(4);

  RoundState rs = make_round(voters);
  rs.prevotes().record(make_vote(1, VoteKind::Prevote, fx.a2, v(0)));
  rs.prevotes().record(make_vote(1, VoteKind::Prevote, fx.a2, v(1)));
  rs.prevotes().record(make_vote(1, VoteKind::Prevote, fx.a1, v(2)));
  rs.prevotes().record(make_vote(1, VoteKind::Prevote, fx.b1, v(3)));
  REQUIRE(rs.ghost_prevotes(fx.tree) == fx.a1);

  // empty precommits leave everything possible
  CHECK(rs.estimate(fx.tree) == fx.a1);

  // precommits spread between A1 and genesis: A1 still possible
  rs.precommits().record(make_vote(1, VoteKind::Precommit, fx.a1, v(0)));
  rs.precommits().record(make_vote(1, VoteKind::Precommit, fx.a1, v(1)));
  rs.precommits().record(make_vote(1, VoteKind::Precommit, fx.g, v(2)));
  rs.precommits().record(make_vote(1, VoteKind::Precommit, fx.g, v(3)));
  CHECK(supermajority(rs.precommits(), fx.tree, fx.a1).weight_against == 2);
  CHECK(rs.estimate(fx.tree) == fx.a1);

  // unanimous prevotes for A2 but all precommits on the B branch: the
  // walk falls back to genesis
  RoundState rs2 = make_round(voters);
  for (std::uint32_t i = 0; i < 4; ++i) {
    rs2.prevotes().record(make_vote(1, VoteKind::Prevote, fx.a2, v(i)));
  }
  for (std::uint32_t i = 0; i < 3; ++i) {
    rs2.precommits().record(make_vote(1, VoteKind::Precommit, fx.b1, v(i)));
  }
  CHECK(rs2.ghost_prevotes(fx.tree) == fx.a2);
  CHECK(rs2.estimate(fx.tree) == fx.g);

  RoundState empty = make_round(voters);
  CHECK_THROWS_AS(empty.estimate(fx.tree), NoGhostError);
}

TEST_CASE("completability: standing examples") {
  FixtureTree fx;
  auto voters = std::make_shared<VoterSet>(4);

  // E = g(V) = A1 and only two precommits: participation gate fails.
  RoundState rs = make_round(voters);
  rs.prevotes().record(make_vote(1, VoteKind::Prevote, fx.a2, v(0)));
  rs.prevotes().record(make_vote(1, VoteKind::Prevote, fx.a2, v(1)));
  rs.prevotes().record(make_vote(1, VoteKind::Prevote, fx.a1, v(2)));
  rs.prevotes().record(make_vote(1, VoteKind::Prevote, fx.b1, v(3)));
  rs.precommits().record(make_vote(1, VoteKind::Precommit, fx.a1, v(0)));
  rs.precommits().record(make_vote(1, VoteKind::Precommit, fx.a1, v(1)));
  CHECK(rs.estimate(fx.tree) == fx.a1);
  CHECK_FALSE(rs.completable(fx.tree));

  // Four precommits, none on a chain through a child of A1: completable.
  rs.precommits().record(make_vote(1, VoteKind::Precommit, fx.g, v(2)));
  rs.precommits().record(make_vote(1, VoteKind::Precommit, fx.g, v(3)));
  CHECK(rs.completable(fx.tree));

  // E < g(V) completes the round regardless of the child rule.
  RoundState rs2 = make_round(voters);
  for (std::uint32_t i = 0; i < 4; ++i) {
    rs2.prevotes().record(make_vote(1, VoteKind::Prevote, fx.a2, v(i)));
  }
  for (std::uint32_t i = 0; i < 3; ++i) {
    rs2.precommits().record(make_vote(1, VoteKind::Precommit, fx.b1, v(i)));
  }
  CHECK(rs2.estimate(fx.tree) == fx.g);
  CHECK(rs2.completable(fx.tree));

  CHECK_FALSE(make_round(voters).completable(fx.tree));  // no ghost
}

TEST_CASE("round zero conventions and can_start_round") {
  EngineFixture ef;
  CHECK(ef.state->current_round() == 0);
  CHECK(ef.state->estimate_of(0) == ef.fx.g);
  CHECK(ef.state->round_completable(0));
  CHECK(ef.state->can_start_round(1));  // base case: always

  auto actions = ef.state->poll(0);
  CHECK(ef.state->current_round() == 1);
  REQUIRE(std::holds_alternative<StartedRound>(actions.front()));
  CHECK(std::get<StartedRound>(actions.front()).prev_estimate == ef.fx.g);

  // round 1 not completable and own votes missing: cannot start 2
  CHECK_FALSE(ef.state->can_start_round(2));
  CHECK_FALSE(ef.state->can_start_round(5));  // only current+1 can start
}

TEST_CASE("can_start_round requires own votes in the previous round") {
  EngineFixture ef;
  ef.state->poll(0);  // enter round 1
  // Make round 1 completable with foreign votes only; v0 has not voted.
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_prevote(1, ef.fx.a1, v(i));
    ef.feed_precommit(1, ef.fx.a1, v(i));
  }
  CHECK(ef.state->round_completable(1));
  CHECK_FALSE(ef.state->can_start_round(2));  // own precommit unset

  // After polling, v0 casts both votes and the round advances.
  ef.state->poll(0);
  CHECK(ef.state->current_round() == 2);
}

TEST_CASE("primary_action broadcasts an unfinalised prior estimate") {
  // v0 is primary of round 1.
  EngineFixture ef(v(0));
  ef.state->poll(0);
  // E_0 = genesis which is finalised from the start: no broadcast.
  CHECK(ef.state->primary_action(1) == std::nullopt);
  CHECK_THROWS_AS(ef.state->primary_action(2), NotPrimaryError);

  // Drive round 1 to completion with estimate A1, unfinalised. Two
  // genesis precommits keep A1 possible (2 < threshold) while the own
  // A1 precommit brings participation to 2f+1.
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_prevote(1, ef.fx.a1, v(i));
  }
  ef.state->poll(2);  // prevote
  ef.feed_precommit(1, ef.fx.g, v(1));
  ef.feed_precommit(1, ef.fx.g, v(2));
  ef.state->poll(4);  // own precommit A1; round completes
  CHECK(ef.state->current_round() == 2);
  CHECK(ef.state->estimate_of(1) == ef.fx.a1);
  CHECK_FALSE(ef.state->is_finalized(ef.fx.a1));
  // v1 is primary of round 2: same drive from its seat.
  EngineFixture ef2(v(1));
  ef2.state->poll(0);
  for (std::uint32_t i = 0; i < 4; ++i) {
    if (i != 1) {
      ef2.feed_prevote(1, ef2.fx.a1, v(i));
    }
  }
  ef2.state->poll(2);
  ef2.feed_precommit(1, ef2.fx.g, v(0));
  ef2.feed_precommit(1, ef2.fx.g, v(2));
  ef2.state->poll(4);
  REQUIRE(ef2.state->current_round() == 2);
  CHECK(ef2.state->primary_action(2) == ef2.fx.a1);
}

TEST_CASE("prevote timing gate and target selection") {
  EngineFixture ef(v(3));  // not primary of round 1
  ef.state->poll(0);
  REQUIRE(ef.state->current_round() == 1);

  CHECK_FALSE(ef.state->should_prevote(1, 1));  // before t+2T, not completable
  CHECK(ef.state->should_prevote(1, 2));        // t + 2T reached

  // Default target: head of the best chain containing E_0 = genesis.
  CHECK(ef.state->prevote_target(1) == ef.fx.a2);

  auto acts = ef.state->poll(2);
  bool cast = false;
  for (const auto &a : acts) {
    if (const auto *cv = std::get_if<CastVote>(&a)) {
      cast = true;
      CHECK(cv->vote.kind == VoteKind::Prevote);
      CHECK(cv->vote.target == ef.fx.a2);
    }
  }
  CHECK(cast);
  CHECK_THROWS_AS(ef.state->prevote_target(1), AlreadyVotedError);
}

TEST_CASE("prevote honors a plausible primary block and ignores junk") {
  // Round 2 with a primary block B: need g(V_1) >= B > E_1.
  EngineFixture ef(v(3), {}, /*with_b2=*/false, /*with_a3=*/true);
  ef.state->poll(0);
  // Round 1: everyone prevotes A2, precommits A1 -> E_1 = A1, g(V_1) = A2.
  for (std::uint32_t i = 0; i < 4; ++i) {
    if (i != 3) {
      ef.feed_prevote(1, ef.fx.a2, v(i));
    }
  }
  ef.state->poll(2);
  for (std::uint32_t i = 0; i < 4; ++i) {
    if (i != 3) {
      ef.feed_precommit(1, ef.fx.a1, v(i));
    }
  }
  ef.state->poll(4);
  REQUIRE(ef.state->current_round() == 2);
  REQUIRE(ef.state->estimate_of(1) == ef.fx.a1);

  // Plausible primary block A2: g(V_1) = A2 >= A2 > A1 = E_1.
  ef.state->on_primary_broadcast(2, ef.fx.a2, v(1));
  CHECK(ef.state->prevote_target(2) == ef.fx.a3);  // best chain above A2

  // Junk broadcast from a non-primary is ignored outright.
  EngineFixture ef2(v(3), {}, false, true);
  ef2.state->poll(0);
  for (std::uint32_t i = 0; i < 3; ++i) {
    ef2.feed_prevote(1, ef2.fx.a2, v(i));
    ef2.feed_precommit(1, ef2.fx.a1, v(i));
  }
  ef2.state->poll(4);
  REQUIRE(ef2.state->current_round() == 2);
  ef2.state->on_primary_broadcast(2, ef2.fx.b1, v(3));  // not the primary
  CHECK(ef2.state->prevote_target(2) == ef2.fx.a3);

  // Primary block off the ghost chain fails g(V_1) >= B and is ignored.
  ef2.state->on_primary_broadcast(2, ef2.fx.b1, v(1));
  CHECK(ef2.state->prevote_target(2) == ef2.fx.a3);
}

TEST_CASE("precommit gate: ghost, estimate coverage, and conditions") {
  EngineFixture ef(v(3));
  ef.state->poll(0);
  ef.state->poll(2);  // cast own prevote (A2)
  REQUIRE(ef.state->round(1).own_prevote.has_value());

  // g(V_1) does not exist yet: no precommit even at t+4T.
  CHECK_FALSE(ef.state->should_precommit(1, 4));

  // Unanimous prevotes for A2: vacuous child rule fires before 4T.
  for (std::uint32_t i = 0; i < 3; ++i) {
    ef.feed_prevote(1, ef.fx.a2, v(i));
  }
  CHECK(ef.state->should_precommit(1, 3));  // (iii)
  CHECK(ef.state->precommit_target(1) == ef.fx.a2);

  // With rule (iii) disabled the voter waits for the clock.
  EngineConfig no_iii;
  no_iii.precommit_rule_iii = false;
  EngineFixture ef2(v(3), no_iii);
  ef2.state->poll(0);
  ef2.state->poll(2);
  for (std::uint32_t i = 0; i < 3; ++i) {
    ef2.feed_prevote(1, ef2.fx.a2, v(i));
  }
  CHECK_FALSE(ef2.state->should_precommit(1, 3));
  CHECK(ef2.state->should_precommit(1, 4));  // (i)
}

TEST_CASE("try_finalize: supermajority gates and ancestor closure") {
  EngineFixture ef(v(0));
  ef.state->poll(0);
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_prevote(1, ef.fx.a2, v(i));
  }
  ef.state->poll(2);  // own prevote A2 joins; then precommit via (iii)
  REQUIRE(ef.state->round(1).own_precommit.has_value());

  // Precommits: three for A1 (with own A2 that is 4 >= A1).
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_precommit(1, ef.fx.a1, v(i));
  }
  auto acts = ef.state->poll(3);
  CHECK(ef.state->last_finalized() == ef.fx.a1);
  CHECK(ef.state->is_finalized(ef.fx.a1));
  bool saw_fin = false;
  for (const auto &a : acts) {
    if (const auto *fin = std::get_if<Finalization>(&a)) {
      saw_fin = true;
      CHECK(fin->block == ef.fx.a1);
      CHECK(fin->round == 1);
    }
  }
  CHECK(saw_fin);

  // Re-running is a no-op: g(C_1) is not later than the last finalised.
  CHECK(ef.state->try_finalize(1, 4).empty());
}

TEST_CASE("try_finalize refuses without a prevote supermajority") {
  // g(C) = A1 but V only holds 2 votes >= A1.
  EngineFixture ef(v(0));
  ef.state->poll(0);
  ef.feed_prevote(1, ef.fx.a1, v(1));
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_precommit(1, ef.fx.a1, v(i));
  }
  // Past the precommit step is required; fake it by never voting.
  // v0 has not precommitted, so round 1 is not past its precommit step
  // and nothing finalises either way.
  CHECK(ef.state->try_finalize(1, 10).empty());
  CHECK(ef.state->last_finalized() == ef.fx.g);
}

TEST_CASE("finalisation closes over unfinalised ancestors") {
  EngineFixture ef(v(0));
  ef.state->poll(0);
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_prevote(1, ef.fx.a2, v(i));
  }
  ef.state->poll(2);
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_precommit(1, ef.fx.a2, v(i));
  }
  ef.state->poll(3);
  const auto &log = ef.state->finalized_log();
  REQUIRE(log.size() == 2);
  CHECK(log[0].what.block == ef.fx.a1);  // ancestors first, ascending
  CHECK(log[1].what.block == ef.fx.a2);
  CHECK(ef.state->last_finalized_number() == 2);
}

TEST_CASE("validate_commit: threshold, chain rule, authenticity") {
  FixtureTree fx;
  auto voters = std::make_shared<VoterSet>(4);

  CommitMessage good;
  good.round = 1;
  good.target = fx.a1;
  for (std::uint32_t i = 0; i < 3; ++i) {
    good.precommits.push_back(make_vote(1, VoteKind::Precommit, fx.a1, v(i)));
  }
  CHECK(validate_commit(good, voters, fx.tree));

  CommitMessage thin = good;
  thin.precommits.pop_back();
  CHECK_FALSE(validate_commit(thin, voters, fx.tree));  // 2 < threshold

  CommitMessage off_chain = good;
  off_chain.precommits.back() =
      make_vote(1, VoteKind::Precommit, fx.b1, v(2));
  CHECK_FALSE(validate_commit(off_chain, voters, fx.tree));  // B1 !>= A1

  CommitMessage forged = good;
  forged.precommits.back().auth ^= 1;
  CHECK_FALSE(validate_commit(forged, voters, fx.tree));

  CommitMessage wrong_round = good;
  wrong_round.precommits.back().round = 2;
  CHECK_FALSE(validate_commit(wrong_round, voters, fx.tree));

  // Duplicate voters collapse: two of v0's votes and one of v1's do not
  // reach the three-voter threshold.
  CommitMessage dup;
  dup.round = 1;
  dup.target = fx.a1;
  dup.precommits.push_back(make_vote(1, VoteKind::Precommit, fx.a1, v(0)));
  dup.precommits.push_back(make_vote(1, VoteKind::Precommit, fx.a2, v(0)));
  dup.precommits.push_back(make_vote(1, VoteKind::Precommit, fx.a1, v(1)));
  CHECK_FALSE(validate_commit(dup, voters, fx.tree));
}

TEST_CASE("on_commit: immediate and deferred finalisation") {
  CommitMessage commit;
  commit.round = 1;
  commit.target = FixtureTree{}.a1;
  for (std::uint32_t i = 1; i < 4; ++i) {
    commit.precommits.push_back(
        make_vote(1, VoteKind::Precommit, commit.target, v(i)));
  }

  // Deferred: voter still mid-round-1 (no own precommit yet).
  EngineFixture ef(v(0));
  ef.state->poll(0);
  CHECK(ef.state->on_commit(commit));
  ef.state->poll(1);
  CHECK_FALSE(ef.state->is_finalized(ef.fx.a1));  // gated

  // Give the voter its own votes; the deferred commit then lands.
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_prevote(1, ef.fx.a1, v(i));
  }
  ef.state->poll(2);  // prevote + precommit (vacuous child rule)
  CHECK(ef.state->is_finalized(ef.fx.a1));
  CHECK(ef.state->last_finalized() == ef.fx.a1);

  // Invalid commits are dropped.
  CommitMessage bad = commit;
  bad.precommits.pop_back();
  CHECK_FALSE(ef.state->on_commit(bad));

  // A commit for an already-finalised block is a no-op.
  const auto log_size = ef.state->finalized_log().size();
  CHECK(ef.state->on_commit(commit));
  ef.state->poll(3);
  CHECK(ef.state->finalized_log().size() == log_size);
}

TEST_CASE("commit emission: backoff scheduling and suppression") {
  EngineFixture ef(v(0));
  ef.state->poll(0);
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_prevote(1, ef.fx.a1, v(i));
  }
  ef.state->poll(2);
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_precommit(1, ef.fx.a1, v(i));
  }
  auto acts = ef.state->poll(3);
  // Finalised; commit pending with backoff 1 (fixture backoff fn).
  bool emitted_now = false;
  for (const auto &a : acts) {
    emitted_now = emitted_now || std::holds_alternative<EmitCommit>(a);
  }
  CHECK_FALSE(emitted_now);

  auto acts2 = ef.state->poll(4);
  const EmitCommit *emitted = nullptr;
  for (const auto &a : acts2) {
    if (const auto *ec = std::get_if<EmitCommit>(&a)) {
      emitted = ec;
    }
  }
  REQUIRE(emitted != nullptr);
  CHECK(emitted->msg.target == ef.fx.a1);
  CHECK(emitted->msg.round == 1);
  CHECK(validate_commit(emitted->msg, ef.voters, *ef.tree));

  // Second fixture: a valid commit for a descendant arrives during the
  // backoff window and cancels the emission.
  EngineFixture ef2(v(0));
  ef2.state->poll(0);
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef2.feed_prevote(1, ef2.fx.a2, v(i));
  }
  ef2.state->poll(2);
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef2.feed_precommit(1, ef2.fx.a1, v(i));
  }
  ef2.state->poll(3);  // finalises A1, commit pending at 4
  CommitMessage rival;
  rival.round = 1;
  rival.target = ef2.fx.a1;
  for (std::uint32_t i = 1; i < 4; ++i) {
    rival.precommits.push_back(
        make_vote(1, VoteKind::Precommit, ef2.fx.a1, v(i)));
  }
  CHECK(ef2.state->on_commit(rival));
  auto acts3 = ef2.state->poll(4);
  for (const auto &a : acts3) {
    CHECK_FALSE(std::holds_alternative<EmitCommit>(a));
  }
}

TEST_CASE("handle_vote: routing, horizon, and error paths") {
  EngineFixture ef(v(0));
  ef.state->poll(0);

  CHECK(ef.state->handle_vote(make_vote(1, VoteKind::Prevote, ef.fx.a1,
                                        v(1))) == VoterState::Ingest::Recorded);
  CHECK(ef.state->handle_vote(make_vote(1, VoteKind::Prevote, ef.fx.a1,
                                        v(1))) ==
        VoterState::Ingest::Duplicate);
  CHECK(ef.state->round(1).prevotes().participant_count() == 1);

  // Late precommit for a past round still lands.
  CHECK(ef.state->handle_vote(make_vote(1, VoteKind::Precommit, ef.fx.a1,
                                        v(2))) ==
        VoterState::Ingest::Recorded);

  // Far-future rounds are dropped by the horizon.
  CHECK(ef.state->handle_vote(make_vote(1001, VoteKind::Prevote, ef.fx.a1,
                                        v(1))) ==
        VoterState::Ingest::HorizonDropped);

  Vote forged = make_vote(1, VoteKind::Prevote, ef.fx.a1, v(2));
  forged.auth ^= 1;
  CHECK_THROWS_AS(ef.state->handle_vote(forged), BadAuthError);
  // A vote signed by an out-of-set voter id fails authentication at the
  // set boundary too.
  CHECK_THROWS_AS(ef.state->handle_vote(
                      make_vote(1, VoteKind::Prevote, ef.fx.a1, v(17))),
                  UnknownVoterError);
}

TEST_CASE("late precommits can lower a prior round's estimate") {
  EngineFixture ef(v(3), {}, false, true);
  ef.state->poll(0);
  for (std::uint32_t i = 0; i < 3; ++i) {
    ef.feed_prevote(1, ef.fx.a2, v(i));
  }
  ef.state->poll(2);
  CHECK(ef.state->estimate_of(1) == ef.fx.a2);  // no precommits yet

  for (std::uint32_t i = 0; i < 3; ++i) {
    ef.feed_precommit(1, ef.fx.a1, v(i));  // A2 now impossible (3 against)
  }
  CHECK(ef.state->estimate_of(1) == ef.fx.a1);
}

TEST_CASE("own votes are immutable and rounds advance by one") {
  EngineFixture ef(v(0));
  ef.state->poll(0);
  for (std::uint32_t i = 1; i < 4; ++i) {
    ef.feed_prevote(1, ef.fx.a2, v(i));
    ef.feed_precommit(1, ef.fx.a2, v(i));
  }
  ef.state->poll(2);
  const auto own_pv = ef.state->round(1).own_prevote;
  const auto own_pc = ef.state->round(1).own_precommit;
  REQUIRE(own_pv.has_value());
  REQUIRE(own_pc.has_value());
  CHECK(ef.state->current_round() == 2);

  ef.state->poll(10);
  CHECK(ef.state->round(1).own_prevote == own_pv);
  CHECK(ef.state->round(1).own_precommit == own_pc);
}

TEST_CASE("estimate and completability are monotone over grown snapshots") {
  DetRng rng(61, "estimate-monotone");
  int checked = 0;
  while (checked < 400) {
    const std::size_t f = static_cast<std::size_t>(rng.uniform(1, 3));
    auto voters = std::make_shared<VoterSet>(3 * f + 1);
    BlockTree tree = random_tree(rng, 1 + rng.uniform(1, 24), 6);
    VoteSet big_v = random_vote_set(rng, voters, tree, VoteKind::Prevote, 1, 1);
    VoteSet big_c =
        random_vote_set(rng, voters, tree, VoteKind::Precommit, 1, 1);
    if (!big_v.is_safe() || !big_c.is_safe()) {
      continue;
    }
    RoundState small(voters, 1, VoterId{0});
    for (const Vote &vote : random_subset(rng, big_v, 7).all_votes()) {
      small.prevotes().record(vote);
    }
    for (const Vote &vote : random_subset(rng, big_c, 7).all_votes()) {
      small.precommits().record(vote);
    }
    if (!small.completable(tree)) {
      continue;
    }
    RoundState grown(voters, 1, VoterId{0});
    for (const Vote &vote : big_v.all_votes()) {
      grown.prevotes().record(vote);
    }
    for (const Vote &vote : big_c.all_votes()) {
      grown.precommits().record(vote);
    }
    CHECK(grown.completable(tree));
    // E' <= E: the grown estimate sits on the chain of the smaller one.
    const BlockId e_small = small.estimate(tree);
    const BlockId e_grown = grown.estimate(tree);
    CHECK(tree.is_descendant_or_equal(e_small, e_grown));
    ++checked;
  }
}
