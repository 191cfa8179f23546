/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include "grandpa/accountability.hpp"

#include <algorithm>
#include <set>

#include "grandpa/trace.hpp"

namespace grandpa {

ConflictClaim make_claim(CommitMessage a, CommitMessage b,
                         const std::shared_ptr<const VoterSet> &voters,
                         const BlockTree &tree) {
  if (!validate_commit(a, voters, tree) || !validate_commit(b, voters, tree)) {
    throw NotAConflictError("commit does not validate");
  }
  if (tree.same_chain(a.target, b.target)) {
    throw NotAConflictError("commit targets lie on the same chain");
  }
  if (a.round > b.round) {
    std::swap(a, b);
  }
  return ConflictClaim{std::move(a), std::move(b)};
}

std::vector<VoterId> extract_equivocators(const VoteSet &merged) {
  std::vector<VoterId> out;
  for (VoterId v : merged.voter_set().voters()) {
    if (merged.votes_of(v).size() >= 2) {
      out.push_back(v);
    }
  }
  return out;
}

Response honest_answer(const VoterState &history, const Query &q) {
  const BlockTree &tree = history.tree();
  if (q.kind == Query::Kind::PrevotesSeen) {
    // Addressed to precommitters whose vote covered B; the reply is the
    // prevote set that justified that precommit.
    const auto &prevotes = history.round(q.vote_round).prevotes();
    return Response{VoteKind::Prevote, q.vote_round, prevotes.all_votes()};
  }
  if (tree.is_descendant_or_equal(q.addressee_vote.target, q.block)) {
    throw NotApplicableError{};  // mis-addressed: the vote did cover B
  }

  const RoundNumber prior = q.vote_round - 1;
  const RoundState &rs = history.round(prior);
  const auto gv = rs.ghost_prevotes(tree);
  if (gv && !tree.same_chain(q.block, *gv)) {
    return Response{VoteKind::Prevote, prior, rs.prevotes().all_votes()};
  }
  return Response{VoteKind::Precommit, prior, rs.precommits().all_votes()};
}

bool verify_response(const Response &resp, const Query &q,
                     const std::shared_ptr<const VoterSet> &voters,
                     const BlockTree &tree) {
  const RoundNumber want_round =
      q.kind == Query::Kind::WhyEstimate ? q.vote_round - 1 : q.vote_round;
  if (resp.set_round != want_round) {
    return false;
  }
  if (q.kind == Query::Kind::PrevotesSeen &&
      resp.set_kind != VoteKind::Prevote) {
    return false;
  }
  VoteSet set(voters, resp.set_kind, resp.set_round);
  for (const Vote &vote : resp.votes) {
    if (vote.kind != resp.set_kind || vote.round != resp.set_round) {
      return false;
    }
    if (!vote_auth_ok(vote) || !voters->contains(vote.voter)) {
      return false;
    }
    if (!tree.contains(vote.target)) {
      return false;
    }
    set.record(vote);
  }
  if (q.kind == Query::Kind::WhyEstimate) {
    return supermajority(set, tree, q.block).impossible;
  }
  // PrevotesSeen: the set must back the responder's own precommit.
  if (!tree.contains(q.addressee_vote.target)) {
    return false;
  }
  return supermajority(set, tree, q.addressee_vote.target).has;
}

bool verify_verdict(const Verdict &verdict,
                    const std::shared_ptr<const VoterSet> &voters) {
  if (verdict.byzantine.size() < voters->f() + 1) {
    return false;
  }
  if (const auto *equiv =
          std::get_if<EquivocationEvidence>(&verdict.evidence)) {
    std::map<VoterId, std::set<BlockId>> targets;
    for (const Vote &vote : equiv->votes) {
      if (vote.kind != equiv->kind || vote.round != equiv->round) {
        return false;
      }
      if (!vote_auth_ok(vote) || !voters->contains(vote.voter)) {
        return false;
      }
      targets[vote.voter].insert(vote.target);
    }
    for (VoterId v : verdict.byzantine) {
      auto it = targets.find(v);
      if (it == targets.end() || it->second.size() < 2) {
        return false;
      }
    }
    return true;
  }
  const auto &nr = std::get<NonResponseEvidence>(verdict.evidence);
  // Silence cannot be re-proven offline; check the structural claim that
  // every silent addressee was actually queried and is named.
  std::set<VoterId> queried;
  for (const Query &q : nr.queries) {
    queried.insert(q.addressee);
  }
  const std::set<VoterId> named(verdict.byzantine.begin(),
                                verdict.byzantine.end());
  for (VoterId v : nr.silent) {
    if (queried.count(v) == 0 || named.count(v) == 0) {
      return false;
    }
  }
  return true;
}

ChallengeSession::ChallengeSession(ConflictClaim claim,
                                   std::shared_ptr<const VoterSet> voters,
                                   std::shared_ptr<const BlockTree> tree)
    : claim_(std::move(claim)),
      voters_(std::move(voters)),
      tree_(std::move(tree)),
      vote_round_(claim_.commit_b.round) {
  // First step: ask everyone who precommitted >= B' in the later commit
  // why its estimate missed B.
  VoteSet later(voters_, VoteKind::Precommit, claim_.commit_b.round);
  for (const Vote &vote : claim_.commit_b.precommits) {
    later.record(vote);
  }
  for (VoterId v : extract_equivocators(later)) {
    observed_equivocators_.push_back(v);
  }
  queries_ = why_estimate_queries(later);
}

std::vector<Query> ChallengeSession::why_estimate_queries(
    const VoteSet &contrary) const {
  const BlockId b = claim_.commit_a.target;
  std::vector<Query> out;
  for (VoterId v : voters_->voters()) {
    for (const Vote &vote : contrary.votes_of(v)) {
      if (!tree_->is_descendant_or_equal(vote.target, b)) {
        out.push_back(Query{Query::Kind::WhyEstimate, contrary.round(), b, v,
                            vote});
        break;  // one query per addressee
      }
    }
  }
  return out;
}

Verdict ChallengeSession::non_response_verdict(Tick deadline) const {
  NonResponseEvidence ev;
  ev.queries = queries_;
  ev.deadline = deadline;
  std::set<VoterId> names;
  for (const Query &q : queries_) {
    ev.silent.push_back(q.addressee);
    names.insert(q.addressee);
  }
  for (VoterId v : observed_equivocators_) {
    names.insert(v);
  }
  Verdict verdict;
  verdict.byzantine.assign(names.begin(), names.end());
  verdict.evidence = std::move(ev);
  return verdict;
}

Verdict ChallengeSession::equivocation_verdict(const VoteSet &merged) const {
  EquivocationEvidence ev;
  ev.kind = merged.kind();
  ev.round = merged.round();
  Verdict verdict;
  verdict.byzantine = extract_equivocators(merged);
  for (VoterId v : verdict.byzantine) {
    for (const Vote &vote : merged.votes_of(v)) {
      ev.votes.push_back(vote);
    }
  }
  verdict.evidence = std::move(ev);
  return verdict;
}

std::optional<Verdict> ChallengeSession::step(
    const std::vector<std::pair<VoterId, Response>> &responses,
    Tick deadline) {
  if (verdict_) {
    return verdict_;
  }

  // Keep the valid response from the lowest-id responder; the selection
  // rule is arbitrary but must be deterministic.
  std::set<VoterId> addressees;
  for (const Query &q : queries_) {
    addressees.insert(q.addressee);
  }
  std::optional<std::pair<VoterId, Response>> chosen;
  for (const auto &[responder, resp] : responses) {
    if (addressees.count(responder) == 0) {
      continue;
    }
    const Query *q = nullptr;
    for (const Query &cand : queries_) {
      if (cand.addressee == responder) {
        q = &cand;
        break;
      }
    }
    if (!verify_response(resp, *q, voters_, *tree_)) {
      continue;  // invalid responses count as silence
    }
    if (!chosen || responder < chosen->first) {
      chosen = {responder, resp};
    }
  }

  if (!chosen) {
    verdict_ = non_response_verdict(deadline);
    return verdict_;
  }

  VoteSet set(voters_, chosen->second.set_kind, chosen->second.set_round);
  for (const Vote &vote : chosen->second.votes) {
    set.record(vote);
  }
  for (VoterId v : extract_equivocators(set)) {
    if (std::find(observed_equivocators_.begin(), observed_equivocators_.end(),
                  v) == observed_equivocators_.end()) {
      observed_equivocators_.push_back(v);
    }
  }

  if (phase_ == Phase::PrevotesSeen) {
    VoteSet merged = *round_r_prevotes_;
    merged.merge(set);
    verdict_ = equivocation_verdict(merged);
    return verdict_;
  }

  const RoundNumber r = claim_.commit_a.round;
  if (set.round() > r) {
    // Keep descending: question every contrary vote one round earlier.
    vote_round_ = set.round();
    queries_ = why_estimate_queries(set);
    return std::nullopt;
  }

  // The descent landed on a round-r set showing B was impossible.
  if (set.kind() == VoteKind::Precommit) {
    VoteSet merged = set;
    for (const Vote &vote : claim_.commit_a.precommits) {
      merged.record(vote);
    }
    verdict_ = equivocation_verdict(merged);
    return verdict_;
  }

  // Round-r prevotes: ask the earlier commit's precommitters what they saw.
  round_r_prevotes_ = set;
  phase_ = Phase::PrevotesSeen;
  queries_.clear();
  std::set<VoterId> seen;
  for (const Vote &vote : claim_.commit_a.precommits) {
    if (seen.insert(vote.voter).second) {
      queries_.push_back(Query{Query::Kind::PrevotesSeen, r,
                               claim_.commit_a.target, vote.voter, vote});
    }
  }
  return std::nullopt;
}

std::variant<Verdict, ChallengeSession> start_challenge(
    const ConflictClaim &claim, std::shared_ptr<const VoterSet> voters,
    std::shared_ptr<const BlockTree> tree) {
  // make_claim re-checks the invariants so hand-built claims cannot skip
  // validation.
  ConflictClaim checked =
      make_claim(claim.commit_a, claim.commit_b, voters, *tree);

  if (checked.commit_a.round == checked.commit_b.round) {
    VoteSet merged(voters, VoteKind::Precommit, checked.commit_a.round);
    for (const Vote &vote : checked.commit_a.precommits) {
      merged.record(vote);
    }
    for (const Vote &vote : checked.commit_b.precommits) {
      merged.record(vote);
    }
    EquivocationEvidence ev;
    ev.kind = VoteKind::Precommit;
    ev.round = checked.commit_a.round;
    Verdict verdict;
    verdict.byzantine = extract_equivocators(merged);
    for (VoterId v : verdict.byzantine) {
      for (const Vote &vote : merged.votes_of(v)) {
        ev.votes.push_back(vote);
      }
    }
    verdict.evidence = std::move(ev);
    return verdict;
  }
  return ChallengeSession(std::move(checked), std::move(voters),
                          std::move(tree));
}

// --- JSON ---------------------------------------------------------------

nlohmann::json json_of(const Query &q) {
  return nlohmann::json{
      {"query_kind",
       q.kind == Query::Kind::WhyEstimate ? "why-estimate" : "prevotes-seen"},
      {"vote_round", q.vote_round},
      {"block", json_of(q.block)},
      {"addressee", q.addressee.index},
      {"addressee_vote", json_of(q.addressee_vote)}};
}

Query query_from_json(const nlohmann::json &j) {
  Query q;
  const auto kind = j.at("query_kind").get<std::string>();
  if (kind == "why-estimate") {
    q.kind = Query::Kind::WhyEstimate;
  } else if (kind == "prevotes-seen") {
    q.kind = Query::Kind::PrevotesSeen;
  } else {
    throw CorruptTraceError("unknown query kind: " + kind);
  }
  q.vote_round = j.at("vote_round").get<RoundNumber>();
  q.block = block_id_from_json(j.at("block"));
  q.addressee = VoterId{j.at("addressee").get<std::uint32_t>()};
  q.addressee_vote = vote_from_json(j.at("addressee_vote"));
  return q;
}

nlohmann::json json_of(const Response &r) {
  nlohmann::json votes = nlohmann::json::array();
  for (const Vote &vote : r.votes) {
    votes.push_back(json_of(vote));
  }
  return nlohmann::json{{"set_kind", to_string(r.set_kind)},
                        {"set_round", r.set_round},
                        {"votes", std::move(votes)}};
}

Response response_from_json(const nlohmann::json &j) {
  Response r;
  const auto kind = j.at("set_kind").get<std::string>();
  r.set_kind = kind == "prevote" ? VoteKind::Prevote : VoteKind::Precommit;
  r.set_round = j.at("set_round").get<RoundNumber>();
  for (const auto &v : j.at("votes")) {
    r.votes.push_back(vote_from_json(v));
  }
  return r;
}

nlohmann::json json_of(const Verdict &v) {
  nlohmann::json names = nlohmann::json::array();
  for (VoterId id : v.byzantine) {
    names.push_back(id.index);
  }
  nlohmann::json evidence;
  if (const auto *equiv = std::get_if<EquivocationEvidence>(&v.evidence)) {
    nlohmann::json votes = nlohmann::json::array();
    for (const Vote &vote : equiv->votes) {
      votes.push_back(json_of(vote));
    }
    evidence = nlohmann::json{{"type", "equivocation"},
                              {"kind", to_string(equiv->kind)},
                              {"round", equiv->round},
                              {"votes", std::move(votes)}};
  } else {
    const auto &nr = std::get<NonResponseEvidence>(v.evidence);
    nlohmann::json queries = nlohmann::json::array();
    for (const Query &q : nr.queries) {
      queries.push_back(json_of(q));
    }
    nlohmann::json silent = nlohmann::json::array();
    for (VoterId id : nr.silent) {
      silent.push_back(id.index);
    }
    evidence = nlohmann::json{{"type", "non-response"},
                              {"queries", std::move(queries)},
                              {"deadline", nr.deadline},
                              {"silent", std::move(silent)}};
  }
  return nlohmann::json{{"byzantine", std::move(names)},
                        {"evidence", std::move(evidence)}};
}

Verdict verdict_from_json(const nlohmann::json &j) {
  Verdict v;
  for (const auto &id : j.at("byzantine")) {
    v.byzantine.push_back(VoterId{id.get<std::uint32_t>()});
  }
  const auto &ev = j.at("evidence");
  const auto type = ev.at("type").get<std::string>();
  if (type == "equivocation") {
    EquivocationEvidence equiv;
    equiv.kind = ev.at("kind").get<std::string>() == "prevote"
                     ? VoteKind::Prevote
                     : VoteKind::Precommit;
    equiv.round = ev.at("round").get<RoundNumber>();
    for (const auto &vote : ev.at("votes")) {
      equiv.votes.push_back(vote_from_json(vote));
    }
    v.evidence = std::move(equiv);
  } else if (type == "non-response") {
    NonResponseEvidence nr;
    for (const auto &q : ev.at("queries")) {
      nr.queries.push_back(query_from_json(q));
    }
    nr.deadline = ev.at("deadline").get<Tick>();
    for (const auto &id : ev.at("silent")) {
      nr.silent.push_back(VoterId{id.get<std::uint32_t>()});
    }
    v.evidence = std::move(nr);
  } else {
    throw CorruptTraceError("unknown evidence type: " + type);
  }
  return v;
}

}  // namespace grandpa
