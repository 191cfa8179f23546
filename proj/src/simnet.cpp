/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include "grandpa/simnet.hpp"

#include <algorithm>
#include <cassert>
#include <queue>
#include <set>

#include "grandpa/rng.hpp"

namespace grandpa {

VoterId primary_for(const Scenario &scenario, RoundNumber round) {
  if (scenario.primary_mode == PrimaryMode::RoundRobin) {
    return VoterId{
        static_cast<std::uint32_t>((round - 1) % scenario.n)};
  }
  const std::uint64_t salt = splitmix64(scenario.seed ^ 0x7072696d61727900ULL);
  return VoterId{static_cast<std::uint32_t>(mix64(salt, round) % scenario.n)};
}

namespace {

// Faction tags route traffic inside conflicting-finalizer scenarios:
// colluders maintain one protocol view per partition.
constexpr int kNoFaction = -1;

struct BlockPayload {
  Block block;
  int faction = kNoFaction;
};
struct VotePayload {
  Vote vote;
  int faction = kNoFaction;
};
struct CommitPayload {
  CommitMessage msg;
  int faction = kNoFaction;
};
struct BroadcastPayload {
  RoundNumber round = 0;
  BlockId block;
  VoterId from;
  int faction = kNoFaction;
};
struct QueryPayload {
  std::size_t step = 0;
  Query query;
  std::uint32_t challenger = 0;
};
struct ResponsePayload {
  std::size_t step = 0;
  VoterId responder;
  Response response;
};

using Payload = std::variant<BlockPayload, VotePayload, CommitPayload,
                             BroadcastPayload, QueryPayload, ResponsePayload>;

std::uint64_t payload_id(const Payload &pl) {
  // The faction tag is part of the envelope identity: colluders send the
  // same logical vote into both partitions, and the copies must survive
  // per-recipient dedupe independently.
  return std::visit(
      [](const auto &p) -> std::uint64_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BlockPayload>) {
          return mix64(mix64(0xb10c, p.faction + 2), p.block.id.value);
        } else if constexpr (std::is_same_v<T, VotePayload>) {
          return mix64(mix64(0x707e, p.faction + 2), p.vote.auth);
        } else if constexpr (std::is_same_v<T, CommitPayload>) {
          std::uint64_t h = mix64(0xc031, p.msg.target.value);
          h = mix64(h, p.msg.round);
          h = mix64(h, p.faction + 2);
          for (const Vote &v : p.msg.precommits) {
            h = mix64(h, v.auth);
          }
          return h;
        } else if constexpr (std::is_same_v<T, BroadcastPayload>) {
          std::uint64_t h = mix64(0xbcbc, p.round);
          h = mix64(h, p.block.value);
          h = mix64(h, p.faction + 2);
          return mix64(h, p.from.index);
        } else if constexpr (std::is_same_v<T, QueryPayload>) {
          std::uint64_t h = mix64(0x9e81, p.step);
          h = mix64(h, p.query.addressee.index);
          h = mix64(h, p.query.addressee_vote.auth);
          return mix64(h, static_cast<std::uint64_t>(p.query.kind));
        } else {
          std::uint64_t h = mix64(0x8e59, p.step);
          return mix64(h, p.responder.index);
        }
      },
      pl);
}

bool is_gossip(const Payload &pl) {
  return !std::holds_alternative<QueryPayload>(pl) &&
         !std::holds_alternative<ResponsePayload>(pl);
}

bool is_block(const Payload &pl) {
  return std::holds_alternative<BlockPayload>(pl);
}

struct Event {
  Tick time = 0;
  std::uint64_t seq = 0;
  enum class Kind { Deliver, Poll, Produce, Deadline, SplitterRelease } kind =
      Kind::Poll;
  std::uint32_t participant = 0;
  Payload payload;
  std::uint64_t slot = 0;
  std::size_t step = 0;
};

struct EventAfter {
  bool operator()(const Event &a, const Event &b) const {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

struct PayloadMeta {
  std::optional<Tick> first_honest_touch;
  std::optional<Tick> first_send;
  bool relayed = false;
};

/// One protocol view: a tree plus buffers for blocks whose parents have
/// not arrived and payloads referencing blocks not yet in the tree.
struct View {
  std::shared_ptr<BlockTree> tree;
  std::unique_ptr<VoterState> engine;
  std::map<BlockId, std::vector<Block>> orphans;
  std::map<BlockId, std::vector<Payload>> waiting;
};

struct Participant {
  std::uint32_t index = 0;
  VoterId id;
  bool honest = true;
  AdversarySpec spec;
  bool is_conflicting = false;

  View main;
  View flavored[2];  // conflicting finalizers only

  std::set<std::uint64_t> seen;
  DetRng rng;

  // vote-splitter state
  std::optional<Vote> held_prevote;
  Tick held_release = 0;

  // conflict detection (honest participants)
  std::vector<CommitMessage> known_commits;
};

struct LiveChallenge {
  std::uint32_t challenger = 0;
  std::unique_ptr<ChallengeSession> session;
  std::size_t step = 0;
  std::vector<std::pair<VoterId, Response>> collected;
  bool done = false;
};

class Simulation {
 public:
  explicit Simulation(Scenario sc) : sc_(std::move(sc)) {
    sc_.validate();
    voters_ = std::make_shared<VoterSet>(sc_.n, sc_.f);
    net_rng_ = DetRng(sc_.seed, "net");
  }

  Trace run();

 private:
  // --- setup ----------------------------------------------------------
  void init_participants();
  void init_view(Participant &p, View &view, int faction);

  // --- event plumbing ---------------------------------------------------
  void schedule(Tick time, Event ev) {
    ev.time = time;
    ev.seq = seq_++;
    queue_.push(std::move(ev));
  }
  void trace(const std::string &kind, std::int64_t actor,
             nlohmann::json payload) {
    TraceEvent ev;
    ev.time = now_;
    ev.seq = trace_seq_++;
    ev.actor = actor;
    ev.kind = kind;
    ev.payload = std::move(payload);
    events_.push_back(std::move(ev));
  }

  // --- network ----------------------------------------------------------
  int group_of(std::uint32_t index) const;  // 0, 1, or 2 (both/colluder)
  Tick delay_for(std::uint32_t sender, std::uint32_t recipient,
                 const Payload &pl);
  Tick async_delay();
  void send(const Payload &pl, std::uint32_t sender,
            const std::vector<std::uint32_t> &recipients);
  void send_all(const Payload &pl, std::uint32_t sender);
  std::vector<std::uint32_t> faction_recipients(std::uint32_t sender,
                                                int faction) const;

  // --- delivery and routing ---------------------------------------------
  void deliver(Participant &p, const Payload &pl);
  void route(Participant &p, View &view, const Payload &pl);
  void insert_block(Participant &p, View &view, const Block &block);
  void handle_query(Participant &p, const QueryPayload &q);
  void handle_response(Participant &p, const ResponsePayload &r);

  // --- engine output ------------------------------------------------------
  /// Faction tag stamped on honest outbound traffic so colluder shadow
  /// views can route it; meaningless outside partition scenarios.
  int outbound_tag(const Participant &p) const {
    return sc_.pre_gst_policy == PreGstPolicy::Partition && p.honest
               ? group_of(p.index)
               : kNoFaction;
  }
  void poll_views(Participant &p);
  void dispatch(Participant &p, View &view, int faction, const Action &act);
  void dispatch_vote(Participant &p, int faction, const Vote &vote);
  std::optional<BlockId> alt_target(const Participant &p, BlockId avoid) const;
  BlockId splitter_branch(const Participant &p, BlockId fallback) const;
  void release_held_prevote(Participant &p);

  // --- block production ---------------------------------------------------
  void produce(std::uint64_t slot);

  // --- accountability -------------------------------------------------------
  void note_commit(Participant &p, const CommitMessage &msg);
  void begin_challenge(Participant &p, const CommitMessage &a,
                       const CommitMessage &b);
  void send_challenge_queries();
  void on_deadline(std::size_t step);

  Scenario sc_;
  std::shared_ptr<const VoterSet> voters_;
  std::vector<Participant> parts_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t trace_seq_ = 0;
  Tick now_ = 0;
  DetRng net_rng_;
  std::map<std::uint64_t, PayloadMeta> meta_;
  std::vector<TraceEvent> events_;
  std::optional<LiveChallenge> chal_;
};

int Simulation::group_of(std::uint32_t index) const {
  const Participant &p = parts_[index];
  if (!p.honest) {
    return 2;
  }
  if (sc_.pre_gst_policy != PreGstPolicy::Partition) {
    return 0;
  }
  const AdversarySpec &spec = sc_.adversaries.begin()->second;
  for (std::uint32_t v : spec.partition_b) {
    if (v == index) {
      return 1;
    }
  }
  return 0;
}

Tick Simulation::async_delay() {
  const std::uint64_t r = net_rng_.next_u64();
  const int z = r == 0 ? 20 : std::min(20, __builtin_ctzll(r));
  const Tick raw = sc_.net_bound << std::min(z, 10);
  return std::clamp<Tick>(raw, 1, sc_.async_delay_cap);
}

Tick Simulation::delay_for(std::uint32_t sender, std::uint32_t recipient,
                           const Payload &pl) {
  if (!parts_[sender].honest && !parts_[recipient].honest) {
    return 1;  // the model constrains honest-touched traffic only
  }
  if (sc_.network_mode == NetworkMode::AsyncEventual) {
    return async_delay();
  }
  const Tick t_bound = sc_.net_bound;
  if (now_ >= sc_.gst) {
    return net_rng_.uniform(1, t_bound);
  }
  const Tick flush = sc_.gst + t_bound - now_;  // lands exactly at GST + T
  switch (sc_.pre_gst_policy) {
    case PreGstPolicy::Uniform:
      return net_rng_.uniform(1, t_bound);
    case PreGstPolicy::WithholdAll:
      return flush;
    case PreGstPolicy::WithholdVotes:
      return is_block(pl) ? net_rng_.uniform(1, t_bound) : flush;
    case PreGstPolicy::RandomDelay:
      return net_rng_.uniform(1, flush);
    case PreGstPolicy::Partition: {
      const int gs = group_of(sender);
      const int gr = group_of(recipient);
      const bool same = gs == 2 || gr == 2 || gs == gr;
      return same ? net_rng_.uniform(1, t_bound) : flush;
    }
  }
  return net_rng_.uniform(1, t_bound);
}

void Simulation::send(const Payload &pl, std::uint32_t sender,
                      const std::vector<std::uint32_t> &recipients) {
  PayloadMeta &meta = meta_[payload_id(pl)];
  if (!meta.first_send) {
    meta.first_send = now_;
  }
  parts_[sender].seen.insert(payload_id(pl));  // the sender has it already
  if (parts_[sender].honest && (!meta.first_honest_touch ||
                                now_ < *meta.first_honest_touch)) {
    meta.first_honest_touch = now_;
  }
  for (std::uint32_t r : recipients) {
    if (r == sender) {
      continue;
    }
    Event ev;
    ev.kind = Event::Kind::Deliver;
    ev.participant = r;
    ev.payload = pl;
    schedule(now_ + delay_for(sender, r, pl), std::move(ev));
  }
}

void Simulation::send_all(const Payload &pl, std::uint32_t sender) {
  std::vector<std::uint32_t> all;
  for (std::uint32_t i = 0; i < parts_.size(); ++i) {
    all.push_back(i);
  }
  send(pl, sender, all);
}

std::vector<std::uint32_t> Simulation::faction_recipients(
    std::uint32_t sender, int faction) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < parts_.size(); ++i) {
    if (i == sender) {
      continue;
    }
    const int g = group_of(i);
    if (g == 2 || g == faction) {
      out.push_back(i);
    }
  }
  return out;
}

void Simulation::init_view(Participant &p, View &view, int faction) {
  view.tree = std::make_shared<BlockTree>();
  view.tree->insert(make_genesis());

  EngineConfig cfg;
  cfg.net_bound = sc_.net_bound;
  cfg.commit_backoff_max = sc_.commit_backoff_max;
  cfg.precommit_rule_iii = sc_.precommit_rule_iii;
  cfg.is_voter = true;

  const std::uint32_t index = p.index;
  BestChainFn best_chain = [this, index, faction](BlockId base) {
    Participant &me = parts_[index];
    View &v = faction == kNoFaction ? me.main : me.flavored[faction];
    const BlockId head = v.tree->best_chain_head(base);
    if (me.honest) {
      trace("best-chain-query", index,
            {{"base", json_of(base)},
             {"head", json_of(head)},
             {"last_finalized", json_of(v.engine->last_finalized())}});
    }
    return head;
  };
  PrimaryFn primary = [this](RoundNumber r) { return primary_for(sc_, r); };
  const std::string stream =
      "backoff/" + std::to_string(p.index) + "/" + std::to_string(faction);
  BackoffFn backoff = [rng = DetRng(sc_.seed, stream)](Tick max) mutable {
    return rng.uniform(0, max);
  };

  view.engine = std::make_unique<VoterState>(
      p.id, voters_, view.tree, cfg, std::move(best_chain), std::move(primary),
      std::move(backoff));

  if (faction != kNoFaction) {
    const RoundNumber commit_round = faction == 0 ? p.spec.commit_round_a
                                                  : p.spec.commit_round_b;
    const BlockId genesis = view.tree->genesis();
    view.engine->set_precommit_override(
        [commit_round, genesis](RoundNumber r, BlockId computed) {
          return r == commit_round ? computed : genesis;
        });
  }
}

void Simulation::init_participants() {
  parts_.resize(sc_.n);
  for (std::uint32_t i = 0; i < sc_.n; ++i) {
    Participant &p = parts_[i];
    p.index = i;
    p.id = VoterId{i};
    p.honest = !sc_.is_byzantine(p.id);
    p.rng = DetRng(sc_.seed, "adv/" + std::to_string(i));
    if (!p.honest) {
      p.spec = sc_.adversaries.at(i);
      p.is_conflicting = p.spec.behavior == Behavior::ConflictingFinalizer;
    }
    if (p.is_conflicting) {
      init_view(p, p.flavored[0], 0);
      init_view(p, p.flavored[1], 1);
    } else {
      init_view(p, p.main, kNoFaction);
    }
  }
}

void Simulation::insert_block(Participant &p, View &view, const Block &block) {
  std::vector<Block> todo{block};
  std::vector<BlockId> inserted;
  while (!todo.empty()) {
    const Block b = todo.back();
    todo.pop_back();
    if (view.tree->contains(b.id)) {
      continue;
    }
    if (b.parent && !view.tree->contains(*b.parent)) {
      view.orphans[*b.parent].push_back(b);
      continue;
    }
    view.tree->insert(b);
    inserted.push_back(b.id);
    auto it = view.orphans.find(b.id);
    if (it != view.orphans.end()) {
      for (const Block &child : it->second) {
        todo.push_back(child);
      }
      view.orphans.erase(it);
    }
  }
  // Replay payloads that were waiting for any block that just arrived.
  for (BlockId id : inserted) {
    auto it = view.waiting.find(id);
    if (it == view.waiting.end()) {
      continue;
    }
    const std::vector<Payload> queued = std::move(it->second);
    view.waiting.erase(it);
    for (const Payload &pl : queued) {
      route(p, view, pl);
    }
  }
}

void Simulation::route(Participant &p, View &view, const Payload &pl) {
  if (const auto *bp = std::get_if<BlockPayload>(&pl)) {
    insert_block(p, view, bp->block);
    return;
  }
  if (const auto *vp = std::get_if<VotePayload>(&pl)) {
    if (!view.tree->contains(vp->vote.target)) {
      view.waiting[vp->vote.target].push_back(pl);
      return;
    }
    view.engine->handle_vote(vp->vote);
    return;
  }
  if (const auto *cp = std::get_if<CommitPayload>(&pl)) {
    std::optional<BlockId> missing;
    if (!view.tree->contains(cp->msg.target)) {
      missing = cp->msg.target;
    }
    for (const Vote &v : cp->msg.precommits) {
      if (missing) {
        break;
      }
      if (!view.tree->contains(v.target)) {
        missing = v.target;
      }
    }
    if (missing) {
      view.waiting[*missing].push_back(pl);
      return;
    }
    const bool valid = view.engine->on_commit(cp->msg);
    if (&view == &p.main) {
      trace("commit-received", p.index,
            {{"round", cp->msg.round},
             {"target", json_of(cp->msg.target)},
             {"valid", valid}});
      if (valid && p.honest) {
        note_commit(p, cp->msg);
      }
    }
    return;
  }
  if (const auto *bc = std::get_if<BroadcastPayload>(&pl)) {
    if (!view.tree->contains(bc->block)) {
      view.waiting[bc->block].push_back(pl);
      return;
    }
    view.engine->on_primary_broadcast(bc->round, bc->block, bc->from);
    return;
  }
  if (const auto *qp = std::get_if<QueryPayload>(&pl)) {
    handle_query(p, *qp);
    return;
  }
  if (const auto *rp = std::get_if<ResponsePayload>(&pl)) {
    handle_response(p, *rp);
    return;
  }
}

void Simulation::deliver(Participant &p, const Payload &pl) {
  if (!p.seen.insert(payload_id(pl)).second) {
    return;
  }
  PayloadMeta &meta = meta_.at(payload_id(pl));
  if (p.honest) {
    if (!meta.first_honest_touch) {
      meta.first_honest_touch = now_;
    } else if (is_gossip(pl)) {
      // The partially synchronous delivery contract, asserted on every
      // first delivery to an honest participant.
      const Tick bound =
          sc_.network_mode == NetworkMode::AsyncEventual
              ? *meta.first_honest_touch + sc_.async_delay_cap
              : std::max(*meta.first_honest_touch, sc_.gst) + sc_.net_bound;
      if (now_ > bound) {
        throw std::logic_error("network bound violated at tick " +
                               std::to_string(now_));
      }
    }
    if (is_gossip(pl) && !meta.relayed) {
      meta.relayed = true;
      send_all(pl, p.index);  // gossip relay on first honest receipt
    }
  }

  if (p.is_conflicting) {
    int faction = kNoFaction;
    std::visit(
        [&](const auto &inner) {
          using T = std::decay_t<decltype(inner)>;
          if constexpr (!std::is_same_v<T, QueryPayload> &&
                        !std::is_same_v<T, ResponsePayload>) {
            faction = inner.faction;
          }
        },
        pl);
    if (faction == kNoFaction) {
      return;  // colluders ignore untagged traffic (queries, responses)
    }
    route(p, p.flavored[faction], pl);
    poll_views(p);
    return;
  }

  route(p, p.main, pl);
  poll_views(p);

  // A vote-splitter releases its held prevote early once it observes the
  // tally closing in on the threshold.
  if (p.held_prevote && std::holds_alternative<VotePayload>(pl)) {
    const RoundNumber r = p.held_prevote->round;
    if (p.main.engine->has_round(r) &&
        p.main.engine->round(r).prevotes().participant_count() + 1 >=
            voters_->threshold()) {
      release_held_prevote(p);
    }
  }
}

void Simulation::poll_views(Participant &p) {
  if (p.is_conflicting) {
    for (int f = 0; f < 2; ++f) {
      for (const Action &act : p.flavored[f].engine->poll(now_)) {
        dispatch(p, p.flavored[f], f, act);
      }
    }
    return;
  }
  for (const Action &act : p.main.engine->poll(now_)) {
    dispatch(p, p.main, kNoFaction, act);
  }
}

std::optional<BlockId> Simulation::alt_target(const Participant &p,
                                              BlockId avoid) const {
  const BlockTree &tree = *p.main.tree;
  for (BlockId id : tree.all_ids()) {
    if (!tree.same_chain(id, avoid)) {
      return id;
    }
  }
  const auto &parent = tree.block_of(avoid).parent;
  return parent;
}

BlockId Simulation::splitter_branch(const Participant &p,
                                    BlockId fallback) const {
  const BlockTree &tree = *p.main.tree;
  const BlockId base = p.main.engine->last_finalized();
  const auto &children = tree.children_of(base);
  if (children.size() < 2) {
    return fallback;
  }
  // Vote for the head of the second-strongest branch to keep the tally
  // split.
  std::vector<std::pair<std::uint64_t, BlockId>> ranked;
  for (BlockId child : children) {
    const BlockId head = tree.best_chain_head(child);
    ranked.emplace_back(tree.number_of(head), head);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  return ranked[1].second;
}

void Simulation::release_held_prevote(Participant &p) {
  if (!p.held_prevote) {
    return;
  }
  const Vote held = *p.held_prevote;
  p.held_prevote.reset();
  const BlockId target = splitter_branch(p, held.target);
  const Vote vote = make_vote(held.round, held.kind, target, p.id);
  trace(to_string(vote.kind), p.index,
        {{"round", vote.round},
         {"target", json_of(vote.target)},
         {"auth", json_of(vote).at("auth")}});
  send_all(Payload{VotePayload{vote, kNoFaction}}, p.index);
}

void Simulation::dispatch_vote(Participant &p, int faction, const Vote &vote) {
  const Behavior behavior =
      p.honest ? Behavior::Mute /*unused*/ : p.spec.behavior;

  if (!p.honest && behavior == Behavior::Mute) {
    return;  // swallowed; the engine only talks to itself
  }

  if (!p.honest && behavior == Behavior::Equivocator) {
    const auto alt = alt_target(p, vote.target);
    std::vector<std::uint32_t> evens;
    std::vector<std::uint32_t> odds;
    for (std::uint32_t i = 0; i < parts_.size(); ++i) {
      (i % 2 == 0 ? evens : odds).push_back(i);
    }
    trace(to_string(vote.kind), p.index,
          {{"round", vote.round},
           {"target", json_of(vote.target)},
           {"auth", json_of(vote).at("auth")}});
    send(Payload{VotePayload{vote, kNoFaction}}, p.index, evens);
    if (alt) {
      const Vote second = make_vote(vote.round, vote.kind, *alt, p.id);
      trace(to_string(second.kind), p.index,
            {{"round", second.round},
             {"target", json_of(second.target)},
             {"auth", json_of(second).at("auth")}});
      send(Payload{VotePayload{second, kNoFaction}}, p.index, odds);
    } else {
      send(Payload{VotePayload{vote, kNoFaction}}, p.index, odds);
    }
    return;
  }

  if (!p.honest && behavior == Behavior::VoteSplitter &&
      vote.kind == VoteKind::Prevote) {
    p.held_prevote = vote;
    p.held_release = now_ + p.spec.splitter_delay;
    Event ev;
    ev.kind = Event::Kind::SplitterRelease;
    ev.participant = p.index;
    schedule(p.held_release, std::move(ev));
    return;
  }

  trace(to_string(vote.kind), p.index,
        {{"round", vote.round},
         {"target", json_of(vote.target)},
         {"auth", json_of(vote).at("auth")}});
  if (faction == kNoFaction) {
    send_all(Payload{VotePayload{vote, outbound_tag(p)}}, p.index);
  } else {
    send(Payload{VotePayload{vote, faction}}, p.index,
         faction_recipients(p.index, faction));
  }
}

void Simulation::dispatch(Participant &p, View &view, int faction,
                          const Action &act) {
  (void)view;
  if (const auto *sr = std::get_if<StartedRound>(&act)) {
    if (faction == kNoFaction) {
      trace("round-start", p.index,
            {{"round", sr->round},
             {"prev_estimate", json_of(sr->prev_estimate)},
             {"primary", sr->primary.index}});
    }
    return;
  }
  if (const auto *cv = std::get_if<CastVote>(&act)) {
    dispatch_vote(p, faction, cv->vote);
    return;
  }
  if (const auto *pb = std::get_if<PrimaryBroadcast>(&act)) {
    if (!p.honest && p.spec.behavior == Behavior::Mute) {
      return;
    }
    if (!p.honest && p.spec.behavior == Behavior::BadPrimary) {
      if (p.rng.uniform(0, 1) == 0) {
        return;  // stay silent this round
      }
      std::vector<std::uint32_t> evens;
      std::vector<std::uint32_t> odds;
      for (std::uint32_t i = 0; i < parts_.size(); ++i) {
        (i % 2 == 0 ? evens : odds).push_back(i);
      }
      BlockId other = p.main.tree->best_chain_head(p.main.tree->genesis());
      if (other == pb->block) {
        other = p.main.tree->genesis();
      }
      send(Payload{BroadcastPayload{pb->round, pb->block, p.id, kNoFaction}},
           p.index, evens);
      send(Payload{BroadcastPayload{pb->round, other, p.id, kNoFaction}},
           p.index, odds);
      return;
    }
    if (faction == kNoFaction) {
      send_all(Payload{BroadcastPayload{pb->round, pb->block, p.id,
                                        outbound_tag(p)}},
               p.index);
    } else {
      send(Payload{BroadcastPayload{pb->round, pb->block, p.id, faction}},
           p.index, faction_recipients(p.index, faction));
    }
    return;
  }
  if (const auto *wake = std::get_if<ScheduleWake>(&act)) {
    Event ev;
    ev.kind = Event::Kind::Poll;
    ev.participant = p.index;
    schedule(wake->at, std::move(ev));
    return;
  }
  if (const auto *ec = std::get_if<EmitCommit>(&act)) {
    if (!p.honest && p.spec.behavior == Behavior::Mute) {
      return;
    }
    nlohmann::json precommits = nlohmann::json::array();
    for (const Vote &v : ec->msg.precommits) {
      precommits.push_back(json_of(v));
    }
    trace("commit-sent", p.index,
          {{"round", ec->msg.round},
           {"target", json_of(ec->msg.target)},
           {"precommits", std::move(precommits)}});
    if (faction == kNoFaction) {
      send_all(Payload{CommitPayload{ec->msg, outbound_tag(p)}}, p.index);
    } else {
      send(Payload{CommitPayload{ec->msg, faction}}, p.index,
           faction_recipients(p.index, faction));
    }
    if (p.honest) {
      note_commit(p, ec->msg);
    }
    return;
  }
  if (const auto *fin = std::get_if<Finalization>(&act)) {
    if (faction == kNoFaction) {
      trace("finalise", p.index,
            {{"block", json_of(fin->block)},
             {"number", fin->number},
             {"round", fin->round}});
    }
    return;
  }
}

void Simulation::produce(std::uint64_t slot) {
  const std::uint32_t index =
      static_cast<std::uint32_t>((slot - 1) % parts_.size());
  Participant &p = parts_[index];
  if (!p.honest && (p.spec.behavior == Behavior::Mute || p.is_conflicting)) {
    return;  // mute voters and colluders skip their production slots
  }
  const BlockId base = p.main.engine->last_finalized();
  const BlockId head = p.main.tree->best_chain_head(base);
  if (p.honest) {
    trace("best-chain-query", p.index,
          {{"base", json_of(base)},
           {"head", json_of(head)},
           {"last_finalized", json_of(base)}});
  }
  const Block block{derive_block_id(head, p.id, slot), head,
                    p.main.tree->number_of(head) + 1};
  insert_block(p, p.main, block);
  trace("block-produced", p.index,
        {{"block", json_of(block.id)},
         {"parent", json_of(head)},
         {"number", block.number},
         {"slot", slot}});
  const int faction =
      sc_.pre_gst_policy == PreGstPolicy::Partition ? group_of(index)
                                                    : kNoFaction;
  send_all(Payload{BlockPayload{block, faction}}, p.index);
  poll_views(p);
}

void Simulation::note_commit(Participant &p, const CommitMessage &msg) {
  for (const CommitMessage &prior : p.known_commits) {
    if (!p.main.tree->same_chain(prior.target, msg.target)) {
      if (!chal_) {
        begin_challenge(p, prior, msg);
      }
      break;
    }
  }
  p.known_commits.push_back(msg);
}

void Simulation::begin_challenge(Participant &p, const CommitMessage &a,
                                 const CommitMessage &b) {
  ConflictClaim claim = make_claim(a, b, voters_, *p.main.tree);
  auto result = start_challenge(claim, voters_, p.main.tree);
  chal_.emplace();
  chal_->challenger = p.index;
  if (auto *verdict = std::get_if<Verdict>(&result)) {
    nlohmann::json payload = json_of(*verdict);
    payload["claim"] = {{"commit_a", json_of(claim.commit_a)},
                        {"commit_b", json_of(claim.commit_b)}};
    trace("verdict", p.index, std::move(payload));
    chal_->done = true;
    return;
  }
  chal_->session =
      std::make_unique<ChallengeSession>(std::get<ChallengeSession>(
          std::move(result)));
  send_challenge_queries();
}

void Simulation::send_challenge_queries() {
  for (const Query &q : chal_->session->pending_queries()) {
    nlohmann::json payload = json_of(q);
    payload["step"] = chal_->step;
    trace("query", chal_->challenger, std::move(payload));
    if (q.addressee.index == chal_->challenger) {
      // The challenger can be among the questioned precommitters; it
      // answers from its own history without a network hop.
      handle_query(parts_[chal_->challenger],
                   QueryPayload{chal_->step, q, chal_->challenger});
      continue;
    }
    send(Payload{QueryPayload{chal_->step, q, chal_->challenger}},
         chal_->challenger, {q.addressee.index});
  }
  Event ev;
  ev.kind = Event::Kind::Deadline;
  ev.step = chal_->step;
  schedule(std::max(now_, sc_.gst) + 2 * sc_.net_bound, std::move(ev));
}

void Simulation::handle_query(Participant &p, const QueryPayload &q) {
  if (!p.honest) {
    return;  // Byzantine voters have no honest answer to give
  }
  Response resp;
  try {
    resp = honest_answer(*p.main.engine, q.query);
  } catch (const NotApplicableError &) {
    return;
  } catch (const std::out_of_range &) {
    return;  // never saw that round
  }
  if (p.index == q.challenger) {
    handle_response(p, ResponsePayload{q.step, p.id, std::move(resp)});
    return;
  }
  send(Payload{ResponsePayload{q.step, p.id, std::move(resp)}}, p.index,
       {q.challenger});
}

void Simulation::handle_response(Participant &p, const ResponsePayload &r) {
  if (!chal_ || chal_->done || p.index != chal_->challenger ||
      r.step != chal_->step) {
    return;
  }
  // Park the response until every referenced block is known locally.
  for (const Vote &vote : r.response.votes) {
    if (!p.main.tree->contains(vote.target)) {
      p.main.waiting[vote.target].push_back(Payload{r});
      return;
    }
  }
  const Query *q = nullptr;
  for (const Query &cand : chal_->session->pending_queries()) {
    if (cand.addressee == r.responder) {
      q = &cand;
      break;
    }
  }
  const bool valid =
      q != nullptr && verify_response(r.response, *q, voters_, *p.main.tree);
  nlohmann::json payload = json_of(r.response);
  payload["responder"] = r.responder.index;
  payload["step"] = r.step;
  payload["valid"] = valid;
  trace("response", r.responder.index, std::move(payload));
  chal_->collected.emplace_back(r.responder, r.response);
}

void Simulation::on_deadline(std::size_t step) {
  if (!chal_ || chal_->done || step != chal_->step) {
    return;
  }
  auto verdict = chal_->session->step(chal_->collected, now_);
  chal_->collected.clear();
  if (verdict) {
    nlohmann::json payload = json_of(*verdict);
    payload["claim"] = {
        {"commit_a", json_of(chal_->session->claim().commit_a)},
        {"commit_b", json_of(chal_->session->claim().commit_b)}};
    trace("verdict", chal_->challenger, std::move(payload));
    chal_->done = true;
    return;
  }
  chal_->step += 1;
  send_challenge_queries();
}

Trace Simulation::run() {
  init_participants();

  for (std::uint32_t i = 0; i < parts_.size(); ++i) {
    Event ev;
    ev.kind = Event::Kind::Poll;
    ev.participant = i;
    schedule(0, std::move(ev));
  }
  for (std::uint64_t slot = 1;
       static_cast<Tick>(slot) * sc_.block_interval <= sc_.duration; ++slot) {
    Event ev;
    ev.kind = Event::Kind::Produce;
    ev.slot = slot;
    schedule(static_cast<Tick>(slot) * sc_.block_interval, std::move(ev));
  }

  while (!queue_.empty() && queue_.top().time <= sc_.duration) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    switch (ev.kind) {
      case Event::Kind::Deliver:
        deliver(parts_[ev.participant], ev.payload);
        break;
      case Event::Kind::Poll:
        poll_views(parts_[ev.participant]);
        break;
      case Event::Kind::Produce:
        produce(ev.slot);
        break;
      case Event::Kind::Deadline:
        on_deadline(ev.step);
        break;
      case Event::Kind::SplitterRelease:
        if (parts_[ev.participant].held_prevote &&
            now_ >= parts_[ev.participant].held_release) {
          release_held_prevote(parts_[ev.participant]);
        }
        break;
    }
  }

  Trace trace_out;
  trace_out.header.tool = kToolVersion;
  trace_out.header.seed = sc_.seed;
  trace_out.header.scenario = sc_.to_json();
  trace_out.header.scenario_digest = sc_.digest();
  trace_out.events = std::move(events_);
  return trace_out;
}

}  // namespace

Trace run_scenario(const Scenario &scenario) {
  Simulation sim(scenario);
  return sim.run();
}

}  // namespace grandpa
