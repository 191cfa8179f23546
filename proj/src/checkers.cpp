/**
 * Copyright grandpa-lab authors
 * SPDX-License-Identifier: Apache-2.0
 */

#include "grandpa/checkers.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "grandpa/simnet.hpp"

namespace grandpa {

namespace {

struct VoterTimeline {
  std::map<RoundNumber, Tick> round_start;
  std::map<RoundNumber, BlockId> round_prev_estimate;
  std::map<RoundNumber, Tick> prevote_at;
  std::map<RoundNumber, Tick> precommit_at;
  // (time, block) finalisations in trace order
  std::vector<std::pair<Tick, BlockId>> finalized;

  bool finalized_by(BlockId b, Tick deadline) const {
    for (const auto &[t, blk] : finalized) {
      if (blk == b && t <= deadline) {
        return true;
      }
    }
    return false;
  }
};

struct BestChainQuery {
  Tick time = 0;
  std::uint32_t actor = 0;
  BlockId base;
  BlockId head;
  BlockId last_finalized;
};

struct TraceIndex {
  BlockTree tree;
  std::map<BlockId, Tick> produced_at;
  std::map<std::uint32_t, VoterTimeline> honest;
  std::vector<BestChainQuery> queries;              // honest actors only
  std::map<RoundNumber, Tick> t_r;                  // min honest round entry
  std::map<RoundNumber, std::vector<Vote>> honest_prevotes;
  // first honest finalisation time per block
  std::map<BlockId, Tick> first_finalized;
  // deepest honest-finalised block per round (for the estimate corollary)
  std::map<RoundNumber, BlockId> deepest_final_by_round;
  std::uint64_t verdict_count = 0;
};

TraceIndex build_index(const Trace &trace, const Scenario &sc) {
  TraceIndex ix;
  ix.tree.insert(make_genesis());
  for (const TraceEvent &ev : trace.events) {
    if (ev.kind == "block-produced") {
      const Block block{block_id_from_json(ev.payload.at("block")),
                        block_id_from_json(ev.payload.at("parent")),
                        ev.payload.at("number").get<std::uint64_t>()};
      ix.tree.insert(block);
      ix.produced_at.emplace(block.id, ev.time);
    }
  }

  auto is_honest = [&](std::int64_t actor) {
    return actor >= 0 && !sc.is_byzantine(VoterId{
                             static_cast<std::uint32_t>(actor)});
  };

  for (const TraceEvent &ev : trace.events) {
    if (ev.kind == "verdict") {
      ++ix.verdict_count;
    }
    if (!is_honest(ev.actor)) {
      continue;
    }
    const auto actor = static_cast<std::uint32_t>(ev.actor);
    VoterTimeline &tl = ix.honest[actor];
    if (ev.kind == "round-start") {
      const auto r = ev.payload.at("round").get<RoundNumber>();
      tl.round_start.emplace(r, ev.time);
      tl.round_prev_estimate.emplace(
          r, block_id_from_json(ev.payload.at("prev_estimate")));
      auto it = ix.t_r.find(r);
      if (it == ix.t_r.end() || ev.time < it->second) {
        ix.t_r[r] = ev.time;
      }
    } else if (ev.kind == "prevote" || ev.kind == "precommit") {
      const auto r = ev.payload.at("round").get<RoundNumber>();
      auto &at = ev.kind == "prevote" ? tl.prevote_at : tl.precommit_at;
      auto [it, fresh] = at.emplace(r, ev.time);
      if (!fresh && ev.time < it->second) {
        it->second = ev.time;  // earliest cast is what the bounds constrain
      }
      if (ev.kind == "prevote") {
        ix.honest_prevotes[r].push_back(
            make_vote(r, VoteKind::Prevote,
                      block_id_from_json(ev.payload.at("target")),
                      VoterId{actor}));
      }
    } else if (ev.kind == "finalise") {
      const BlockId block = block_id_from_json(ev.payload.at("block"));
      const auto r = ev.payload.at("round").get<RoundNumber>();
      tl.finalized.emplace_back(ev.time, block);
      auto it = ix.first_finalized.find(block);
      if (it == ix.first_finalized.end()) {
        ix.first_finalized.emplace(block, ev.time);
      }
      auto dit = ix.deepest_final_by_round.find(r);
      if (dit == ix.deepest_final_by_round.end() ||
          ix.tree.number_of(block) > ix.tree.number_of(dit->second)) {
        ix.deepest_final_by_round[r] = block;
      }
    } else if (ev.kind == "best-chain-query") {
      ix.queries.push_back(BestChainQuery{
          ev.time, actor, block_id_from_json(ev.payload.at("base")),
          block_id_from_json(ev.payload.at("head")),
          block_id_from_json(ev.payload.at("last_finalized"))});
    }
  }
  return ix;
}

std::string block_str(const BlockTree &tree, BlockId b) {
  return to_string(b) + "#" + std::to_string(tree.number_of(b));
}

void check_safety(const TraceIndex &ix, std::vector<Violation> &out) {
  std::map<std::uint64_t, std::pair<BlockId, std::uint32_t>> by_number;
  for (const auto &[actor, tl] : ix.honest) {
    for (const auto &[t, block] : tl.finalized) {
      const auto number = ix.tree.number_of(block);
      auto [it, fresh] = by_number.emplace(number, std::make_pair(block, actor));
      if (!fresh && it->second.first != block) {
        out.push_back(Violation{
            "safety", t, actor,
            "conflicting finalisation at height " + std::to_string(number) +
                ": " + block_str(ix.tree, block) + " vs " +
                block_str(ix.tree, it->second.first) + " (voter " +
                std::to_string(it->second.second) + ")"});
      }
    }
  }
}

void check_estimate_corollary(const TraceIndex &ix,
                              std::vector<Violation> &out) {
  if (ix.deepest_final_by_round.empty()) {
    return;
  }
  // Prefix-deepest finalised block per round index.
  std::map<RoundNumber, BlockId> prefix;
  std::optional<BlockId> deepest;
  for (const auto &[r, block] : ix.deepest_final_by_round) {
    if (!deepest ||
        ix.tree.number_of(block) > ix.tree.number_of(*deepest)) {
      deepest = block;
    }
    prefix[r] = *deepest;
  }
  auto deepest_up_to = [&](RoundNumber r) -> std::optional<BlockId> {
    auto it = prefix.upper_bound(r);
    if (it == prefix.begin()) {
      return std::nullopt;
    }
    return std::prev(it)->second;
  };

  for (const auto &[actor, tl] : ix.honest) {
    for (const auto &[r, estimate] : tl.round_prev_estimate) {
      const RoundNumber completable_round = r - 1;
      const auto must_cover = deepest_up_to(completable_round);
      if (!must_cover) {
        continue;
      }
      if (!ix.tree.is_descendant_or_equal(estimate, *must_cover)) {
        out.push_back(Violation{
            "estimate-corollary", tl.round_start.at(r),
            static_cast<std::int64_t>(actor),
            "E_" + std::to_string(completable_round) + " = " +
                block_str(ix.tree, estimate) + " does not cover finalised " +
                block_str(ix.tree, *must_cover)});
      }
    }
  }
}

void check_timing(const TraceIndex &ix, const Scenario &sc,
                  std::vector<Violation> &out) {
  const Tick t_net = sc.net_bound;
  for (const auto &[r, t_r] : ix.t_r) {
    if (t_r < sc.gst) {
      continue;  // the lemma's premise needs the round to start after GST
    }
    for (const auto &[actor, tl] : ix.honest) {
      const auto started = tl.round_start.find(r);
      // (i) every honest participant enters within T of the first.
      if (started == tl.round_start.end()) {
        if (t_r + t_net <= sc.duration) {
          out.push_back(
              Violation{"timing-entry", t_r, static_cast<std::int64_t>(actor),
                        "round " + std::to_string(r) + " not entered by t_r+T"});
        }
        continue;
      }
      if (started->second > t_r + t_net) {
        out.push_back(Violation{
            "timing-entry", started->second, static_cast<std::int64_t>(actor),
            "round " + std::to_string(r) + " entered at " +
                std::to_string(started->second) + " > t_r+T = " +
                std::to_string(t_r + t_net)});
      }
      // (ii) no honest prevote before t_r + 2T.
      const auto pv = tl.prevote_at.find(r);
      if (pv != tl.prevote_at.end() && pv->second < t_r + 2 * t_net) {
        out.push_back(Violation{
            "timing-prevote", pv->second, static_cast<std::int64_t>(actor),
            "round " + std::to_string(r) + " prevote at " +
                std::to_string(pv->second) + " < t_r+2T = " +
                std::to_string(t_r + 2 * t_net)});
      }
      // (iii) precommit by t_{r,v} + 4T.
      const Tick pc_deadline = started->second + 4 * t_net;
      const auto pc = tl.precommit_at.find(r);
      if (pc_deadline <= sc.duration &&
          (pc == tl.precommit_at.end() || pc->second > pc_deadline)) {
        out.push_back(Violation{
            "timing-precommit",
            pc == tl.precommit_at.end() ? pc_deadline : pc->second,
            static_cast<std::int64_t>(actor),
            "round " + std::to_string(r) + " precommit missed t_{r,v}+4T = " +
                std::to_string(pc_deadline)});
      }
      // (iv) next round entered by t_r + 6T.
      const Tick next_deadline = t_r + 6 * t_net;
      const auto next = tl.round_start.find(r + 1);
      if (next_deadline <= sc.duration &&
          (next == tl.round_start.end() || next->second > next_deadline)) {
        out.push_back(Violation{
            "timing-next-round",
            next == tl.round_start.end() ? next_deadline : next->second,
            static_cast<std::int64_t>(actor),
            "round " + std::to_string(r + 1) + " not entered by t_r+6T = " +
                std::to_string(next_deadline)});
      }
    }
    // Honest voters finalise g(H_r) by t_r + 6T.
    const auto hr = ix.honest_prevotes.find(r);
    if (hr == ix.honest_prevotes.end() || t_r + 6 * t_net > sc.duration) {
      continue;
    }
    // Only assert once every honest voter's prevote is in H_r; otherwise
    // the set is still growing at the duration cutoff.
    if (hr->second.size() < ix.honest.size()) {
      continue;
    }
    auto voters = std::make_shared<VoterSet>(sc.n, sc.f);
    VoteSet h_r(voters, VoteKind::Prevote, r);
    for (const Vote &vote : hr->second) {
      h_r.record(vote);
    }
    const auto g_hr = ghost(h_r, ix.tree);
    if (!g_hr || ix.tree.number_of(*g_hr) == 0) {
      continue;
    }
    for (const auto &[actor, tl] : ix.honest) {
      if (!tl.finalized_by(*g_hr, t_r + 6 * t_net)) {
        out.push_back(Violation{
            "timing-ghost-finalise", t_r + 6 * t_net,
            static_cast<std::int64_t>(actor),
            "g(H_" + std::to_string(r) + ") = " + block_str(ix.tree, *g_hr) +
                " not finalised by t_r+6T"});
      }
    }
  }
}

void check_honest_primary(const TraceIndex &ix, const Scenario &sc,
                          std::vector<Violation> &out) {
  for (const auto &[r, t_r] : ix.t_r) {
    if (t_r < sc.gst || t_r + 6 * sc.net_bound > sc.duration) {
      continue;
    }
    const VoterId primary = primary_for(sc, r);
    if (sc.is_byzantine(primary)) {
      continue;
    }
    const auto tl_it = ix.honest.find(primary.index);
    if (tl_it == ix.honest.end()) {
      continue;
    }
    const auto est = tl_it->second.round_prev_estimate.find(r);
    if (est == tl_it->second.round_prev_estimate.end()) {
      continue;  // primary never started r inside the run
    }
    const BlockId b = est->second;
    if (ix.tree.number_of(b) == 0) {
      continue;  // genesis: finalised from the start for everyone
    }
    const Tick deadline = t_r + 6 * sc.net_bound;
    for (const auto &[actor, tl] : ix.honest) {
      bool ok = tl.finalized_by(b, deadline);
      if (!ok) {
        // Also accept having finalised it before this round began.
        for (const auto &[t, blk] : tl.finalized) {
          if (t <= deadline && ix.tree.is_descendant_or_equal(blk, b)) {
            ok = true;
            break;
          }
        }
      }
      if (!ok) {
        out.push_back(Violation{
            "honest-primary", deadline, static_cast<std::int64_t>(actor),
            "round " + std::to_string(r) + " primary block " +
                block_str(ix.tree, b) + " not finalised by t_r+6T = " +
                std::to_string(deadline)});
      }
    }
  }
}

void check_deadlock(const TraceIndex &ix, const Scenario &sc,
                    std::vector<Violation> &out) {
  // Conservative per-run proxy: some honest round entry must land in the
  // final window of a sufficiently long post-GST run. The acceptance
  // suite additionally compares checkpoints across growing durations.
  const Tick unit = sc.network_mode == NetworkMode::AsyncEventual
                        ? 3 * sc.async_delay_cap
                        : 6 * sc.net_bound;
  const Tick window = 20 * unit;
  const Tick observable_from = sc.gst + 10 * sc.net_bound;
  if (sc.duration - observable_from < 2 * window) {
    return;  // too short to judge
  }
  Tick last_start = 0;
  for (const auto &[actor, tl] : ix.honest) {
    for (const auto &[r, t] : tl.round_start) {
      last_start = std::max(last_start, t);
    }
  }
  if (last_start < sc.duration - window) {
    out.push_back(Violation{
        "deadlock", last_start, -1,
        "no honest round entry after tick " + std::to_string(last_start) +
            " in a run of " + std::to_string(sc.duration)});
  }
}

RoundNumber max_consecutive_byzantine_primaries(const Scenario &sc,
                                                const TraceIndex &ix,
                                                Tick from, Tick to) {
  RoundNumber longest = 0;
  RoundNumber current = 0;
  for (const auto &[r, t_r] : ix.t_r) {
    if (t_r < from || t_r > to) {
      continue;
    }
    if (sc.is_byzantine(primary_for(sc, r))) {
      ++current;
      longest = std::max(longest, current);
    } else {
      current = 0;
    }
  }
  return longest;
}

void check_recent_validity(const TraceIndex &ix, const Scenario &sc,
                           std::vector<Violation> &out) {
  for (const auto &[block, t_fin] : ix.first_finalized) {
    if (ix.tree.number_of(block) == 0) {
      continue;
    }
    if (t_fin < sc.gst + 6 * sc.net_bound) {
      continue;  // the corollary's window premise needs t - 6T > t' >= GST
    }
    const RoundNumber runs =
        max_consecutive_byzantine_primaries(sc, ix, sc.gst, t_fin);
    const Tick window = 6 * sc.net_bound * static_cast<Tick>(runs + 1);
    const Tick lower = std::max(sc.gst, t_fin - window);
    bool seen = false;
    for (const BestChainQuery &q : ix.queries) {
      if (q.time < lower || q.time > t_fin) {
        continue;
      }
      if (ix.tree.is_descendant_or_equal(q.head, block) &&
          ix.tree.is_descendant_or_equal(block, q.last_finalized)) {
        seen = true;
        break;
      }
    }
    if (!seen) {
      out.push_back(Violation{
          "recent-validity", t_fin, -1,
          block_str(ix.tree, block) +
              " finalised without appearing in any honest best chain in "
              "the last " +
              std::to_string(window) + " ticks"});
    }
  }
}

void check_fast_termination(const TraceIndex &ix, const Scenario &sc,
                            std::vector<Violation> &out) {
  // Premise: honest primary, the round starts T past GST, and every
  // honest prevoter's best chain agrees on the same child of the deepest
  // block finalised in earlier rounds. Conclusion checked at the proved
  // 6T granularity; the observed latency is also reported against T.
  const auto voters = std::make_shared<VoterSet>(sc.n, sc.f);
  for (const auto &[r, t_r] : ix.t_r) {
    if (t_r < sc.gst + sc.net_bound || t_r + 6 * sc.net_bound > sc.duration) {
      continue;
    }
    if (sc.is_byzantine(primary_for(sc, r))) {
      continue;
    }
    std::optional<BlockId> base;  // deepest block finalised in rounds < r
    for (const auto &[round, block] : ix.deepest_final_by_round) {
      if (round < r &&
          (!base || ix.tree.number_of(block) > ix.tree.number_of(*base))) {
        base = block;
      }
    }
    if (!base) {
      continue;
    }
    const auto hr = ix.honest_prevotes.find(r);
    if (hr == ix.honest_prevotes.end() ||
        hr->second.size() < ix.honest.size()) {
      continue;
    }
    std::optional<BlockId> agreed_child;
    bool agree = true;
    for (const Vote &vote : hr->second) {
      if (!ix.tree.strictly_descends(vote.target, *base)) {
        agree = false;
        break;
      }
      const BlockId child =
          ix.tree.ancestor_at(vote.target, ix.tree.number_of(*base) + 1);
      if (!agreed_child) {
        agreed_child = child;
      } else if (*agreed_child != child) {
        agree = false;
        break;
      }
    }
    if (!agree || !agreed_child) {
      continue;
    }
    const Tick deadline = t_r + 6 * sc.net_bound;
    for (const auto &[actor, tl] : ix.honest) {
      if (!tl.finalized_by(*agreed_child, deadline)) {
        out.push_back(Violation{
            "fast-termination", deadline, static_cast<std::int64_t>(actor),
            "agreed child " + block_str(ix.tree, *agreed_child) +
                " of round " + std::to_string(r) +
                " not finalised within 6T of round start"});
      }
    }
  }
}

RunStats compute_stats(const TraceIndex &ix, const Scenario &sc) {
  RunStats stats;
  stats.blocks_produced = ix.produced_at.size();
  stats.verdicts = ix.verdict_count;

  std::vector<Tick> latencies;
  for (const auto &[block, t_fin] : ix.first_finalized) {
    auto it = ix.produced_at.find(block);
    if (it != ix.produced_at.end()) {
      latencies.push_back(t_fin - it->second);
    }
  }
  stats.blocks_finalized = ix.first_finalized.size();
  std::sort(latencies.begin(), latencies.end());
  if (!latencies.empty()) {
    stats.latency_p50 = latencies[latencies.size() / 2];
    stats.latency_p90 = latencies[latencies.size() * 9 / 10];
    stats.latency_max = latencies.back();
  }

  for (const auto &[actor, tl] : ix.honest) {
    for (const auto &[r, t] : tl.round_start) {
      stats.max_round_started = std::max(stats.max_round_started, r);
      stats.last_round_start = std::max(stats.last_round_start, t);
      if (r >= 1) {
        stats.max_round_completed = std::max(stats.max_round_completed, r - 1);
      }
    }
  }
  if (stats.blocks_finalized > 0) {
    stats.rounds_per_finalization =
        static_cast<double>(stats.max_round_started) /
        static_cast<double>(stats.blocks_finalized);
  }
  (void)sc;
  return stats;
}

}  // namespace

std::string CheckReport::summary() const {
  std::ostringstream out;
  out << "blocks produced/finalized: " << stats.blocks_produced << "/"
      << stats.blocks_finalized << ", max round started: "
      << stats.max_round_started << ", finalisation latency p50/p90/max: "
      << stats.latency_p50 << "/" << stats.latency_p90 << "/"
      << stats.latency_max << " ticks";
  if (stats.blocks_finalized > 0) {
    out << ", rounds per finalisation: " << stats.rounds_per_finalization;
  }
  if (stats.verdicts > 0) {
    out << ", verdicts: " << stats.verdicts;
  }
  out << '\n';
  if (violations.empty()) {
    out << "all checkers passed\n";
  } else {
    out << violations.size() << " violation(s):\n";
    for (const Violation &v : violations) {
      out << "  [" << v.code << "] t=" << v.time;
      if (v.actor >= 0) {
        out << " voter " << v.actor;
      }
      out << ": " << v.detail << '\n';
    }
  }
  return out.str();
}

CheckReport run_checkers(const Trace &trace, const Scenario &scenario) {
  TraceIndex ix = build_index(trace, scenario);
  CheckReport report;
  check_safety(ix, report.violations);
  // The lemma-based checkers assume at most f Byzantine voters; in
  // over-f accountability runs the safety checker is the signal.
  if (scenario.adversaries.size() <= scenario.f) {
    check_estimate_corollary(ix, report.violations);
    // The timed lemmas additionally assume the GST/T delivery model;
    // asynchronous mode keeps only deadlock freeness.
    if (scenario.network_mode == NetworkMode::PartialSynchrony) {
      check_timing(ix, scenario, report.violations);
      check_honest_primary(ix, scenario, report.violations);
      check_recent_validity(ix, scenario, report.violations);
      check_fast_termination(ix, scenario, report.violations);
    }
    check_deadlock(ix, scenario, report.violations);
  }
  report.stats = compute_stats(ix, scenario);
  return report;
}

}  // namespace grandpa
