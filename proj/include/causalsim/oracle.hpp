#pragma once

// Trace checkers. A trace is reduced to logical app messages (a multicast's
// member envelopes collapse into one message) and per-process action
// sequences, from which two causal relations are built:
//
//   hb   (→)  edge m → m' when a process sent or delivered m before sending
//             m', plus transitivity. Every process's actions count.
//   bhb  (→B) the Byzantine variant: only correct processes' actions count, a
//             send of m counts only when m has a correct destination, a
//             delivery only when m's origin is correct, and the domain is
//             restricted to messages delivered at some correct process.
//             Messages from a Byzantine source delivered at correct processes
//             are chained in order of first correct delivery.
//
// Safety then asks: for m' preceding m with a shared correct destination, did
// that destination deliver m first? Liveness is checked against the workload
// itself, not the trace, so a send that never left a sender's backlog still
// counts as missing.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "causalsim/core.hpp"
#include "causalsim/trace.hpp"

namespace causalsim
{

struct AppMessage
{
    std::size_t id = 0;
    ProcessId origin = 0;
    PairSeq key;
    SimTime sent_at = 0;
    std::string payload;
    std::set<ProcessId> dests;
    std::map<ProcessId, SimTime> delivered_at;
    // Trace position of each delivery. Events within one tick run in a defined
    // serial order, so position comparisons see inversions that tick
    // comparisons would miss.
    std::map<ProcessId, std::size_t> delivered_pos;
};

struct MessageIndex
{
    struct Action
    {
        bool is_send = false;
        std::size_t msg = 0;
    };

    std::vector<AppMessage> messages;
    std::map<std::pair<ProcessId, PairSeq>, std::size_t> by_key;
    std::map<EnvelopeId, std::size_t> by_envelope;
    std::vector<std::vector<Action>> actions;
};

inline std::vector<bool> correct_vector(const ScenarioConfig& cfg)
{
    std::vector<bool> correct(cfg.n, true);
    for (const auto& [p, adv] : cfg.byzantine)
        if (p < cfg.n) correct[p] = false;
    return correct;
}

// Message ids are assigned in first-send trace order, so they are stable under
// mutations that only touch delivery events. Sends are registered before any
// deliveries are resolved: a tampered trace may place a delivery ahead of its
// own send, and such a delivery must still be attributed, not dropped.
inline MessageIndex index_messages(const Trace& trace, std::uint32_t n)
{
    MessageIndex idx;
    idx.actions.resize(n);
    for (const TraceEvent& ev : trace.events) {
        if (ev.kind != EventKind::send || !ev.envelope) continue;
        const Envelope& env = trace.envelope(*ev.envelope);
        if (env.kind != MsgKind::app) continue;
        PairSeq key = env.match_key.value_or(
            env.pair_seq.value_or(PairSeq{env.origin, env.dest, env.id}));
        auto [it, fresh] = idx.by_key.try_emplace({env.origin, key}, idx.messages.size());
        if (fresh) {
            AppMessage m;
            m.id = idx.messages.size();
            m.origin = env.origin;
            m.key = key;
            m.sent_at = env.sent_at;
            m.payload = env.payload;
            idx.messages.push_back(std::move(m));
        }
        idx.messages[it->second].dests.insert(env.dest);
        idx.by_envelope[env.id] = it->second;
    }
    std::vector<bool> send_seen(idx.messages.size(), false);
    for (std::size_t pos = 0; pos < trace.events.size(); ++pos) {
        const TraceEvent& ev = trace.events[pos];
        if (!ev.envelope) continue;
        const Envelope& env = trace.envelope(*ev.envelope);
        if (env.kind != MsgKind::app) continue;
        auto it = idx.by_envelope.find(env.id);
        if (it == idx.by_envelope.end()) continue;
        if (ev.kind == EventKind::send) {
            if (!send_seen[it->second]) {
                send_seen[it->second] = true;
                idx.actions[env.origin].push_back({true, it->second});
            }
        } else if (ev.kind == EventKind::deliver) {
            auto [dit, fresh] =
                idx.messages[it->second].delivered_at.try_emplace(ev.process, ev.time);
            (void)dit;
            if (fresh) {
                idx.messages[it->second].delivered_pos.emplace(ev.process, pos);
                idx.actions[ev.process].push_back({false, it->second});
            }
        }
    }
    return idx;
}

struct CausalRelation
{
    std::size_t n = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<std::vector<bool>> closure;

    bool precedes(std::size_t a, std::size_t b) const { return closure[a][b]; }

    bool irreflexive() const
    {
        for (std::size_t i = 0; i < n; ++i)
            if (closure[i][i]) return false;
        return true;
    }
};

inline void close_relation(CausalRelation& r)
{
    std::sort(r.edges.begin(), r.edges.end());
    r.edges.erase(std::unique(r.edges.begin(), r.edges.end()), r.edges.end());
    std::vector<std::vector<std::size_t>> adj(r.n);
    for (auto [a, b] : r.edges) adj[a].push_back(b);
    r.closure.assign(r.n, std::vector<bool>(r.n, false));
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < r.n; ++s) {
        stack.assign(adj[s].begin(), adj[s].end());
        while (!stack.empty()) {
            std::size_t u = stack.back();
            stack.pop_back();
            if (r.closure[s][u]) continue;
            r.closure[s][u] = true;
            for (std::size_t v : adj[u]) stack.push_back(v);
        }
    }
}

// Reference closure for cross-checking the reachability construction.
inline std::vector<std::vector<bool>> brute_force_closure(
    const std::vector<std::pair<std::size_t, std::size_t>>& edges, std::size_t n)
{
    std::vector<std::vector<bool>> m(n, std::vector<bool>(n, false));
    for (auto [a, b] : edges) m[a][b] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (m[i][k] && m[k][j]) m[i][j] = true;
    return m;
}

inline CausalRelation build_hb(const MessageIndex& idx)
{
    CausalRelation r;
    r.n = idx.messages.size();
    std::vector<bool> in_seen(r.n);
    for (const auto& acts : idx.actions) {
        std::vector<std::size_t> seen;
        std::fill(in_seen.begin(), in_seen.end(), false);
        for (const auto& a : acts) {
            if (a.is_send)
                for (std::size_t m : seen)
                    if (m != a.msg) r.edges.push_back({m, a.msg});
            if (!in_seen[a.msg]) {
                seen.push_back(a.msg);
                in_seen[a.msg] = true;
            }
        }
    }
    close_relation(r);
    return r;
}

inline CausalRelation build_bhb(const MessageIndex& idx, const std::vector<bool>& correct)
{
    CausalRelation r;
    r.n = idx.messages.size();
    std::vector<bool> in_s(r.n, false);
    for (const AppMessage& m : idx.messages)
        for (const auto& [p, t] : m.delivered_at)
            if (correct[p]) {
                in_s[m.id] = true;
                break;
            }

    std::vector<bool> in_seen(r.n);
    for (ProcessId p = 0; p < idx.actions.size(); ++p) {
        if (!correct[p]) continue;
        std::vector<std::size_t> seen;
        std::fill(in_seen.begin(), in_seen.end(), false);
        for (const auto& a : idx.actions[p]) {
            const AppMessage& m = idx.messages[a.msg];
            if (a.is_send) {
                if (in_s[a.msg])
                    for (std::size_t prior : seen)
                        if (prior != a.msg) r.edges.push_back({prior, a.msg});
                bool correct_dest = false;
                for (ProcessId d : m.dests)
                    if (correct[d]) correct_dest = true;
                if (correct_dest && in_s[a.msg] && !in_seen[a.msg]) {
                    seen.push_back(a.msg);
                    in_seen[a.msg] = true;
                }
            } else {
                if (correct[m.origin] && in_s[a.msg] && !in_seen[a.msg]) {
                    seen.push_back(a.msg);
                    in_seen[a.msg] = true;
                }
            }
        }
    }

    // Per-source delivery order at correct processes, which for a Byzantine
    // source is not implied by anything above. First correct delivery defines
    // the chain.
    std::map<ProcessId, std::vector<std::pair<SimTime, std::size_t>>> by_byz_source;
    for (const AppMessage& m : idx.messages) {
        if (correct[m.origin] || !in_s[m.id]) continue;
        SimTime first = 0;
        bool found = false;
        for (const auto& [p, t] : m.delivered_at) {
            if (!correct[p]) continue;
            if (!found || t < first) first = t;
            found = true;
        }
        by_byz_source[m.origin].push_back({first, m.id});
    }
    for (auto& [src, list] : by_byz_source) {
        std::sort(list.begin(), list.end());
        for (std::size_t i = 1; i < list.size(); ++i)
            r.edges.push_back({list[i - 1].second, list[i].second});
    }

    close_relation(r);
    return r;
}

struct SafetyViolation
{
    std::size_t early_msg = 0;     // delivered first despite being later in the order
    std::size_t late_msg = 0;      // its causal predecessor
    ProcessId at = 0;
    SimTime early_time = 0;
    std::optional<SimTime> late_time;   // empty: predecessor never delivered there
};

inline std::vector<SafetyViolation> check_safety(const MessageIndex& idx,
                                                 const CausalRelation& rel,
                                                 const std::vector<bool>& correct)
{
    std::vector<SafetyViolation> out;
    for (std::size_t a = 0; a < idx.messages.size(); ++a) {
        for (std::size_t b = 0; b < idx.messages.size(); ++b) {
            if (a == b || !rel.precedes(a, b)) continue;
            const AppMessage& ma = idx.messages[a];
            const AppMessage& mb = idx.messages[b];
            for (ProcessId d : mb.dests) {
                if (!correct[d] || !ma.dests.count(d)) continue;
                auto itb = mb.delivered_pos.find(d);
                if (itb == mb.delivered_pos.end()) continue;
                auto ita = ma.delivered_pos.find(d);
                if (ita == ma.delivered_pos.end() || ita->second > itb->second) {
                    SafetyViolation v;
                    v.early_msg = b;
                    v.late_msg = a;
                    v.at = d;
                    v.early_time = mb.delivered_at.at(d);
                    if (ita != ma.delivered_pos.end()) v.late_time = ma.delivered_at.at(d);
                    out.push_back(v);
                }
            }
        }
    }
    return out;
}

struct LivenessMiss
{
    ProcessId sender = 0;
    ProcessId dest = 0;
    std::size_t expected = 0;
    std::size_t got = 0;
};

inline std::vector<LivenessMiss> check_liveness(const MessageIndex& idx,
                                                const ScenarioConfig& cfg)
{
    std::vector<bool> correct = correct_vector(cfg);
    std::map<std::pair<ProcessId, ProcessId>, std::size_t> expected;
    for (const WorkloadSend& w : cfg.workload) {
        if (w.sender >= cfg.n || !correct[w.sender]) continue;
        if (w.group) {
            for (ProcessId d : w.group->members)
                if (correct[d]) expected[{w.sender, d}]++;
        } else if (w.dest && *w.dest < cfg.n && correct[*w.dest]) {
            expected[{w.sender, *w.dest}]++;
        }
    }
    std::map<std::pair<ProcessId, ProcessId>, std::size_t> got;
    for (const AppMessage& m : idx.messages)
        for (const auto& [d, t] : m.delivered_at) got[{m.origin, d}]++;

    std::vector<LivenessMiss> out;
    for (const auto& [pair, want] : expected) {
        std::size_t have = got.count(pair) ? got[pair] : 0;
        if (have < want) out.push_back({pair.first, pair.second, want, have});
    }
    return out;
}

struct CsBoundReport
{
    SimDuration bound_stated = 0;   // max(ds, dr + max(ds, dr))
    SimDuration bound_alt = 0;      // 2*dr + ds
    SimDuration max_delay = 0;
    double mean_delay = 0.0;
    std::size_t checked = 0;
    std::vector<EnvelopeId> over_stated;
    std::vector<EnvelopeId> over_alt;

    bool stated_held() const { return over_stated.empty(); }
};

// Queueing delay per delivered app envelope at correct processes, from its
// push into the per-source queue to its delivery, against the stated bound.
inline CsBoundReport check_cs_bound(const Trace& trace, const ScenarioConfig& cfg)
{
    CsBoundReport rep;
    SimDuration ds = cfg.delta_s;
    SimDuration dr = cfg.effective_delta_r();
    rep.bound_stated = std::max(ds, dr + std::max(ds, dr));
    rep.bound_alt = 2 * dr + ds;
    std::vector<bool> correct = correct_vector(cfg);

    std::map<EnvelopeId, SimTime> pushed;
    double sum = 0.0;
    for (const TraceEvent& ev : trace.events) {
        if (!ev.envelope) continue;
        const Envelope& env = trace.envelope(*ev.envelope);
        if (env.kind != MsgKind::app) continue;
        if (ev.kind == EventKind::push) {
            pushed.try_emplace(env.id, ev.time);
        } else if (ev.kind == EventKind::deliver && ev.process < cfg.n &&
                   correct[ev.process]) {
            auto it = pushed.find(env.id);
            if (it == pushed.end()) continue;
            SimDuration delay = ev.time - it->second;
            rep.checked++;
            sum += static_cast<double>(delay);
            rep.max_delay = std::max(rep.max_delay, delay);
            if (delay > rep.bound_stated) rep.over_stated.push_back(env.id);
            if (delay > rep.bound_alt) rep.over_alt.push_back(env.id);
        }
    }
    if (rep.checked) rep.mean_delay = sum / static_cast<double>(rep.checked);
    return rep;
}

struct EarlyDeletion
{
    EnvelopeId delivered_ctl = 0;
    ProcessId at = 0;
    SimTime deleted_at = 0;
    std::optional<SimTime> sent_processed_at;   // empty: never processed
};

// A delivered-control between a correct sender and receiver must never expire
// out of the queue before the matching sent-control has been processed at the
// same observer. Tick-level ties resolve by trace order.
inline std::vector<EarlyDeletion> check_lemma1(const Trace& trace, const ScenarioConfig& cfg)
{
    std::vector<bool> correct = correct_vector(cfg);
    std::map<EnvelopeId, std::size_t> erase_index;
    for (std::size_t i = 0; i < trace.events.size(); ++i)
        if (trace.events[i].kind == EventKind::erase && trace.events[i].envelope)
            erase_index.try_emplace(*trace.events[i].envelope, i);

    std::map<std::pair<ProcessId, PairSeq>, EnvelopeId> sent_at_observer;
    for (const Envelope& env : trace.envelopes)
        if (env.kind == MsgKind::control && env.control && env.control->tag == CtlTag::sent)
            sent_at_observer.try_emplace({env.dest, env.control->seq}, env.id);

    std::vector<EarlyDeletion> out;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        const TraceEvent& ev = trace.events[i];
        if (ev.kind != EventKind::erase || ev.detail != "expired" || !ev.envelope) continue;
        const Envelope& env = trace.envelope(*ev.envelope);
        if (env.kind != MsgKind::control || !env.control ||
            env.control->tag != CtlTag::delivered)
            continue;
        if (ev.process >= cfg.n || !correct[ev.process]) continue;
        ProcessId deliverer = env.control->actor;
        if (deliverer >= cfg.n || !correct[deliverer]) continue;
        if (!env.control->subject_is_group()) {
            ProcessId source = env.control->subject_process();
            if (source >= cfg.n || !correct[source]) continue;
        }
        auto sit = sent_at_observer.find({ev.process, env.control->seq});
        if (sit == sent_at_observer.end()) continue;
        auto eit = erase_index.find(sit->second);
        if (eit == erase_index.end() || eit->second > i) {
            EarlyDeletion ed;
            ed.delivered_ctl = env.id;
            ed.at = ev.process;
            ed.deleted_at = ev.time;
            if (eit != erase_index.end()) ed.sent_processed_at = trace.events[eit->second].time;
            out.push_back(ed);
        }
    }
    return out;
}

struct PlantedInversion
{
    std::size_t event_a = 0;   // earlier deliver event index
    std::size_t event_b = 0;   // later deliver event index
    std::size_t msg_early = 0; // message whose delivery is moved earlier
    std::size_t msg_late = 0;
    ProcessId at = 0;
};

// Chooses a pair of causally ordered deliveries at one process and swaps their
// envelope references, manufacturing a trace in which the successor lands
// first. The checker, run with the original relation, must flag it.
inline std::optional<PlantedInversion> plan_delivery_inversion(const Trace& trace,
                                                               const MessageIndex& idx,
                                                               const CausalRelation& rel,
                                                               std::uint64_t pick)
{
    std::vector<PlantedInversion> candidates;
    std::map<ProcessId, std::vector<std::pair<std::size_t, std::size_t>>> delivered;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        const TraceEvent& ev = trace.events[i];
        if (ev.kind != EventKind::deliver || !ev.envelope) continue;
        auto mit = idx.by_envelope.find(*ev.envelope);
        if (mit == idx.by_envelope.end()) continue;
        for (const auto& [earlier_event, earlier_msg] : delivered[ev.process]) {
            if (earlier_msg != mit->second && rel.precedes(earlier_msg, mit->second)) {
                PlantedInversion inv;
                inv.event_a = earlier_event;
                inv.event_b = i;
                inv.msg_early = mit->second;
                inv.msg_late = earlier_msg;
                inv.at = ev.process;
                candidates.push_back(inv);
            }
        }
        delivered[ev.process].push_back({i, mit->second});
    }
    if (candidates.empty()) return std::nullopt;
    return candidates[pick % candidates.size()];
}

inline Trace apply_inversion(Trace trace, const PlantedInversion& inv)
{
    std::swap(trace.events[inv.event_a].envelope, trace.events[inv.event_b].envelope);
    return trace;
}

} // namespace causalsim
