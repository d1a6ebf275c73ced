#pragma once

// Channel Sync causal ordering. Every process keeps one FIFO queue per source
// and learns about remote activity through control messages: a sent-control
// fans out when a message is sent, a delivered-control fans out when one is
// delivered. A delivered-control at the head of its queue holds the queue
// until the matching sent-control has been processed or a delta_r timer runs
// out, which is what stops a Byzantine pair from freezing correct processes.
// Sent-controls hold their queue for at most delta_s and clear their matched
// delivered-controls when done. App messages deliver the moment they are
// popped.
//
// Multicast differs in three ways: the sent-control names the whole group and
// goes to every other process, its timer stops only once delivered-controls
// from all members were matched, and completion clears all matched entries.
// The hide-group variant keeps group membership private: its sent-controls
// name only the recipient, carry no timer, block nothing, and delete nothing,
// but still release matching delivered-controls from their wait.

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "causalsim/core.hpp"
#include "causalsim/simnet.hpp"
#include "causalsim/trace.hpp"

namespace causalsim
{

struct CsOptions
{
    bool hide_group = false;
    // With delta_s == 0 a sent-control needs no real timer; a boolean flag
    // carries the same information. Observable behavior must not change.
    bool flag_variant = false;
};

class CsProcess : public ProcessHandler
{
public:
    CsProcess(ProcessId me, std::uint32_t n, SimDuration delta_s, SimDuration delta_r,
              CsOptions opt = {})
        : m_me(me), m_n(n), m_delta_s(delta_s), m_delta_r(delta_r), m_opt(opt), m_queues(n),
          m_popped(n), m_next_seq(n, 0)
    {
    }

    void on_workload(SimEngine& eng, const WorkloadSend& w) override
    {
        if (w.group)
            send_group(eng, *w.group, w.payload);
        else
            send_p2p(eng, *w.dest, w.payload);
    }

    void on_arrival(SimEngine& eng, const Envelope& env) override
    {
        if (env.kind == MsgKind::ack) {
            eng.note(m_me, EventKind::drop, env.id, "unexpected ack");
            return;
        }
        if (env.kind == MsgKind::control) {
            if (!env.control) {
                eng.note(m_me, EventKind::drop, env.id, "malformed control");
                return;
            }
            if (env.control->actor != env.origin) {
                eng.note(m_me, EventKind::drop, env.id, "forged actor");
                return;
            }
        }
        auto e = std::make_shared<Entry>();
        e->env = env;
        m_queues[env.origin].push_back(e);
        eng.note(m_me, EventKind::push, env.id);
        if (env.kind == MsgKind::control) admit_control(eng, e);
        progress(eng);
    }

    void on_timer(SimEngine& eng, TimerId id) override
    {
        auto it = m_by_timer.find(id);
        if (it == m_by_timer.end()) return;
        EntryPtr e = it->second;
        m_by_timer.erase(it);
        if (e->deleted) return;
        e->expired = true;
        progress(eng);
    }

private:
    struct Entry
    {
        Envelope env;
        std::optional<TimerId> timer;
        bool expired = false;
        bool matched = false;
        bool deleted = false;
        bool hide_style = false;          // blocks nothing, clears nothing
        std::set<ProcessId> remaining;    // deliverers still owed for a sent-control
    };

    using EntryPtr = std::shared_ptr<Entry>;

    void send_p2p(SimEngine& eng, ProcessId dest, const std::string& payload)
    {
        PairSeq key{m_me, dest, ++m_next_seq[dest]};
        SendSpec app;
        app.dest = dest;
        app.kind = MsgKind::app;
        app.payload = payload;
        app.pair_seq = key;
        app.match_key = key;
        eng.submit(m_me, std::move(app));
        for (ProcessId x = 0; x < m_n; ++x) {
            if (x == m_me || x == dest) continue;
            SendSpec c;
            c.dest = x;
            c.kind = MsgKind::control;
            c.match_key = key;
            c.control = ControlBody{CtlTag::sent, m_me, dest, key};
            eng.submit(m_me, std::move(c));
        }
    }

    void send_group(SimEngine& eng, const GroupSet& group, const std::string& payload)
    {
        PairSeq key{m_me, m_me, ++m_next_group};
        for (ProcessId d : group.members) {
            SendSpec app;
            app.dest = d;
            app.kind = MsgKind::app;
            app.payload = payload;
            app.pair_seq = PairSeq{m_me, d, ++m_next_seq[d]};
            app.match_key = key;
            app.group = group;
            eng.submit(m_me, std::move(app));
        }
        for (ProcessId x = 0; x < m_n; ++x) {
            if (x == m_me) continue;
            SendSpec c;
            c.dest = x;
            c.kind = MsgKind::control;
            c.match_key = key;
            if (m_opt.hide_group)
                c.control = ControlBody{CtlTag::sent, m_me, x, key};
            else
                c.control = ControlBody{CtlTag::sent, m_me, group, key};
            eng.submit(m_me, std::move(c));
        }
    }

    // Arrival-side control admission: start the guard timer and cross-match
    // against whatever counterpart is already live. A timer that already fired
    // still yields a match flag; the flag is what the pop logic trusts.
    void admit_control(SimEngine& eng, EntryPtr e)
    {
        const ControlBody& c = *e->env.control;
        if (c.tag == CtlTag::sent) {
            bool hidden_group = c.seq.is_group_key() && !c.subject_is_group();
            if (hidden_group || (m_opt.flag_variant && m_delta_s == 0)) {
                e->hide_style = hidden_group;
                e->expired = true;
            } else {
                e->timer = eng.start_timer(m_me, e->env.id, m_delta_s, "sent control");
                m_by_timer[*e->timer] = e;
            }
            if (c.subject_is_group())
                e->remaining = {c.subject_group().members.begin(),
                                c.subject_group().members.end()};
            else if (!hidden_group)
                e->remaining = {c.subject_process()};

            for (auto it = m_live_delivered.lower_bound({c.seq, 0});
                 it != m_live_delivered.end() && it->first.first == c.seq; ++it) {
                EntryPtr d = it->second;
                stop_entry_timer(eng, d, "matching sent control arrived");
                d->matched = true;
                e->remaining.erase(it->first.second);
            }
            if (!hidden_group && e->remaining.empty()) {
                stop_entry_timer(eng, e, "all deliverers matched");
                e->matched = true;
            }
            m_live_sent.try_emplace(c.seq, e);
        } else {
            e->timer = eng.start_timer(m_me, e->env.id, m_delta_r, "delivered control");
            m_by_timer[*e->timer] = e;
            auto it = m_live_sent.find(c.seq);
            if (it != m_live_sent.end()) {
                stop_entry_timer(eng, e, "matching sent control present");
                e->matched = true;
                EntryPtr s = it->second;
                if (!s->hide_style) {
                    s->remaining.erase(c.actor);
                    if (s->remaining.empty()) {
                        stop_entry_timer(eng, s, "all deliverers matched");
                        s->matched = true;
                    }
                }
            }
            m_live_delivered.try_emplace({c.seq, c.actor}, e);
        }
    }

    void stop_entry_timer(SimEngine& eng, EntryPtr e, std::string detail)
    {
        if (!e->timer) return;
        eng.stop_timer(*e->timer, std::move(detail));
        m_by_timer.erase(*e->timer);
        e->timer.reset();
    }

    void deliver_app(SimEngine& eng, const EntryPtr& e)
    {
        eng.note(m_me, EventKind::deliver, e->env.id);
        ProcessId source = e->env.origin;
        PairSeq key = e->env.match_key.value_or(e->env.pair_seq.value_or(PairSeq{}));
        for (ProcessId x = 0; x < m_n; ++x) {
            if (x == m_me || x == source) continue;
            SendSpec c;
            c.dest = x;
            c.kind = MsgKind::control;
            c.match_key = key;
            c.control = ControlBody{CtlTag::delivered, m_me, source, key};
            eng.submit(m_me, std::move(c));
        }
    }

    // Takes its own reference: callers may pass the m_popped slot this very
    // call clears.
    void erase_entry(SimEngine& eng, EntryPtr e, const std::string& detail)
    {
        e->deleted = true;
        if (e->timer) {
            m_by_timer.erase(*e->timer);
            e->timer.reset();
        }
        const ControlBody& c = *e->env.control;
        if (c.tag == CtlTag::sent) {
            auto it = m_live_sent.find(c.seq);
            if (it != m_live_sent.end() && it->second == e) m_live_sent.erase(it);
        } else {
            auto it = m_live_delivered.find({c.seq, c.actor});
            if (it != m_live_delivered.end() && it->second == e) m_live_delivered.erase(it);
        }
        if (m_popped[e->env.origin] == e) m_popped[e->env.origin].reset();
        eng.note(m_me, EventKind::erase, e->env.id, detail);
    }

    void complete_sent(SimEngine& eng, const EntryPtr& e)
    {
        const ControlBody& c = *e->env.control;
        if (!e->hide_style) {
            std::vector<EntryPtr> victims;
            for (auto it = m_live_delivered.lower_bound({c.seq, 0});
                 it != m_live_delivered.end() && it->first.first == c.seq; ++it)
                victims.push_back(it->second);
            for (const EntryPtr& d : victims) erase_entry(eng, d, "cleared");
        }
        erase_entry(eng, e, e->matched ? "matched" : "expired");
    }

    // Head-of-queue discipline for a popped control. True means the entry is
    // finished and the queue may move on.
    bool resolve_control(SimEngine& eng, const EntryPtr& e)
    {
        if (e->env.control->tag == CtlTag::sent) {
            if (e->matched || e->expired) {
                complete_sent(eng, e);
                return true;
            }
            return false;
        }
        if (e->matched) {
            if (m_live_sent.count(e->env.control->seq)) return false;
            erase_entry(eng, e, "matched");
            return true;
        }
        if (e->expired) {
            erase_entry(eng, e, "expired");
            return true;
        }
        return false;
    }

    // Run every queue to a fixpoint. Completing one entry can unblock another
    // queue's parked head, so keep sweeping until nothing moves.
    void progress(SimEngine& eng)
    {
        bool changed = true;
        while (changed) {
            changed = false;
            for (ProcessId q = 0; q < m_n; ++q) {
                if (m_popped[q]) {
                    if (!resolve_control(eng, m_popped[q])) continue;
                    m_popped[q].reset();
                    changed = true;
                }
                while (!m_popped[q] && !m_queues[q].empty()) {
                    EntryPtr e = m_queues[q].front();
                    m_queues[q].pop_front();
                    if (e->deleted) continue;
                    eng.note(m_me, EventKind::pop, e->env.id);
                    if (e->env.kind == MsgKind::app) {
                        deliver_app(eng, e);
                        changed = true;
                        continue;
                    }
                    if (resolve_control(eng, e)) {
                        changed = true;
                        continue;
                    }
                    m_popped[q] = e;
                }
            }
        }
    }

    ProcessId m_me;
    std::uint32_t m_n;
    SimDuration m_delta_s;
    SimDuration m_delta_r;
    CsOptions m_opt;
    std::vector<std::deque<EntryPtr>> m_queues;
    std::vector<EntryPtr> m_popped;
    std::vector<std::uint64_t> m_next_seq;
    std::uint64_t m_next_group = 0;
    std::map<PairSeq, EntryPtr> m_live_sent;
    std::map<std::pair<PairSeq, ProcessId>, EntryPtr> m_live_delivered;
    std::map<TimerId, EntryPtr> m_by_timer;
};

} // namespace causalsim
