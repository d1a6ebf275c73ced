#pragma once

// Sender-Inhibition causal ordering. A sender holds a send lock from the
// moment a message (or multicast batch) goes out until every destination
// acked or a 2*delta timer expires; both legs of a round trip are bounded by
// delta, so a missing ack at 2*delta can only mean a faulty receiver and the
// lock may be released without waiting further. Sends issued while locked
// queue in a backlog and leave one per release. Receivers deliver in arrival
// order immediately and ack every app message.

#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "causalsim/core.hpp"
#include "causalsim/simnet.hpp"
#include "causalsim/trace.hpp"

namespace causalsim
{

class SiProcess : public ProcessHandler
{
public:
    SiProcess(ProcessId me, std::uint32_t n, SimDuration delta)
        : m_me(me), m_delta(delta), m_next_seq(n, 0)
    {
    }

    void on_workload(SimEngine& eng, const WorkloadSend& w) override
    {
        if (m_locked) {
            m_backlog.push_back(w);
            eng.note(m_me, EventKind::push, std::nullopt, "send deferred until release");
            return;
        }
        start_send(eng, w);
    }

    void on_arrival(SimEngine& eng, const Envelope& env) override
    {
        switch (env.kind) {
            case MsgKind::app: {
                eng.note(m_me, EventKind::push, env.id);
                eng.note(m_me, EventKind::pop, env.id);
                eng.note(m_me, EventKind::deliver, env.id);
                SendSpec ack;
                ack.dest = env.origin;
                ack.kind = MsgKind::ack;
                ack.pair_seq = env.pair_seq;
                ack.match_key = env.match_key;
                eng.submit(m_me, std::move(ack));
                break;
            }
            case MsgKind::ack:
                handle_ack(eng, env);
                break;
            case MsgKind::control:
                eng.note(m_me, EventKind::drop, env.id, "unexpected control");
                break;
        }
    }

    void on_timer(SimEngine& eng, TimerId id) override
    {
        if (!m_timer || *m_timer != id) return;
        m_timer.reset();
        release(eng);
    }

    bool locked() const { return m_locked; }
    std::size_t backlog_size() const { return m_backlog.size(); }

private:
    void start_send(SimEngine& eng, const WorkloadSend& w)
    {
        m_locked = true;
        std::optional<EnvelopeId> first;
        if (w.group) {
            m_inflight_key = PairSeq{m_me, m_me, ++m_next_group};
            for (ProcessId d : w.group->members) {
                SendSpec s;
                s.dest = d;
                s.kind = MsgKind::app;
                s.payload = w.payload;
                s.pair_seq = PairSeq{m_me, d, ++m_next_seq[d]};
                s.match_key = m_inflight_key;
                s.group = w.group;
                auto id = eng.submit(m_me, std::move(s));
                if (!first) first = id;
                m_awaiting.insert(d);
            }
        } else {
            PairSeq ps{m_me, *w.dest, ++m_next_seq[*w.dest]};
            m_inflight_key = ps;
            SendSpec s;
            s.dest = *w.dest;
            s.kind = MsgKind::app;
            s.payload = w.payload;
            s.pair_seq = ps;
            s.match_key = ps;
            first = eng.submit(m_me, std::move(s));
            m_awaiting.insert(*w.dest);
        }
        m_timer = eng.start_timer(m_me, first, 2 * m_delta, "inhibit");
    }

    void handle_ack(SimEngine& eng, const Envelope& env)
    {
        if (!m_locked || !m_inflight_key || env.match_key != *m_inflight_key) {
            eng.note(m_me, EventKind::drop, env.id, "stale ack");
            return;
        }
        auto it = m_awaiting.find(env.origin);
        if (it == m_awaiting.end()) {
            eng.note(m_me, EventKind::drop, env.id, "unsolicited ack");
            return;
        }
        m_awaiting.erase(it);
        if (m_awaiting.empty()) {
            if (m_timer) {
                eng.stop_timer(*m_timer, "all acks");
                m_timer.reset();
            }
            release(eng);
        }
    }

    void release(SimEngine& eng)
    {
        m_locked = false;
        m_awaiting.clear();
        m_inflight_key.reset();
        if (!m_backlog.empty()) {
            WorkloadSend next = m_backlog.front();
            m_backlog.pop_front();
            start_send(eng, next);
        }
    }

    ProcessId m_me;
    SimDuration m_delta;
    bool m_locked = false;
    std::set<ProcessId> m_awaiting;
    std::optional<PairSeq> m_inflight_key;
    std::optional<TimerId> m_timer;
    std::deque<WorkloadSend> m_backlog;
    std::vector<std::uint64_t> m_next_seq;
    std::uint64_t m_next_group = 0;
};

} // namespace causalsim
