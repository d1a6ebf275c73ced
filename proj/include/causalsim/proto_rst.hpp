#pragma once

// Matrix-clock causal ordering. Each process tracks a full n-by-n send-count
// matrix; a message piggybacks the sender's matrix as copied before the send
// counter bump, and the receiver holds it until every count addressed to the
// receiver is covered by its own delivery history. Merging the piggyback after
// delivery propagates transitive knowledge; merging it blindly is also the
// protocol's Byzantine weakness, which the adversary scripts exploit.

#include <string>
#include <vector>

#include "causalsim/core.hpp"
#include "causalsim/simnet.hpp"
#include "causalsim/trace.hpp"

namespace causalsim
{

// Delivery condition at process `dest`: every piggybacked count of messages
// addressed to dest must already be matched by dest's delivery history.
inline bool rst_deliverable(const MatrixClock& piggy, ProcessId dest,
                            const std::vector<std::uint64_t>& delivered)
{
    for (std::uint32_t k = 0; k < piggy.size(); ++k)
        if (piggy.at(k, dest) > delivered[k]) return false;
    return true;
}

class RstProcess : public ProcessHandler
{
public:
    RstProcess(ProcessId me, std::uint32_t n)
        : m_me(me), m_clock(n), m_delivered(n, 0), m_next_seq(n, 0)
    {
    }

    void on_workload(SimEngine& eng, const WorkloadSend& w) override
    {
        // A group send is a plain sequence of point-to-point sends here; the
        // matrix advances one column per member.
        if (w.group) {
            for (ProcessId d : w.group->members) send_with(eng, d, w.payload, m_clock);
        } else {
            send_with(eng, *w.dest, w.payload, m_clock);
        }
    }

    void on_arrival(SimEngine& eng, const Envelope& env) override
    {
        if (env.kind != MsgKind::app || !env.piggyback) {
            eng.note(m_me, EventKind::drop, env.id, "not an app message with a clock");
            return;
        }
        m_pending.push_back(env);
        eng.note(m_me, EventKind::push, env.id);
        drain(eng);
    }

    const MatrixClock& clock() const { return m_clock; }
    const std::vector<std::uint64_t>& delivered_counts() const { return m_delivered; }
    std::size_t pending_count() const { return m_pending.size(); }

protected:
    std::optional<EnvelopeId> send_with(SimEngine& eng, ProcessId dest,
                                        const std::string& payload, MatrixClock piggy)
    {
        SendSpec s;
        s.dest = dest;
        s.kind = MsgKind::app;
        s.payload = payload;
        PairSeq ps{m_me, dest, ++m_next_seq[dest]};
        s.pair_seq = ps;
        s.match_key = ps;
        s.piggyback = std::move(piggy);
        m_clock.add_saturating(m_me, dest, 1);
        return eng.submit(m_me, std::move(s));
    }

    void deliver(SimEngine& eng, const Envelope& env)
    {
        eng.note(m_me, EventKind::deliver, env.id);
        m_delivered[env.origin] += 1;
        m_clock.merge_max(*env.piggyback);
    }

    // Re-scan from the front after every delivery: a merge can unblock an
    // earlier arrival, and arrival order breaks ties deterministically.
    void drain(SimEngine& eng)
    {
        bool progressed = true;
        while (progressed) {
            progressed = false;
            for (auto it = m_pending.begin(); it != m_pending.end(); ++it) {
                if (rst_deliverable(*it->piggyback, m_me, m_delivered)) {
                    Envelope env = *it;
                    m_pending.erase(it);
                    deliver(eng, env);
                    progressed = true;
                    break;
                }
            }
        }
    }

    ProcessId m_me;
    MatrixClock m_clock;
    std::vector<std::uint64_t> m_delivered;
    std::vector<std::uint64_t> m_next_seq;
    std::vector<Envelope> m_pending;
};

} // namespace causalsim
