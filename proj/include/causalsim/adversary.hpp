#pragma once

// Scriptable Byzantine behaviors. Clock forgeries target the matrix-clock
// protocol; emission suppression and phantom controls target the two
// timeout-based protocols. Scripts keep honest internal bookkeeping where they
// need it (a useful forgery is built from real knowledge) and may read the
// whole trace so far, the strongest adversary the simulator can host.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "causalsim/core.hpp"
#include "causalsim/proto_cs.hpp"
#include "causalsim/proto_rst.hpp"
#include "causalsim/proto_si.hpp"
#include "causalsim/simnet.hpp"

namespace causalsim
{

inline MatrixClock boost_attack(MatrixClock true_clock, ProcessId row, ProcessId col,
                                std::uint64_t amount)
{
    true_clock.add_saturating(row, col, amount);
    return true_clock;
}

// Refuses when the entry is already 0: there is nothing to hide and the forged
// clock would be no forgery at all.
inline std::optional<MatrixClock> shrink_attack(MatrixClock true_clock, ProcessId row,
                                                ProcessId col)
{
    std::uint64_t x = true_clock.at(row, col);
    if (x == 0) return std::nullopt;
    true_clock.set(row, col, x - 1);
    return true_clock;
}

// Matrix-clock process that follows the wire format but none of the rules:
// it delivers whatever arrives immediately and forges the piggybacked clock
// on every send it makes.
class RstByzantine : public RstProcess
{
public:
    RstByzantine(ProcessId me, std::uint32_t n, AdversaryConfig adv)
        : RstProcess(me, n), m_adv(std::move(adv))
    {
    }

    void on_workload(SimEngine& eng, const WorkloadSend& w) override
    {
        if (w.group) {
            for (ProcessId d : w.group->members) send_with(eng, d, w.payload, forged());
        } else {
            send_with(eng, *w.dest, w.payload, forged());
        }
    }

    void on_arrival(SimEngine& eng, const Envelope& env) override
    {
        if (env.kind != MsgKind::app || !env.piggyback) return;
        eng.note(m_me, EventKind::push, env.id);
        deliver(eng, env);
    }

private:
    MatrixClock forged() const
    {
        if (m_adv.script == ScriptKind::boost)
            return boost_attack(m_clock, m_adv.boost_row, m_adv.boost_col, m_adv.boost_amount);
        MatrixClock m = m_clock;
        for (auto [row, col] : m_adv.shrink_entries)
            if (auto f = shrink_attack(m, row, col)) m = *f;
        return m;
    }

    AdversaryConfig m_adv;
};

// Runs an honest protocol instance but silently swallows the emissions the
// predicate rejects. The inner handler never learns its messages were eaten.
class SuppressingProcess : public ProcessHandler
{
public:
    SuppressingProcess(ProcessId me, std::unique_ptr<ProcessHandler> inner,
                       std::function<bool(SimEngine&, const SendSpec&)> allow)
        : m_me(me), m_inner(std::move(inner)), m_allow(std::move(allow))
    {
    }

    void on_start(SimEngine& eng) override
    {
        eng.set_emission_filter(m_me,
                                [this, &eng](const SendSpec& s) { return m_allow(eng, s); });
        m_inner->on_start(eng);
    }

    void on_workload(SimEngine& eng, const WorkloadSend& w) override
    {
        m_inner->on_workload(eng, w);
    }

    void on_arrival(SimEngine& eng, const Envelope& env) override
    {
        m_inner->on_arrival(eng, env);
    }

    void on_timer(SimEngine& eng, TimerId id) override { m_inner->on_timer(eng, id); }

private:
    ProcessId m_me;
    std::unique_ptr<ProcessHandler> m_inner;
    std::function<bool(SimEngine&, const SendSpec&)> m_allow;
};

// Honest Channel Sync participant that additionally injects sent-controls for
// messages that were never sent.
class PhantomSentProcess : public ProcessHandler
{
public:
    PhantomSentProcess(ProcessId me, std::unique_ptr<ProcessHandler> inner, AdversaryConfig adv,
                       std::uint32_t n)
        : m_me(me), m_n(n), m_inner(std::move(inner)), m_adv(std::move(adv))
    {
    }

    void on_start(SimEngine& eng) override
    {
        for (SimTime t : m_adv.phantom_times)
            m_own.insert(eng.start_timer(m_me, std::nullopt, t, "phantom sent control"));
        m_inner->on_start(eng);
    }

    void on_workload(SimEngine& eng, const WorkloadSend& w) override
    {
        m_inner->on_workload(eng, w);
    }

    void on_arrival(SimEngine& eng, const Envelope& env) override
    {
        m_inner->on_arrival(eng, env);
    }

    void on_timer(SimEngine& eng, TimerId id) override
    {
        if (!m_own.count(id)) {
            m_inner->on_timer(eng, id);
            return;
        }
        PairSeq key{m_me, m_adv.phantom_subject, m_adv.phantom_seq_start + m_emitted++};
        for (ProcessId x = 0; x < m_n; ++x) {
            if (x == m_me || x == m_adv.phantom_subject) continue;
            SendSpec c;
            c.dest = x;
            c.kind = MsgKind::control;
            c.match_key = key;
            c.control = ControlBody{CtlTag::sent, m_me, m_adv.phantom_subject, key};
            eng.submit(m_me, std::move(c));
        }
    }

private:
    ProcessId m_me;
    std::uint32_t m_n;
    std::unique_ptr<ProcessHandler> m_inner;
    AdversaryConfig m_adv;
    std::set<TimerId> m_own;
    std::uint64_t m_emitted = 0;
};

// Pure replay of a scripted emission list; ignores the protocol entirely.
// An emission's claimed_origin forges the control's actor field; the envelope
// origin itself is stamped by the engine and cannot be forged from here.
class ScriptedProcess : public ProcessHandler
{
public:
    ScriptedProcess(ProcessId me, AdversaryConfig adv) : m_me(me), m_adv(std::move(adv)) {}

    void on_start(SimEngine& eng) override
    {
        for (std::size_t i = 0; i < m_adv.emissions.size(); ++i)
            m_timers[eng.start_timer(m_me, std::nullopt, m_adv.emissions[i].time,
                                     "scripted emission")] = i;
    }

    void on_workload(SimEngine&, const WorkloadSend&) override {}
    void on_arrival(SimEngine&, const Envelope&) override {}

    void on_timer(SimEngine& eng, TimerId id) override
    {
        auto it = m_timers.find(id);
        if (it == m_timers.end()) return;
        const ScriptedEmission& em = m_adv.emissions[it->second];
        SendSpec s;
        s.dest = em.dest;
        s.kind = em.kind;
        s.payload = em.payload;
        s.pair_seq = em.seq;
        s.match_key = em.seq;
        if (em.kind == MsgKind::control) {
            ControlBody body;
            body.tag = em.tag.value_or(CtlTag::sent);
            body.actor = em.claimed_origin.value_or(m_me);
            if (em.subject_group)
                body.subject = *em.subject_group;
            else
                body.subject = em.subject.value_or(ProcessId{0});
            body.seq = em.seq;
            s.control = std::move(body);
        } else if (em.claimed_origin) {
            s.claimed_origin = em.claimed_origin;
        }
        eng.submit(m_me, std::move(s));
    }

private:
    ProcessId m_me;
    AdversaryConfig m_adv;
    std::map<TimerId, std::size_t> m_timers;
};

inline std::unique_ptr<ProcessHandler> make_honest_handler(ProcessId me,
                                                           const ScenarioConfig& cfg,
                                                           const CsOptions& cs_opt)
{
    switch (cfg.protocol) {
        case Protocol::rst:
            return std::make_unique<RstProcess>(me, cfg.n);
        case Protocol::sender_inhibition:
            return std::make_unique<SiProcess>(me, cfg.n, cfg.delta);
        case Protocol::channel_sync:
            return std::make_unique<CsProcess>(me, cfg.n, cfg.delta_s, cfg.effective_delta_r(),
                                               cs_opt);
    }
    return nullptr;
}

inline std::unique_ptr<ProcessHandler> make_adversary(ProcessId me, const ScenarioConfig& cfg,
                                                      const CsOptions& cs_opt)
{
    const AdversaryConfig& adv = cfg.byzantine.at(me);
    switch (adv.script) {
        case ScriptKind::boost:
        case ScriptKind::shrink:
            return std::make_unique<RstByzantine>(me, cfg.n, adv);
        case ScriptKind::silent_ack:
            return std::make_unique<SuppressingProcess>(
                me, make_honest_handler(me, cfg, cs_opt),
                [](SimEngine&, const SendSpec& s) { return s.kind != MsgKind::ack; });
        case ScriptKind::withhold_delivered:
            return std::make_unique<SuppressingProcess>(
                me, make_honest_handler(me, cfg, cs_opt), [](SimEngine&, const SendSpec& s) {
                    return !(s.kind == MsgKind::control && s.control &&
                             s.control->tag == CtlTag::delivered);
                });
        case ScriptKind::phantom_sent:
            return std::make_unique<PhantomSentProcess>(me, make_honest_handler(me, cfg, cs_opt),
                                                        adv, cfg.n);
        case ScriptKind::crash_at: {
            SimTime t = adv.crash_time;
            return std::make_unique<SuppressingProcess>(
                me, make_honest_handler(me, cfg, cs_opt),
                [t](SimEngine& eng, const SendSpec&) { return eng.now() < t; });
        }
        case ScriptKind::custom_schedule:
            return std::make_unique<ScriptedProcess>(me, adv);
    }
    return nullptr;
}

} // namespace causalsim
