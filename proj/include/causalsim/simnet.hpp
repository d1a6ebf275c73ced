#pragma once

// Deterministic discrete-event network simulator: a global event queue ordered
// by (time, phase, emission counter), per-ordered-pair FIFO channels with
// bounded delays, and a timer service. Every run of the same (config, seed)
// replays the exact same event sequence.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "causalsim/core.hpp"
#include "causalsim/trace.hpp"

namespace causalsim
{

class SimEngine;

// A protocol instance or adversary script attached to one process. Handlers
// react to dispatched events and emit through the engine; they own all
// per-process protocol state.
class ProcessHandler
{
public:
    virtual ~ProcessHandler() = default;
    virtual void on_start(SimEngine&) {}
    virtual void on_workload(SimEngine&, const WorkloadSend&) = 0;
    virtual void on_arrival(SimEngine&, const Envelope&) = 0;
    virtual void on_timer(SimEngine&, TimerId) {}
};

struct TimerRec
{
    ProcessId owner = 0;
    SimTime fires_at = 0;
    std::optional<EnvelopeId> subject;   // control envelope the timer guards, if any
    bool stopped = false;
    bool fired = false;
    std::string detail;
};

// What a handler asks the engine to transmit. The engine stamps the true
// origin; claimed_origin is only honored when it matches the sender, otherwise
// the send is rejected as a forgery attempt.
struct SendSpec
{
    ProcessId dest = 0;
    MsgKind kind = MsgKind::app;
    std::string payload;
    std::optional<PairSeq> pair_seq;
    std::optional<PairSeq> match_key;
    std::optional<ControlBody> control;
    std::optional<MatrixClock> piggyback;
    std::optional<GroupSet> group;
    std::optional<ProcessId> claimed_origin;
};

// Aborted run: a handler threw or breached an engine precondition. Carries the
// partial trace for post-mortem inspection.
class SimAbort : public std::runtime_error
{
public:
    SimAbort(const std::string& what, Trace partial)
        : std::runtime_error(what), trace(std::move(partial))
    {
    }

    Trace trace;
};

// Pure arrival-time rule, exposed for direct testing: the draw is clamped to
// [1, delta] and then pushed up to the channel's previous arrival so FIFO order
// is preserved. Clamping upward cannot break the delta bound because the
// previous envelope on the pair was sent no later than this one.
inline SimTime arrival_time_for(SimTime sent_at, SimDuration draw, SimDuration delta,
                                std::optional<SimTime> last_arrival_on_pair)
{
    SimDuration d = std::min(std::max<SimDuration>(draw, 1), delta);
    SimTime arrive = sent_at + d;
    if (last_arrival_on_pair && *last_arrival_on_pair > arrive) arrive = *last_arrival_on_pair;
    return arrive;
}

class SimEngine
{
public:
    explicit SimEngine(ScenarioConfig cfg)
        : m_cfg(std::move(cfg)), m_handlers(m_cfg.n), m_filters(m_cfg.n), m_rng(m_cfg.seed)
    {
    }

    const ScenarioConfig& config() const { return m_cfg; }
    SimTime now() const { return m_now; }
    SimTime horizon() const { return m_cfg.horizon; }
    bool is_byzantine(ProcessId p) const { return m_cfg.is_byzantine(p); }

    void set_handler(ProcessId p, std::unique_ptr<ProcessHandler> h)
    {
        m_handlers.at(p) = std::move(h);
    }

    // Byzantine wrappers install a filter to suppress selected emissions of
    // their inner honest handler; a false return means "never sent" and leaves
    // no trace, which models a process silently choosing not to transmit.
    void set_emission_filter(ProcessId p, std::function<bool(const SendSpec&)> f)
    {
        m_filters.at(p) = std::move(f);
    }

    // Full trace so far, readable by adversary scripts (omniscient adversary).
    const Trace& trace_so_far() const { return m_trace; }

    const Envelope& envelope(EnvelopeId id) const { return m_trace.envelopes.at(id); }

    // Transmit from `from`. Returns the envelope id, or nullopt when the spec
    // was rejected (forged origin) or filtered.
    std::optional<EnvelopeId> submit(ProcessId from, SendSpec spec)
    {
        if (m_now > m_cfg.horizon)
            throw std::logic_error("send after horizon");
        if (spec.dest >= m_cfg.n)
            throw std::logic_error("send to unknown process");
        if (spec.dest == from)
            throw std::logic_error("self-sends are disallowed");

        if (spec.claimed_origin && *spec.claimed_origin != from) {
            m_trace.record(m_now, from, EventKind::drop, std::nullopt,
                           "origin forgery rejected: claimed " +
                               std::to_string(*spec.claimed_origin));
            return std::nullopt;
        }
        if (m_filters[from] && !m_filters[from](spec)) return std::nullopt;

        Envelope env;
        env.id = m_trace.envelopes.size();
        env.origin = from;
        env.dest = spec.dest;
        env.kind = spec.kind;
        env.sent_at = m_now;
        env.payload = std::move(spec.payload);
        env.pair_seq = spec.pair_seq;
        env.match_key = spec.match_key;
        env.control = std::move(spec.control);
        env.piggyback = std::move(spec.piggyback);
        env.group = std::move(spec.group);

        auto key = std::make_pair(from, spec.dest);
        auto it = m_last_arrival.find(key);
        std::optional<SimTime> last;
        if (it != m_last_arrival.end()) last = it->second;
        env.arrive_at = arrival_time_for(m_now, draw_delay(from, spec.dest), m_cfg.delta, last);
        m_last_arrival[key] = env.arrive_at;

        EnvelopeId id = env.id;
        m_trace.envelopes.push_back(std::move(env));
        m_trace.record(m_now, from, env_kind_event(m_trace.envelopes[id].kind), id);
        push_event(m_trace.envelopes[id].arrive_at, Phase::message, Item::arrival, id);
        return id;
    }

    TimerId start_timer(ProcessId owner, std::optional<EnvelopeId> subject, SimDuration duration,
                        std::string detail = {})
    {
        TimerId id = m_timers.size();
        m_timers.push_back({owner, m_now + duration, subject, false, false, detail});
        m_trace.record(m_now, owner, EventKind::timer_start, subject, std::move(detail));
        push_event(m_timers[id].fires_at, Phase::timer, Item::timeout, id);
        return id;
    }

    // Idempotent; stopping after the timer fired is a recorded no-op. A stopped
    // timer never produces a timeout event.
    void stop_timer(TimerId id, std::string detail = {})
    {
        TimerRec& t = m_timers.at(id);
        if (t.stopped) return;
        if (t.fired) {
            m_trace.record(m_now, t.owner, EventKind::timer_stop, t.subject,
                           detail.empty() ? "already fired" : detail + " (already fired)");
            return;
        }
        t.stopped = true;
        m_trace.record(m_now, t.owner, EventKind::timer_stop, t.subject, std::move(detail));
    }

    const TimerRec& timer(TimerId id) const { return m_timers.at(id); }

    // Protocol-level bookkeeping events (push/pop/deliver/delete/drop).
    void note(ProcessId p, EventKind kind, std::optional<EnvelopeId> env = std::nullopt,
              std::string detail = {})
    {
        m_trace.record(m_now, p, kind, env, std::move(detail));
    }

    Trace run()
    {
        try {
            for (ProcessId p = 0; p < m_cfg.n; ++p) {
                if (!m_handlers[p]) throw std::logic_error("process without handler");
                m_handlers[p]->on_start(*this);
            }
            for (std::size_t i = 0; i < m_cfg.workload.size(); ++i)
                push_event(m_cfg.workload[i].time, Phase::message, Item::workload, i);

            while (!m_queue.empty()) {
                Event ev = m_queue.top();
                if (ev.time > m_cfg.horizon) break;
                m_queue.pop();
                m_now = ev.time;
                dispatch(ev);
            }
        } catch (const SimAbort&) {
            throw;
        } catch (const std::exception& e) {
            throw SimAbort(std::string("handler aborted at tick ") + std::to_string(m_now) +
                               ": " + e.what(),
                           std::move(m_trace));
        }
        return std::move(m_trace);
    }

private:
    // Same-tick order: workload actions and arrivals before timer expirations,
    // then emission-counter order. This makes an ack landing exactly at a
    // timeout's tick win over the timeout.
    enum class Phase : std::uint8_t { message = 0, timer = 1 };
    enum class Item : std::uint8_t { workload, arrival, timeout };

    struct Event
    {
        SimTime time;
        Phase phase;
        std::uint64_t seq;
        Item item;
        std::uint64_t index;

        bool operator>(const Event& o) const
        {
            if (time != o.time) return time > o.time;
            if (phase != o.phase) return phase > o.phase;
            return seq > o.seq;
        }
    };

    static EventKind env_kind_event(MsgKind k)
    {
        return k == MsgKind::ack ? EventKind::ack_sent : EventKind::send;
    }

    void push_event(SimTime time, Phase phase, Item item, std::uint64_t index)
    {
        m_queue.push({time, phase, m_next_seq++, item, index});
    }

    SimDuration draw_delay(ProcessId from, ProcessId to)
    {
        switch (m_cfg.delay_model) {
            case DelayModel::fixed:
                return m_cfg.effective_fixed_delay();
            case DelayModel::uniform_random:
                // Modulo keeps the draw platform-independent; distribution
                // shape is irrelevant here, determinism is not.
                return 1 + static_cast<SimDuration>(m_rng() % m_cfg.delta);
            case DelayModel::adversarial_schedule:
                for (const auto& pd : m_cfg.delay_schedule)
                    if (pd.from == from && pd.to == to) return pd.delay;
                return m_cfg.delay_default;
        }
        return 1;
    }

    void dispatch(const Event& ev)
    {
        switch (ev.item) {
            case Item::workload: {
                const WorkloadSend& w = m_cfg.workload[ev.index];
                m_handlers[w.sender]->on_workload(*this, w);
                break;
            }
            case Item::arrival: {
                // Copy: handlers may emit and grow the envelope store.
                const Envelope env = m_trace.envelopes[ev.index];
                m_trace.record(m_now, env.dest, EventKind::arrive, env.id);
                m_handlers[env.dest]->on_arrival(*this, env);
                break;
            }
            case Item::timeout: {
                TimerRec& t = m_timers[ev.index];
                if (t.stopped) break;
                t.fired = true;
                m_trace.record(m_now, t.owner, EventKind::timeout, t.subject, t.detail);
                m_handlers[t.owner]->on_timer(*this, ev.index);
                break;
            }
        }
    }

    ScenarioConfig m_cfg;
    std::vector<std::unique_ptr<ProcessHandler>> m_handlers;
    std::vector<std::function<bool(const SendSpec&)>> m_filters;
    std::mt19937_64 m_rng;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> m_queue;
    std::map<std::pair<ProcessId, ProcessId>, SimTime> m_last_arrival;
    std::vector<TimerRec> m_timers;
    Trace m_trace;
    SimTime m_now = 0;
    std::uint64_t m_next_seq = 0;
};

} // namespace causalsim
