#pragma once

// Ground-truth event trace. The engine and the protocol handlers append events;
// the oracle and the report generator consume them. Serialization is JSON-lines
// with a fixed field order so identical runs produce byte-identical files.

#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "causalsim/core.hpp"

namespace causalsim
{

enum class EventKind : std::uint8_t
{
    send,
    arrive,
    push,
    pop,
    deliver,
    ack_sent,
    timer_start,
    timer_stop,
    timeout,
    erase,   // serialized as "delete"
    drop,
};

inline const char* to_string(EventKind k)
{
    switch (k) {
        case EventKind::send: return "send";
        case EventKind::arrive: return "arrive";
        case EventKind::push: return "push";
        case EventKind::pop: return "pop";
        case EventKind::deliver: return "deliver";
        case EventKind::ack_sent: return "ack_sent";
        case EventKind::timer_start: return "timer_start";
        case EventKind::timer_stop: return "timer_stop";
        case EventKind::timeout: return "timeout";
        case EventKind::erase: return "delete";
        case EventKind::drop: return "drop";
    }
    return "?";
}

struct TraceEvent
{
    SimTime time = 0;
    ProcessId process = 0;
    EventKind kind = EventKind::send;
    std::optional<EnvelopeId> envelope;
    std::string detail;
};

inline void json_escape_into(std::string& out, const std::string& s)
{
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
}

struct Trace
{
    std::vector<TraceEvent> events;
    std::vector<Envelope> envelopes;   // indexed by EnvelopeId

    const Envelope& envelope(EnvelopeId id) const { return envelopes.at(id); }

    void record(SimTime time, ProcessId process, EventKind kind,
                std::optional<EnvelopeId> env = std::nullopt, std::string detail = {})
    {
        events.push_back({time, process, kind, env, std::move(detail)});
    }

    // One JSON object per event: time, process, kind, envelope summary, detail.
    std::string event_to_json(const TraceEvent& e) const
    {
        std::string out;
        out += "{\"time\":";
        out += std::to_string(e.time);
        out += ",\"process\":";
        out += std::to_string(e.process);
        out += ",\"kind\":\"";
        out += to_string(e.kind);
        out += "\",\"envelope\":";
        if (!e.envelope) {
            out += "null";
        } else {
            const Envelope& env = envelopes.at(*e.envelope);
            out += "{\"origin\":";
            out += std::to_string(env.origin);
            out += ",\"dest\":";
            out += std::to_string(env.dest);
            out += ",\"kind\":\"";
            out += to_string(env.kind);
            out += "\",\"tag\":";
            if (env.control) {
                out += '"';
                out += to_string(env.control->tag);
                out += '"';
            } else {
                out += "null";
            }
            out += ",\"actor\":";
            out += env.control ? std::to_string(env.control->actor) : "null";
            out += ",\"subject\":";
            if (!env.control) {
                out += "null";
            } else if (env.control->subject_is_group()) {
                out += '[';
                const auto& g = env.control->subject_group().members;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (i) out += ',';
                    out += std::to_string(g[i]);
                }
                out += ']';
            } else {
                out += std::to_string(env.control->subject_process());
            }
            out += ",\"seq\":";
            std::optional<PairSeq> seq;
            if (env.control) seq = env.control->seq;
            else if (env.match_key) seq = env.match_key;
            else seq = env.pair_seq;
            if (!seq) {
                out += "null";
            } else {
                out += '[';
                out += std::to_string(seq->sender);
                out += ',';
                out += std::to_string(seq->receiver);
                out += ',';
                out += std::to_string(seq->k);
                out += ']';
            }
            out += '}';
        }
        out += ",\"detail\":\"";
        json_escape_into(out, e.detail);
        out += "\"}";
        return out;
    }

    void write_jsonl(std::ostream& os) const
    {
        for (const auto& e : events) {
            os << event_to_json(e) << '\n';
        }
    }

    std::string to_jsonl() const
    {
        std::ostringstream ss;
        write_jsonl(ss);
        return ss.str();
    }
};

} // namespace causalsim
