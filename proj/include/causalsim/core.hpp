#pragma once

// Domain types shared by the simulator, the protocols, and the checkers:
// identifiers, simulated time, message envelopes, matrix clocks, and the
// scenario configuration with its validator.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace causalsim
{

using ProcessId = std::uint32_t;
using SimTime = std::uint64_t;      // integer ticks
using SimDuration = std::uint64_t;
using EnvelopeId = std::uint64_t;
using TimerId = std::uint64_t;

enum class Protocol : std::uint8_t { rst, sender_inhibition, channel_sync };
enum class DelayModel : std::uint8_t { fixed, uniform_random, adversarial_schedule };
enum class MsgKind : std::uint8_t { app, control, ack };
enum class CtlTag : std::uint8_t { sent, delivered };

inline const char* to_string(Protocol p)
{
    switch (p) {
        case Protocol::rst: return "rst";
        case Protocol::sender_inhibition: return "sender_inhibition";
        case Protocol::channel_sync: return "channel_sync";
    }
    return "?";
}

inline const char* to_string(DelayModel m)
{
    switch (m) {
        case DelayModel::fixed: return "fixed";
        case DelayModel::uniform_random: return "uniform_random";
        case DelayModel::adversarial_schedule: return "adversarial_schedule";
    }
    return "?";
}

inline const char* to_string(MsgKind k)
{
    switch (k) {
        case MsgKind::app: return "app";
        case MsgKind::control: return "control";
        case MsgKind::ack: return "ack";
    }
    return "?";
}

inline const char* to_string(CtlTag t)
{
    return t == CtlTag::sent ? "sent" : "delivered";
}

inline std::optional<Protocol> protocol_from_string(const std::string& s)
{
    if (s == "rst") return Protocol::rst;
    if (s == "sender_inhibition") return Protocol::sender_inhibition;
    if (s == "channel_sync") return Protocol::channel_sync;
    return std::nullopt;
}

inline std::optional<DelayModel> delay_model_from_string(const std::string& s)
{
    if (s == "fixed") return DelayModel::fixed;
    if (s == "uniform_random") return DelayModel::uniform_random;
    if (s == "adversarial_schedule") return DelayModel::adversarial_schedule;
    return std::nullopt;
}

// Sequence number of the k-th application message on an ordered sender->receiver
// pair. Group sends additionally use a pseudo pair (sender == receiver) carrying
// a per-sender group-send counter, so one key identifies the whole send.
struct PairSeq
{
    ProcessId sender = 0;
    ProcessId receiver = 0;
    std::uint64_t k = 0;

    auto operator<=>(const PairSeq&) const = default;
    bool is_group_key() const { return sender == receiver; }
};

// Destination set of a multicast; stored sorted and deduplicated so that
// iteration order is deterministic everywhere.
struct GroupSet
{
    std::vector<ProcessId> members;

    static GroupSet of(std::vector<ProcessId> ids)
    {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return GroupSet{std::move(ids)};
    }

    bool contains(ProcessId p) const
    {
        return std::binary_search(members.begin(), members.end(), p);
    }

    std::size_t size() const { return members.size(); }
    bool empty() const { return members.empty(); }
    auto operator<=>(const GroupSet&) const = default;
};

// Body of a control message. For tag==sent the actor is the app sender and the
// subject is the receiver (or group); for tag==delivered the actor is the
// deliverer and the subject is the app message's original sender. seq is the
// identity of the app message the control refers to.
struct ControlBody
{
    CtlTag tag = CtlTag::sent;
    ProcessId actor = 0;
    std::variant<ProcessId, GroupSet> subject = ProcessId{0};
    PairSeq seq;

    bool subject_is_group() const { return std::holds_alternative<GroupSet>(subject); }
    ProcessId subject_process() const { return std::get<ProcessId>(subject); }
    const GroupSet& subject_group() const { return std::get<GroupSet>(subject); }
};

// n x n matrix of per-ordered-pair send counts; cell (j, k) is the number of
// application messages from p_j to p_k known locally. Arithmetic saturates so
// adversarial inflation cannot wrap around.
class MatrixClock
{
public:
    MatrixClock() = default;
    explicit MatrixClock(std::uint32_t n) : m_n(n), m_cells(std::size_t{n} * n, 0) {}

    std::uint32_t size() const { return m_n; }

    std::uint64_t at(ProcessId row, ProcessId col) const { return m_cells[index(row, col)]; }

    void set(ProcessId row, ProcessId col, std::uint64_t v) { m_cells[index(row, col)] = v; }

    void add_saturating(ProcessId row, ProcessId col, std::uint64_t d)
    {
        std::uint64_t& cell = m_cells[index(row, col)];
        cell = (cell > std::numeric_limits<std::uint64_t>::max() - d)
                   ? std::numeric_limits<std::uint64_t>::max()
                   : cell + d;
    }

    // Elementwise max, the post-delivery merge.
    void merge_max(const MatrixClock& other)
    {
        for (std::size_t i = 0; i < m_cells.size(); ++i)
            m_cells[i] = std::max(m_cells[i], other.m_cells[i]);
    }

    bool operator==(const MatrixClock&) const = default;

private:
    std::size_t index(ProcessId row, ProcessId col) const
    {
        return std::size_t{row} * m_n + col;
    }

    std::uint32_t m_n = 0;
    std::vector<std::uint64_t> m_cells;
};

// One message instance on one pair channel. A multicast produces one envelope
// per group member; the shared identity lives in match_key/group.
struct Envelope
{
    EnvelopeId id = 0;
    ProcessId origin = 0;
    ProcessId dest = 0;
    MsgKind kind = MsgKind::app;
    SimTime sent_at = 0;
    SimTime arrive_at = 0;
    std::string payload;
    std::optional<PairSeq> pair_seq;           // app: per-ordered-pair sequence
    std::optional<PairSeq> match_key;          // app/ack: control-matching identity
    std::optional<ControlBody> control;
    std::optional<MatrixClock> piggyback;      // rst app messages
    std::optional<GroupSet> group;             // multicast app: full destination set
};

struct WorkloadSend
{
    SimTime time = 0;
    ProcessId sender = 0;
    std::optional<ProcessId> dest;
    std::optional<GroupSet> group;
    std::string payload;
};

struct PairDelay
{
    ProcessId from = 0;
    ProcessId to = 0;
    SimDuration delay = 1;
};

enum class ScriptKind : std::uint8_t
{
    boost,
    shrink,
    silent_ack,
    phantom_sent,
    withhold_delivered,
    crash_at,
    custom_schedule,
};

inline const char* to_string(ScriptKind k)
{
    switch (k) {
        case ScriptKind::boost: return "boost";
        case ScriptKind::shrink: return "shrink";
        case ScriptKind::silent_ack: return "silent_ack";
        case ScriptKind::phantom_sent: return "phantom_sent";
        case ScriptKind::withhold_delivered: return "withhold_delivered";
        case ScriptKind::crash_at: return "crash_at";
        case ScriptKind::custom_schedule: return "custom_schedule";
    }
    return "?";
}

// One scripted emission of a custom_schedule adversary. claimed_origin lets a
// script attempt origin forgery, which the engine rejects and records.
struct ScriptedEmission
{
    SimTime time = 0;
    ProcessId dest = 0;
    MsgKind kind = MsgKind::app;
    std::optional<CtlTag> tag;
    std::optional<ProcessId> subject;
    std::optional<GroupSet> subject_group;
    PairSeq seq;
    std::string payload;
    std::optional<ProcessId> claimed_origin;
};

struct AdversaryConfig
{
    ScriptKind script = ScriptKind::crash_at;
    // boost: inflate entry (boost_row, boost_col) of the piggybacked clock by boost_amount
    ProcessId boost_row = 0;
    ProcessId boost_col = 0;
    std::uint64_t boost_amount = 1;
    // shrink: decrement these entries of the piggybacked clock by one each
    std::vector<std::pair<ProcessId, ProcessId>> shrink_entries;
    // crash_at: behave correctly until this tick, then permanent silence
    SimTime crash_time = 0;
    // phantom_sent: announce nonexistent sends to this subject at these ticks
    ProcessId phantom_subject = 0;
    std::vector<SimTime> phantom_times;
    std::uint64_t phantom_seq_start = 1000000;
    // custom_schedule
    std::vector<ScriptedEmission> emissions;
};

struct ScenarioConfig
{
    std::uint32_t n = 0;
    Protocol protocol = Protocol::rst;
    bool multicast = false;
    SimDuration delta = 1;
    SimDuration delta_s = 0;
    std::optional<SimDuration> delta_r;       // defaults to delta
    SimTime horizon = 0;
    std::uint64_t seed = 0;
    std::vector<WorkloadSend> workload;
    std::map<ProcessId, AdversaryConfig> byzantine;
    DelayModel delay_model = DelayModel::uniform_random;
    std::optional<SimDuration> delay_fixed;   // fixed model; defaults to delta
    std::vector<PairDelay> delay_schedule;    // adversarial_schedule per-pair table
    SimDuration delay_default = 1;            // adversarial_schedule fallback
    bool mcast_hide_group = false;

    SimDuration effective_delta_r() const { return delta_r.value_or(delta); }
    SimDuration effective_fixed_delay() const { return delay_fixed.value_or(delta); }
    bool is_byzantine(ProcessId p) const { return byzantine.count(p) != 0; }

    std::set<ProcessId> byzantine_set() const
    {
        std::set<ProcessId> out;
        for (const auto& [pid, cfg] : byzantine) out.insert(pid);
        return out;
    }

    SimTime workload_end() const
    {
        SimTime end = 0;
        for (const auto& w : workload) end = std::max(end, w.time);
        return end;
    }
};

struct ConfigViolation
{
    enum class Severity : std::uint8_t { warning, error };
    Severity severity = Severity::error;
    std::string field;
    std::string message;
};

inline std::vector<ConfigViolation> validate_config(const ScenarioConfig& cfg)
{
    using Sev = ConfigViolation::Severity;
    std::vector<ConfigViolation> out;
    auto error = [&](std::string field, std::string msg) {
        out.push_back({Sev::error, std::move(field), std::move(msg)});
    };
    auto warning = [&](std::string field, std::string msg) {
        out.push_back({Sev::warning, std::move(field), std::move(msg)});
    };

    if (cfg.n == 0) error("n", "process count must be at least 1");
    if (cfg.delta < 1) error("delta", "delta must be at least 1 tick");
    if (cfg.delta >= 1 && cfg.effective_delta_r() < cfg.delta)
        warning("delta_r",
                "delta_r < delta: receive-control timers may expire before the matching "
                "send control arrives");

    auto valid_pid = [&](ProcessId p) { return p < cfg.n; };

    if (!cfg.workload.empty()) {
        SimTime end = cfg.workload_end();
        // Liveness judgments need slack after the last send; 4*delta covers the
        // worst failure-free settling time of every protocol here.
        if (cfg.horizon <= end || cfg.horizon - end <= 4 * cfg.delta)
            error("horizon", "horizon must exceed the last workload send time by more than "
                             "4*delta");
    }

    for (std::size_t i = 0; i < cfg.workload.size(); ++i) {
        const auto& w = cfg.workload[i];
        const std::string field = "workload[" + std::to_string(i) + "]";
        if (!valid_pid(w.sender)) error(field, "sender out of range");
        if (w.dest.has_value() == w.group.has_value()) {
            error(field, "exactly one of dest or group is required");
            continue;
        }
        if (w.dest) {
            if (!valid_pid(*w.dest)) error(field, "dest out of range");
            else if (*w.dest == w.sender) error(field, "self-sends are disallowed");
        }
        if (w.group) {
            if (!cfg.multicast) error(field, "group sends require multicast mode");
            if (w.group->empty()) error(field, "group must be non-empty");
            for (ProcessId m : w.group->members) {
                if (!valid_pid(m)) error(field, "group member out of range");
                else if (m == w.sender) error(field, "group must not contain the sender");
            }
        }
    }

    for (const auto& [pid, adv] : cfg.byzantine) {
        const std::string field = "byzantine[" + std::to_string(pid) + "]";
        if (!valid_pid(pid)) {
            error(field, "process id out of range");
            continue;
        }
        switch (adv.script) {
            case ScriptKind::boost:
                if (adv.boost_amount == 0) error(field, "boost amount must be positive");
                if (!valid_pid(adv.boost_row) || !valid_pid(adv.boost_col))
                    error(field, "boost entry out of range");
                break;
            case ScriptKind::shrink:
                if (adv.shrink_entries.empty()) error(field, "shrink needs target entries");
                for (auto [r, c] : adv.shrink_entries)
                    if (!valid_pid(r) || !valid_pid(c)) error(field, "shrink entry out of range");
                break;
            case ScriptKind::phantom_sent:
                if (!valid_pid(adv.phantom_subject) || adv.phantom_subject == pid)
                    error(field, "phantom subject must be another process");
                if (adv.phantom_times.empty()) error(field, "phantom_sent needs times");
                break;
            case ScriptKind::custom_schedule:
                for (const auto& e : adv.emissions) {
                    if (!valid_pid(e.dest) || e.dest == pid)
                        error(field, "scripted emission dest invalid");
                }
                break;
            case ScriptKind::silent_ack:
            case ScriptKind::withhold_delivered:
            case ScriptKind::crash_at:
                break;
        }
    }

    switch (cfg.delay_model) {
        case DelayModel::fixed: {
            SimDuration d = cfg.effective_fixed_delay();
            if (d < 1 || d > cfg.delta) error("delay_fixed", "fixed delay must be in [1, delta]");
            break;
        }
        case DelayModel::adversarial_schedule:
            if (cfg.delay_default < 1 || cfg.delay_default > cfg.delta)
                error("delay_default", "default delay must be in [1, delta]");
            for (const auto& pd : cfg.delay_schedule) {
                if (!valid_pid(pd.from) || !valid_pid(pd.to) || pd.from == pd.to)
                    error("delay_schedule", "pair out of range");
                if (pd.delay < 1 || pd.delay > cfg.delta)
                    error("delay_schedule", "pair delay must be in [1, delta]");
            }
            break;
        case DelayModel::uniform_random:
            break;
    }

    if (cfg.mcast_hide_group) {
        if (!cfg.multicast || cfg.protocol != Protocol::channel_sync)
            error("mcast_hide_group", "requires multicast channel_sync");
        if (cfg.delta_s != 0)
            error("mcast_hide_group", "hidden groups make send-control timers unusable; "
                                      "delta_s must be 0");
    }

    return out;
}

inline bool has_errors(const std::vector<ConfigViolation>& v)
{
    for (const auto& x : v)
        if (x.severity == ConfigViolation::Severity::error) return true;
    return false;
}

} // namespace causalsim
