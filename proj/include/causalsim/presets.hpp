#pragma once

// Canned scenarios. The two matrix-clock presets demonstrate the attacks the
// tolerant protocols exist to survive; each carries the outcome the run is
// expected to produce so the CLI can turn a run into an exit code.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "causalsim/core.hpp"
#include "causalsim/runner.hpp"

namespace causalsim
{

enum class Expectation { clean, liveness_violation, hb_safety_violation };

inline const char* to_string(Expectation e)
{
    switch (e) {
        case Expectation::clean: return "clean";
        case Expectation::liveness_violation: return "liveness violation";
        case Expectation::hb_safety_violation: return "happens-before safety violation";
    }
    return "?";
}

inline bool expectation_met(const Verdict& v, Expectation e)
{
    switch (e) {
        case Expectation::clean: return v.clean();
        case Expectation::liveness_violation: return !v.aborted && !v.liveness_misses.empty();
        case Expectation::hb_safety_violation: return !v.aborted && !v.hb_violations.empty();
    }
    return false;
}

struct PresetSpec
{
    std::string name;
    std::string summary;
    ScenarioConfig config;
    Expectation expect = Expectation::clean;
};

namespace detail
{

inline SimTime preset_horizon(const ScenarioConfig& cfg)
{
    return cfg.workload_end() + 10 * cfg.delta;
}

inline WorkloadSend p2p(SimTime t, ProcessId from, ProcessId to, std::string payload)
{
    WorkloadSend w;
    w.time = t;
    w.sender = from;
    w.dest = to;
    w.payload = std::move(payload);
    return w;
}

inline WorkloadSend mcast(SimTime t, ProcessId from, std::vector<ProcessId> members,
                          std::string payload)
{
    WorkloadSend w;
    w.time = t;
    w.sender = from;
    w.group = GroupSet::of(std::move(members));
    w.payload = std::move(payload);
    return w;
}

} // namespace detail

// A forged matrix entry claims the victim already sent a message it never
// sent; once the victim merges that claim into its own clock, every later
// send to the boosted column is born undeliverable.
inline PresetSpec preset_boost_attack_rst()
{
    PresetSpec p;
    p.name = "boost-attack-rst";
    p.summary = "matrix-clock liveness attack: one boosted entry permanently blocks p0 -> p1";
    p.expect = Expectation::liveness_violation;
    ScenarioConfig& c = p.config;
    c.n = 3;
    c.protocol = Protocol::rst;
    c.delta = 5;
    c.seed = 1;
    c.delay_model = DelayModel::uniform_random;
    AdversaryConfig adv;
    adv.script = ScriptKind::boost;
    adv.boost_row = 0;
    adv.boost_col = 1;
    adv.boost_amount = 1;
    c.byzantine[2] = adv;
    c.workload.push_back(detail::p2p(1, 2, 0, "carrier"));
    c.workload.push_back(detail::p2p(8, 0, 1, "victim"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

// A shrunk matrix entry hides part of the causal past. The direct victim is
// delivered too early at p1; a relay by correct p1 then carries the violation
// to p2, two hops from the forgery.
inline PresetSpec preset_shrink_attack_rst()
{
    PresetSpec p;
    p.name = "shrink-attack-rst";
    p.summary = "matrix-clock safety attack: hidden causal past yields direct and relayed "
                "inversions";
    p.expect = Expectation::hb_safety_violation;
    ScenarioConfig& c = p.config;
    c.n = 4;
    c.protocol = Protocol::rst;
    c.delta = 8;
    c.seed = 1;
    c.delay_model = DelayModel::adversarial_schedule;
    c.delay_default = 1;
    c.delay_schedule.push_back({0, 1, 8});
    c.delay_schedule.push_back({0, 2, 8});
    AdversaryConfig adv;
    adv.script = ScriptKind::shrink;
    adv.shrink_entries = {{0, 1}, {0, 2}};
    c.byzantine[3] = adv;
    c.workload.push_back(detail::p2p(1, 0, 1, "m-direct-victim"));
    c.workload.push_back(detail::p2p(1, 0, 2, "m-trans-victim"));
    c.workload.push_back(detail::p2p(2, 0, 3, "carrier-knowledge"));
    c.workload.push_back(detail::p2p(4, 3, 1, "m-forged"));
    c.workload.push_back(detail::p2p(6, 1, 2, "m-relay"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

inline PresetSpec preset_si_clean()
{
    PresetSpec p;
    p.name = "si-clean";
    p.summary = "sender-inhibition, all correct, overlapping sends exercise the backlog";
    ScenarioConfig& c = p.config;
    c.n = 4;
    c.protocol = Protocol::sender_inhibition;
    c.delta = 5;
    c.seed = 7;
    c.workload.push_back(detail::p2p(1, 0, 1, "a"));
    c.workload.push_back(detail::p2p(1, 0, 2, "b"));
    c.workload.push_back(detail::p2p(2, 1, 2, "c"));
    c.workload.push_back(detail::p2p(3, 2, 3, "d"));
    c.workload.push_back(detail::p2p(5, 3, 0, "e"));
    c.workload.push_back(detail::p2p(6, 0, 3, "f"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

inline PresetSpec preset_si_silent_ack()
{
    PresetSpec p;
    p.name = "si-silent-ack";
    p.summary = "sender-inhibition vs a receiver that never acks: release at exactly 2*delta";
    ScenarioConfig& c = p.config;
    c.n = 3;
    c.protocol = Protocol::sender_inhibition;
    c.delta = 5;
    c.seed = 3;
    AdversaryConfig adv;
    adv.script = ScriptKind::silent_ack;
    c.byzantine[2] = adv;
    c.workload.push_back(detail::p2p(1, 0, 2, "to-silent"));
    c.workload.push_back(detail::p2p(2, 0, 1, "queued-behind"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

inline PresetSpec preset_si_multicast()
{
    PresetSpec p;
    p.name = "si-multicast";
    p.summary = "sender-inhibition group sends: the lock waits on every member";
    ScenarioConfig& c = p.config;
    c.n = 4;
    c.protocol = Protocol::sender_inhibition;
    c.multicast = true;
    c.delta = 5;
    c.seed = 5;
    c.workload.push_back(detail::mcast(1, 0, {1, 2, 3}, "announce"));
    c.workload.push_back(detail::mcast(2, 1, {0, 2}, "reply"));
    c.workload.push_back(detail::p2p(4, 2, 3, "direct"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

inline PresetSpec preset_cs_clean()
{
    PresetSpec p;
    p.name = "cs-clean";
    p.summary = "channel sync, all correct, chained point-to-point traffic";
    ScenarioConfig& c = p.config;
    c.n = 4;
    c.protocol = Protocol::channel_sync;
    c.delta = 5;
    c.delta_s = 0;
    c.seed = 11;
    c.workload.push_back(detail::p2p(1, 0, 1, "w"));
    c.workload.push_back(detail::p2p(2, 1, 2, "x"));
    c.workload.push_back(detail::p2p(3, 2, 3, "y"));
    c.workload.push_back(detail::p2p(4, 3, 0, "z"));
    c.workload.push_back(detail::p2p(5, 0, 2, "q"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

inline PresetSpec preset_cs_phantom()
{
    PresetSpec p;
    p.name = "cs-phantom";
    p.summary = "channel sync vs fabricated sent-controls: they expire without blocking";
    ScenarioConfig& c = p.config;
    c.n = 4;
    c.protocol = Protocol::channel_sync;
    c.delta = 5;
    c.delta_s = 2;
    c.seed = 13;
    AdversaryConfig adv;
    adv.script = ScriptKind::phantom_sent;
    adv.phantom_subject = 1;
    adv.phantom_times = {2, 6};
    c.byzantine[3] = adv;
    c.workload.push_back(detail::p2p(1, 0, 1, "a"));
    c.workload.push_back(detail::p2p(3, 1, 2, "b"));
    c.workload.push_back(detail::p2p(5, 2, 0, "c"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

inline PresetSpec preset_cs_withhold()
{
    PresetSpec p;
    p.name = "cs-withhold";
    p.summary = "channel sync vs a receiver that never reports deliveries";
    ScenarioConfig& c = p.config;
    c.n = 4;
    c.protocol = Protocol::channel_sync;
    c.delta = 5;
    c.delta_s = 2;
    c.seed = 17;
    AdversaryConfig adv;
    adv.script = ScriptKind::withhold_delivered;
    c.byzantine[2] = adv;
    c.workload.push_back(detail::p2p(1, 0, 2, "to-withholder"));
    c.workload.push_back(detail::p2p(2, 0, 1, "next"));
    c.workload.push_back(detail::p2p(4, 1, 3, "cross"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

inline PresetSpec preset_cs_multicast()
{
    PresetSpec p;
    p.name = "cs-multicast";
    p.summary = "channel sync group sends with member-set tracking on sent-controls";
    ScenarioConfig& c = p.config;
    c.n = 4;
    c.protocol = Protocol::channel_sync;
    c.multicast = true;
    c.delta = 5;
    c.delta_s = 2;
    c.seed = 19;
    c.workload.push_back(detail::mcast(1, 0, {1, 2}, "g1"));
    c.workload.push_back(detail::mcast(3, 1, {0, 2, 3}, "g2"));
    c.workload.push_back(detail::p2p(5, 2, 3, "mixed"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

inline PresetSpec preset_cs_multicast_hidden_group()
{
    PresetSpec p;
    p.name = "cs-multicast-hidden-group";
    p.summary = "channel sync group sends without revealing membership in controls";
    ScenarioConfig& c = p.config;
    c.n = 4;
    c.protocol = Protocol::channel_sync;
    c.multicast = true;
    c.mcast_hide_group = true;
    c.delta = 5;
    c.delta_s = 0;
    c.seed = 23;
    c.workload.push_back(detail::mcast(1, 0, {1, 2}, "g1"));
    c.workload.push_back(detail::mcast(3, 1, {0, 2, 3}, "g2"));
    c.workload.push_back(detail::p2p(5, 2, 3, "mixed"));
    c.horizon = detail::preset_horizon(c);
    return p;
}

inline std::vector<PresetSpec> all_presets()
{
    return {preset_boost_attack_rst(),  preset_shrink_attack_rst(),
            preset_si_clean(),          preset_si_silent_ack(),
            preset_si_multicast(),      preset_cs_clean(),
            preset_cs_phantom(),        preset_cs_withhold(),
            preset_cs_multicast(),      preset_cs_multicast_hidden_group()};
}

inline std::optional<PresetSpec> find_preset(const std::string& name)
{
    for (PresetSpec& p : all_presets())
        if (p.name == name) return std::move(p);
    return std::nullopt;
}

// Random but reproducible traffic for soak runs. Senders and destinations are
// drawn uniformly; a quarter of entries become group sends when allowed.
inline std::vector<WorkloadSend> random_workload(std::uint32_t n, std::size_t count,
                                                 SimTime spread, bool allow_multicast,
                                                 std::mt19937_64& rng)
{
    std::vector<WorkloadSend> out;
    for (std::size_t i = 0; i < count; ++i) {
        WorkloadSend w;
        w.time = 1 + static_cast<SimTime>(rng() % spread);
        w.sender = static_cast<ProcessId>(rng() % n);
        w.payload = "m" + std::to_string(i);
        if (allow_multicast && n > 2 && rng() % 4 == 0) {
            std::vector<ProcessId> members;
            for (ProcessId q = 0; q < n; ++q)
                if (q != w.sender && rng() % 2 == 0) members.push_back(q);
            if (members.empty()) members.push_back((w.sender + 1) % n);
            w.group = GroupSet::of(std::move(members));
        } else {
            ProcessId d = static_cast<ProcessId>(rng() % (n - 1));
            if (d >= w.sender) d++;
            w.dest = d;
        }
        out.push_back(std::move(w));
    }
    return out;
}

} // namespace causalsim
