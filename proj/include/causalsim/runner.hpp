#pragma once

// Wires a ScenarioConfig to handlers, runs the simulation, and runs the trace
// checkers. A RunResult carries everything a caller needs: the trace, the
// verdict, and summary statistics.

#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "causalsim/adversary.hpp"
#include "causalsim/core.hpp"
#include "causalsim/oracle.hpp"
#include "causalsim/simnet.hpp"
#include "causalsim/trace.hpp"

namespace causalsim
{

struct RunOptions
{
    bool check = true;
    bool flag_variant = false;
};

struct Verdict
{
    bool aborted = false;
    std::string abort_reason;
    bool checked = false;
    std::vector<SafetyViolation> hb_violations;
    std::vector<SafetyViolation> bhb_violations;
    std::vector<LivenessMiss> liveness_misses;
    std::optional<CsBoundReport> cs_bound;
    std::vector<EarlyDeletion> early_deletions;

    bool clean() const
    {
        return !aborted && checked && bhb_violations.empty() && liveness_misses.empty() &&
               (!cs_bound || cs_bound->stated_held());
    }
};

struct RunStats
{
    std::size_t envelopes = 0;
    std::size_t app_messages = 0;
    std::size_t deliveries = 0;
    std::size_t drops = 0;
    SimDuration max_queue_delay = 0;
    double mean_queue_delay = 0.0;
    SimDuration max_e2e_delay = 0;
    double mean_e2e_delay = 0.0;
};

struct RunResult
{
    ScenarioConfig config;
    Trace trace;
    Verdict verdict;
    RunStats stats;
};

inline RunStats compute_stats(const Trace& trace, const MessageIndex& idx)
{
    RunStats s;
    s.envelopes = trace.envelopes.size();
    s.app_messages = idx.messages.size();
    std::map<EnvelopeId, SimTime> pushed;
    double queue_sum = 0.0, e2e_sum = 0.0;
    std::size_t queue_n = 0;
    for (const TraceEvent& ev : trace.events) {
        if (ev.kind == EventKind::drop) s.drops++;
        if (!ev.envelope) continue;
        const Envelope& env = trace.envelope(*ev.envelope);
        if (env.kind != MsgKind::app) continue;
        if (ev.kind == EventKind::push) {
            pushed.try_emplace(env.id, ev.time);
        } else if (ev.kind == EventKind::deliver) {
            s.deliveries++;
            SimDuration e2e = ev.time - env.sent_at;
            e2e_sum += static_cast<double>(e2e);
            s.max_e2e_delay = std::max(s.max_e2e_delay, e2e);
            auto it = pushed.find(env.id);
            if (it != pushed.end()) {
                SimDuration q = ev.time - it->second;
                queue_sum += static_cast<double>(q);
                queue_n++;
                s.max_queue_delay = std::max(s.max_queue_delay, q);
            }
        }
    }
    if (s.deliveries) s.mean_e2e_delay = e2e_sum / static_cast<double>(s.deliveries);
    if (queue_n) s.mean_queue_delay = queue_sum / static_cast<double>(queue_n);
    return s;
}

inline RunResult run_scenario(const ScenarioConfig& cfg, RunOptions opt = {})
{
    auto issues = validate_config(cfg);
    if (has_errors(issues)) {
        std::string what = "invalid scenario:";
        for (const auto& v : issues)
            if (v.severity == ConfigViolation::Severity::error)
                what += " [" + v.field + "] " + v.message;
        throw std::invalid_argument(what);
    }

    RunResult res;
    res.config = cfg;
    SimEngine eng(cfg);
    CsOptions cs_opt{cfg.mcast_hide_group, opt.flag_variant};
    for (ProcessId p = 0; p < cfg.n; ++p) {
        if (cfg.is_byzantine(p))
            eng.set_handler(p, make_adversary(p, cfg, cs_opt));
        else
            eng.set_handler(p, make_honest_handler(p, cfg, cs_opt));
    }
    try {
        res.trace = eng.run();
    } catch (SimAbort& a) {
        res.verdict.aborted = true;
        res.verdict.abort_reason = a.what();
        res.trace = std::move(a.trace);
    }

    MessageIndex idx = index_messages(res.trace, cfg.n);
    res.stats = compute_stats(res.trace, idx);
    if (opt.check && !res.verdict.aborted) {
        std::vector<bool> correct = correct_vector(cfg);
        CausalRelation hb = build_hb(idx);
        CausalRelation bhb = build_bhb(idx, correct);
        res.verdict.hb_violations = check_safety(idx, hb, correct);
        res.verdict.bhb_violations = check_safety(idx, bhb, correct);
        res.verdict.liveness_misses = check_liveness(idx, cfg);
        if (cfg.protocol == Protocol::channel_sync) {
            res.verdict.cs_bound = check_cs_bound(res.trace, cfg);
            res.verdict.early_deletions = check_lemma1(res.trace, cfg);
        }
        res.verdict.checked = true;
    }
    return res;
}

inline std::string describe_message(const MessageIndex& idx, std::size_t id)
{
    const AppMessage& m = idx.messages[id];
    std::ostringstream os;
    if (!m.payload.empty())
        os << '"' << m.payload << '"';
    else
        os << "message #" << id;
    os << " (from p" << m.origin << " at t=" << m.sent_at << ")";
    return os.str();
}

inline std::string render_report(const RunResult& res)
{
    const ScenarioConfig& cfg = res.config;
    MessageIndex idx = index_messages(res.trace, cfg.n);
    std::ostringstream os;
    os << "scenario: protocol=" << to_string(cfg.protocol) << " n=" << cfg.n
       << " delta=" << cfg.delta;
    if (cfg.protocol == Protocol::channel_sync)
        os << " delta_s=" << cfg.delta_s << " delta_r=" << cfg.effective_delta_r();
    os << " seed=" << cfg.seed << " horizon=" << cfg.horizon << "\n";
    if (!cfg.byzantine.empty()) {
        os << "byzantine:";
        for (const auto& [p, adv] : cfg.byzantine)
            os << " p" << p << "=" << to_string(adv.script);
        os << "\n";
    }
    os << "traffic: " << res.stats.envelopes << " envelopes, " << res.stats.app_messages
       << " app messages, " << res.stats.deliveries << " deliveries, " << res.stats.drops
       << " drops\n";
    os << std::fixed << std::setprecision(2);
    os << "delay: queue mean " << res.stats.mean_queue_delay << " max "
       << res.stats.max_queue_delay << ", end-to-end mean " << res.stats.mean_e2e_delay
       << " max " << res.stats.max_e2e_delay << "\n";

    if (res.verdict.aborted) {
        os << "ABORTED: " << res.verdict.abort_reason << "\n";
        return os.str();
    }
    if (!res.verdict.checked) {
        os << "checks: skipped\n";
        return os.str();
    }
    for (const SafetyViolation& v : res.verdict.bhb_violations) {
        os << "VIOLATION (byzantine happens-before) at p" << v.at << ": "
           << describe_message(idx, v.early_msg) << " delivered at t=" << v.early_time
           << " before causal predecessor " << describe_message(idx, v.late_msg);
        if (v.late_time)
            os << " delivered at t=" << *v.late_time;
        else
            os << " which was never delivered there";
        os << "\n";
    }
    for (const SafetyViolation& v : res.verdict.hb_violations) {
        os << "violation (happens-before) at p" << v.at << ": "
           << describe_message(idx, v.early_msg) << " delivered at t=" << v.early_time
           << " before causal predecessor " << describe_message(idx, v.late_msg);
        if (v.late_time)
            os << " delivered at t=" << *v.late_time;
        else
            os << " which was never delivered there";
        os << "\n";
    }
    for (const LivenessMiss& l : res.verdict.liveness_misses)
        os << "LIVENESS: p" << l.sender << " -> p" << l.dest << " expected " << l.expected
           << " deliveries, got " << l.got << "\n";
    if (res.verdict.cs_bound) {
        const CsBoundReport& b = *res.verdict.cs_bound;
        os << "queueing bound: max " << b.max_delay << " of allowed " << b.bound_stated << " ("
           << (b.stated_held() ? "held" : "EXCEEDED") << ", " << b.checked << " deliveries)\n";
        if (!b.stated_held())
            os << "  fallback bound " << b.bound_alt << " "
               << (b.over_alt.empty() ? "held" : "EXCEEDED") << "\n";
    }
    for (const EarlyDeletion& e : res.verdict.early_deletions) {
        os << "EARLY DELETION at p" << e.at << ": delivered-control #" << e.delivered_ctl
           << " expired at t=" << e.deleted_at << " before its sent-control was processed";
        if (e.sent_processed_at) os << " (processed at t=" << *e.sent_processed_at << ")";
        os << "\n";
    }
    os << "verdict: "
       << (res.verdict.clean()
               ? "clean"
               : (res.verdict.bhb_violations.empty() && res.verdict.liveness_misses.empty()
                      ? "not clean"
                      : "violations found"))
       << "\n";
    return os.str();
}

inline std::string verdict_json(const RunResult& res)
{
    std::ostringstream os;
    os << "{\"clean\":" << (res.verdict.clean() ? "true" : "false")
       << ",\"aborted\":" << (res.verdict.aborted ? "true" : "false")
       << ",\"checked\":" << (res.verdict.checked ? "true" : "false")
       << ",\"hb_violations\":" << res.verdict.hb_violations.size()
       << ",\"bhb_violations\":" << res.verdict.bhb_violations.size()
       << ",\"liveness_misses\":" << res.verdict.liveness_misses.size()
       << ",\"early_deletions\":" << res.verdict.early_deletions.size();
    if (res.verdict.cs_bound) {
        os << ",\"queue_bound\":" << res.verdict.cs_bound->bound_stated
           << ",\"queue_bound_held\":"
           << (res.verdict.cs_bound->stated_held() ? "true" : "false")
           << ",\"max_queue_delay\":" << res.verdict.cs_bound->max_delay;
    } else {
        os << ",\"queue_bound\":null,\"queue_bound_held\":null,\"max_queue_delay\":"
           << res.stats.max_queue_delay;
    }
    os << ",\"deliveries\":" << res.stats.deliveries << "}";
    return os.str();
}

struct SweepRow
{
    SimDuration delta_s = 0;
    double mean_delay = 0.0;
    SimDuration max_delay = 0;
    SimDuration bound = 0;
    std::size_t violations = 0;
    bool clean = false;
};

inline std::vector<SweepRow> sweep_delta_s(ScenarioConfig base,
                                           const std::vector<SimDuration>& values,
                                           RunOptions opt = {})
{
    std::vector<SweepRow> rows;
    for (SimDuration v : values) {
        ScenarioConfig cfg = base;
        cfg.delta_s = v;
        RunResult res = run_scenario(cfg, opt);
        SweepRow row;
        row.delta_s = v;
        if (res.verdict.cs_bound) {
            row.mean_delay = res.verdict.cs_bound->mean_delay;
            row.max_delay = res.verdict.cs_bound->max_delay;
            row.bound = res.verdict.cs_bound->bound_stated;
        } else {
            row.mean_delay = res.stats.mean_queue_delay;
            row.max_delay = res.stats.max_queue_delay;
        }
        row.violations = res.verdict.bhb_violations.size() + res.verdict.liveness_misses.size();
        row.clean = res.verdict.clean();
        rows.push_back(row);
    }
    return rows;
}

inline std::string render_sweep(const std::vector<SweepRow>& rows)
{
    std::ostringstream os;
    os << "delta_s\tmean_delay\tmax_delay\tbound\tviolations\n";
    os << std::fixed << std::setprecision(2);
    for (const SweepRow& r : rows)
        os << r.delta_s << '\t' << r.mean_delay << '\t' << r.max_delay << '\t' << r.bound
           << '\t' << r.violations << '\n';
    return os.str();
}

} // namespace causalsim
