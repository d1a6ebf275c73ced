#pragma once

// JSON scenario loader. Parsing overlays onto a base config: only keys present
// in the document are overwritten, so presets, config files, and command-line
// flags can be layered in precedence order.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalsim/core.hpp"

namespace causalsim
{

namespace detail
{

inline bool expect_uint(const nlohmann::json& j, const std::string& where,
                        std::vector<std::string>& errors)
{
    if (j.is_number_unsigned()) return true;
    errors.push_back(where + ": expected a non-negative integer");
    return false;
}

inline bool check_keys(const nlohmann::json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed,
                       std::vector<std::string>& errors)
{
    bool ok = true;
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) known = true;
        if (!known) {
            errors.push_back(where + ": unknown key \"" + item.key() + "\"");
            ok = false;
        }
    }
    return ok;
}

inline std::optional<GroupSet> parse_group(const nlohmann::json& j, const std::string& where,
                                           std::vector<std::string>& errors)
{
    if (!j.is_array()) {
        errors.push_back(where + ": expected an array of process ids");
        return std::nullopt;
    }
    std::vector<ProcessId> members;
    for (const auto& e : j) {
        if (!expect_uint(e, where, errors)) return std::nullopt;
        members.push_back(e.get<ProcessId>());
    }
    return GroupSet::of(std::move(members));
}

inline std::optional<PairSeq> parse_pair_seq(const nlohmann::json& j, const std::string& where,
                                             std::vector<std::string>& errors)
{
    if (!j.is_array() || j.size() != 3 || !j[0].is_number_unsigned() ||
        !j[1].is_number_unsigned() || !j[2].is_number_unsigned()) {
        errors.push_back(where + ": expected [sender, receiver, k]");
        return std::nullopt;
    }
    return PairSeq{j[0].get<ProcessId>(), j[1].get<ProcessId>(), j[2].get<std::uint64_t>()};
}

inline void parse_workload(const nlohmann::json& j, ScenarioConfig& cfg,
                           std::vector<std::string>& errors)
{
    if (!j.is_array()) {
        errors.push_back("workload: expected an array");
        return;
    }
    cfg.workload.clear();
    std::size_t idx = 0;
    for (const auto& e : j) {
        std::string where = "workload[" + std::to_string(idx++) + "]";
        if (!e.is_object()) {
            errors.push_back(where + ": expected an object");
            continue;
        }
        check_keys(e, where, {"time", "sender", "dest", "group", "payload"}, errors);
        WorkloadSend w;
        if (e.contains("time") && expect_uint(e["time"], where + ".time", errors))
            w.time = e["time"].get<SimTime>();
        if (e.contains("sender") && expect_uint(e["sender"], where + ".sender", errors))
            w.sender = e["sender"].get<ProcessId>();
        if (e.contains("dest") && expect_uint(e["dest"], where + ".dest", errors))
            w.dest = e["dest"].get<ProcessId>();
        if (e.contains("group")) w.group = parse_group(e["group"], where + ".group", errors);
        if (e.contains("payload")) {
            if (e["payload"].is_string())
                w.payload = e["payload"].get<std::string>();
            else
                errors.push_back(where + ".payload: expected a string");
        }
        cfg.workload.push_back(std::move(w));
    }
}

inline void parse_emissions(const nlohmann::json& j, AdversaryConfig& adv,
                            const std::string& where, std::vector<std::string>& errors)
{
    if (!j.is_array()) {
        errors.push_back(where + ": expected an array");
        return;
    }
    std::size_t idx = 0;
    for (const auto& e : j) {
        std::string w = where + "[" + std::to_string(idx++) + "]";
        if (!e.is_object()) {
            errors.push_back(w + ": expected an object");
            continue;
        }
        check_keys(e, w,
                   {"time", "dest", "kind", "tag", "subject", "subject_group", "seq", "payload",
                    "claimed_origin"},
                   errors);
        ScriptedEmission em;
        if (e.contains("time") && expect_uint(e["time"], w + ".time", errors))
            em.time = e["time"].get<SimTime>();
        if (e.contains("dest") && expect_uint(e["dest"], w + ".dest", errors))
            em.dest = e["dest"].get<ProcessId>();
        if (e.contains("kind")) {
            std::string k = e["kind"].is_string() ? e["kind"].get<std::string>() : "";
            if (k == "app")
                em.kind = MsgKind::app;
            else if (k == "control")
                em.kind = MsgKind::control;
            else if (k == "ack")
                em.kind = MsgKind::ack;
            else
                errors.push_back(w + ".kind: expected \"app\", \"control\", or \"ack\"");
        }
        if (e.contains("tag")) {
            std::string t = e["tag"].is_string() ? e["tag"].get<std::string>() : "";
            if (t == "sent")
                em.tag = CtlTag::sent;
            else if (t == "delivered")
                em.tag = CtlTag::delivered;
            else
                errors.push_back(w + ".tag: expected \"sent\" or \"delivered\"");
        }
        if (e.contains("subject") && expect_uint(e["subject"], w + ".subject", errors))
            em.subject = e["subject"].get<ProcessId>();
        if (e.contains("subject_group"))
            em.subject_group = parse_group(e["subject_group"], w + ".subject_group", errors);
        if (e.contains("seq")) {
            if (auto ps = parse_pair_seq(e["seq"], w + ".seq", errors)) em.seq = *ps;
        }
        if (e.contains("payload")) {
            if (e["payload"].is_string())
                em.payload = e["payload"].get<std::string>();
            else
                errors.push_back(w + ".payload: expected a string");
        }
        if (e.contains("claimed_origin") &&
            expect_uint(e["claimed_origin"], w + ".claimed_origin", errors))
            em.claimed_origin = e["claimed_origin"].get<ProcessId>();
        adv.emissions.push_back(std::move(em));
    }
}

inline void parse_adversary(const nlohmann::json& j, ProcessId pid, ScenarioConfig& cfg,
                            std::vector<std::string>& errors)
{
    std::string where = "byzantine[" + std::to_string(pid) + "]";
    if (!j.is_object()) {
        errors.push_back(where + ": expected an object");
        return;
    }
    check_keys(j, where,
               {"script", "pair", "amount", "entries", "time", "subject", "times", "seq_start",
                "emissions"},
               errors);
    if (!j.contains("script") || !j["script"].is_string()) {
        errors.push_back(where + ": missing \"script\"");
        return;
    }
    AdversaryConfig adv;
    std::string s = j["script"].get<std::string>();
    if (s == "boost") {
        adv.script = ScriptKind::boost;
        if (j.contains("pair") && j["pair"].is_array() && j["pair"].size() == 2 &&
            j["pair"][0].is_number_unsigned() && j["pair"][1].is_number_unsigned()) {
            adv.boost_row = j["pair"][0].get<ProcessId>();
            adv.boost_col = j["pair"][1].get<ProcessId>();
        } else {
            errors.push_back(where + ".pair: expected [row, col]");
        }
        if (j.contains("amount") && expect_uint(j["amount"], where + ".amount", errors))
            adv.boost_amount = j["amount"].get<std::uint64_t>();
    } else if (s == "shrink") {
        adv.script = ScriptKind::shrink;
        if (j.contains("entries") && j["entries"].is_array()) {
            for (const auto& e : j["entries"]) {
                if (e.is_array() && e.size() == 2 && e[0].is_number_unsigned() &&
                    e[1].is_number_unsigned())
                    adv.shrink_entries.emplace_back(e[0].get<ProcessId>(),
                                                    e[1].get<ProcessId>());
                else
                    errors.push_back(where + ".entries: expected [[row, col], ...]");
            }
        } else {
            errors.push_back(where + ".entries: expected [[row, col], ...]");
        }
    } else if (s == "silent_ack") {
        adv.script = ScriptKind::silent_ack;
    } else if (s == "phantom_sent") {
        adv.script = ScriptKind::phantom_sent;
        if (j.contains("subject") && expect_uint(j["subject"], where + ".subject", errors))
            adv.phantom_subject = j["subject"].get<ProcessId>();
        if (j.contains("times") && j["times"].is_array())
            for (const auto& t : j["times"])
                if (expect_uint(t, where + ".times", errors))
                    adv.phantom_times.push_back(t.get<SimTime>());
        if (j.contains("seq_start") && expect_uint(j["seq_start"], where + ".seq_start", errors))
            adv.phantom_seq_start = j["seq_start"].get<std::uint64_t>();
    } else if (s == "withhold_delivered") {
        adv.script = ScriptKind::withhold_delivered;
    } else if (s == "crash_at") {
        adv.script = ScriptKind::crash_at;
        if (j.contains("time") && expect_uint(j["time"], where + ".time", errors))
            adv.crash_time = j["time"].get<SimTime>();
    } else if (s == "silent") {
        adv.script = ScriptKind::crash_at;
        adv.crash_time = 0;
    } else if (s == "custom_schedule") {
        adv.script = ScriptKind::custom_schedule;
        if (j.contains("emissions"))
            parse_emissions(j["emissions"], adv, where + ".emissions", errors);
    } else {
        errors.push_back(where + ".script: unknown script \"" + s + "\"");
        return;
    }
    cfg.byzantine[pid] = std::move(adv);
}

} // namespace detail

// Overlays document fields onto cfg. Returns false (with messages appended)
// when the document is malformed; semantic checks stay in validate_config.
inline bool apply_config_json(const nlohmann::json& j, ScenarioConfig& cfg,
                              std::vector<std::string>& errors)
{
    std::size_t before = errors.size();
    if (!j.is_object()) {
        errors.push_back("config root: expected an object");
        return false;
    }
    detail::check_keys(j, "config",
                       {"n", "protocol", "multicast", "delta", "delta_s", "delta_r", "horizon",
                        "seed", "workload", "byzantine", "delay_model", "delay_fixed",
                        "delay_schedule", "delay_default", "mcast_hide_group"},
                       errors);

    using detail::expect_uint;
    if (j.contains("n") && expect_uint(j["n"], "n", errors)) cfg.n = j["n"].get<std::uint32_t>();
    if (j.contains("protocol")) {
        if (auto p = protocol_from_string(j["protocol"].is_string()
                                              ? j["protocol"].get<std::string>()
                                              : ""))
            cfg.protocol = *p;
        else
            errors.push_back("protocol: expected \"rst\", \"sender_inhibition\", or "
                             "\"channel_sync\"");
    }
    if (j.contains("multicast")) {
        if (j["multicast"].is_boolean())
            cfg.multicast = j["multicast"].get<bool>();
        else
            errors.push_back("multicast: expected a boolean");
    }
    if (j.contains("delta") && expect_uint(j["delta"], "delta", errors))
        cfg.delta = j["delta"].get<SimDuration>();
    if (j.contains("delta_s") && expect_uint(j["delta_s"], "delta_s", errors))
        cfg.delta_s = j["delta_s"].get<SimDuration>();
    if (j.contains("delta_r") && expect_uint(j["delta_r"], "delta_r", errors))
        cfg.delta_r = j["delta_r"].get<SimDuration>();
    if (j.contains("horizon") && expect_uint(j["horizon"], "horizon", errors))
        cfg.horizon = j["horizon"].get<SimTime>();
    if (j.contains("seed") && expect_uint(j["seed"], "seed", errors))
        cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workload")) detail::parse_workload(j["workload"], cfg, errors);
    if (j.contains("byzantine")) {
        if (j["byzantine"].is_object()) {
            cfg.byzantine.clear();
            for (const auto& item : j["byzantine"].items()) {
                ProcessId pid = 0;
                try {
                    pid = static_cast<ProcessId>(std::stoul(item.key()));
                } catch (const std::exception&) {
                    errors.push_back("byzantine: key \"" + item.key() +
                                     "\" is not a process id");
                    continue;
                }
                detail::parse_adversary(item.value(), pid, cfg, errors);
            }
        } else {
            errors.push_back("byzantine: expected an object keyed by process id");
        }
    }
    if (j.contains("delay_model")) {
        if (auto m = delay_model_from_string(j["delay_model"].is_string()
                                                 ? j["delay_model"].get<std::string>()
                                                 : ""))
            cfg.delay_model = *m;
        else
            errors.push_back("delay_model: expected \"fixed\", \"uniform_random\", or "
                             "\"adversarial_schedule\"");
    }
    if (j.contains("delay_fixed") && expect_uint(j["delay_fixed"], "delay_fixed", errors))
        cfg.delay_fixed = j["delay_fixed"].get<SimDuration>();
    if (j.contains("delay_schedule")) {
        if (j["delay_schedule"].is_array()) {
            cfg.delay_schedule.clear();
            std::size_t idx = 0;
            for (const auto& e : j["delay_schedule"]) {
                std::string where = "delay_schedule[" + std::to_string(idx++) + "]";
                if (!e.is_object()) {
                    errors.push_back(where + ": expected an object");
                    continue;
                }
                detail::check_keys(e, where, {"from", "to", "delay"}, errors);
                PairDelay pd;
                if (e.contains("from") && expect_uint(e["from"], where + ".from", errors))
                    pd.from = e["from"].get<ProcessId>();
                if (e.contains("to") && expect_uint(e["to"], where + ".to", errors))
                    pd.to = e["to"].get<ProcessId>();
                if (e.contains("delay") && expect_uint(e["delay"], where + ".delay", errors))
                    pd.delay = e["delay"].get<SimDuration>();
                cfg.delay_schedule.push_back(pd);
            }
        } else {
            errors.push_back("delay_schedule: expected an array");
        }
    }
    if (j.contains("delay_default") && expect_uint(j["delay_default"], "delay_default", errors))
        cfg.delay_default = j["delay_default"].get<SimDuration>();
    if (j.contains("mcast_hide_group")) {
        if (j["mcast_hide_group"].is_boolean())
            cfg.mcast_hide_group = j["mcast_hide_group"].get<bool>();
        else
            errors.push_back("mcast_hide_group: expected a boolean");
    }
    return errors.size() == before;
}

inline std::optional<ScenarioConfig> parse_config_text(const std::string& text,
                                                       ScenarioConfig base,
                                                       std::vector<std::string>& errors)
{
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        errors.push_back("config: invalid JSON");
        return std::nullopt;
    }
    if (!apply_config_json(j, base, errors)) return std::nullopt;
    return base;
}

} // namespace causalsim
