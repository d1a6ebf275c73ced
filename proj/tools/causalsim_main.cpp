// Scenario runner. A scenario comes from a preset, a JSON config file, or
// flags; later sources override earlier ones field by field. Exit status: 0
// when the run matched its expectation (clean, or the preset's scripted
// attack landed), 1 when it did not, 2 for configuration problems.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causalsim/config_json.hpp"
#include "causalsim/core.hpp"
#include "causalsim/presets.hpp"
#include "causalsim/runner.hpp"

namespace
{

struct SharedFlags
{
    std::string config_path;
    std::string preset_name;
    std::string protocol;
    std::uint32_t n = 0;
    std::uint64_t delta = 0;
    std::uint64_t delta_s = 0;
    std::uint64_t delta_r = 0;
    std::uint64_t seed = 0;
    std::uint64_t horizon = 0;
    bool multicast = false;
    bool mcast_hide_group = false;
};

void add_shared_flags(CLI::App* cmd, SharedFlags& f)
{
    cmd->add_option("--config", f.config_path, "scenario JSON file");
    cmd->add_option("--preset", f.preset_name, "named scenario preset");
    cmd->add_option("--protocol", f.protocol, "rst | sender_inhibition | channel_sync");
    cmd->add_option("--n", f.n, "process count");
    cmd->add_option("--delta", f.delta, "network delay bound (ticks)");
    cmd->add_option("--delta-s", f.delta_s, "sent-control timer");
    cmd->add_option("--delta-r", f.delta_r, "delivered-control timer");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--horizon", f.horizon, "simulation end tick");
    cmd->add_flag("--multicast", f.multicast, "enable group sends");
    cmd->add_flag("--mcast-hide-group", f.mcast_hide_group,
                  "hide group membership in sent-controls");
}

// Returns nullopt (after printing to stderr) on any configuration problem.
std::optional<std::pair<causalsim::ScenarioConfig, causalsim::Expectation>>
assemble_config(CLI::App* cmd, const SharedFlags& f)
{
    causalsim::ScenarioConfig cfg;
    causalsim::Expectation expect = causalsim::Expectation::clean;

    if (cmd->count("--preset")) {
        auto preset = causalsim::find_preset(f.preset_name);
        if (!preset) {
            std::cerr << "unknown preset \"" << f.preset_name << "\"\n";
            return std::nullopt;
        }
        cfg = preset->config;
        expect = preset->expect;
    }
    if (cmd->count("--config")) {
        std::ifstream in(f.config_path);
        if (!in) {
            std::cerr << "cannot read " << f.config_path << "\n";
            return std::nullopt;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        std::vector<std::string> errors;
        auto loaded = causalsim::parse_config_text(buf.str(), cfg, errors);
        if (!loaded) {
            for (const std::string& e : errors) std::cerr << e << "\n";
            return std::nullopt;
        }
        cfg = *loaded;
    }
    if (cmd->count("--protocol")) {
        auto p = causalsim::protocol_from_string(f.protocol);
        if (!p) {
            std::cerr << "unknown protocol \"" << f.protocol << "\"\n";
            return std::nullopt;
        }
        cfg.protocol = *p;
    }
    if (cmd->count("--n")) cfg.n = f.n;
    if (cmd->count("--delta")) cfg.delta = f.delta;
    if (cmd->count("--delta-s")) cfg.delta_s = f.delta_s;
    if (cmd->count("--delta-r")) cfg.delta_r = f.delta_r;
    if (cmd->count("--seed")) cfg.seed = f.seed;
    if (cmd->count("--horizon")) cfg.horizon = f.horizon;
    if (cmd->count("--multicast")) cfg.multicast = f.multicast;
    if (cmd->count("--mcast-hide-group")) cfg.mcast_hide_group = f.mcast_hide_group;

    auto issues = causalsim::validate_config(cfg);
    bool bad = false;
    for (const auto& v : issues) {
        bool err = v.severity == causalsim::ConfigViolation::Severity::error;
        std::cerr << (err ? "error" : "warning") << " [" << v.field << "]: " << v.message
                  << "\n";
        bad = bad || err;
    }
    if (bad) return std::nullopt;
    return std::make_pair(cfg, expect);
}

std::optional<std::vector<causalsim::SimDuration>> parse_values(const std::string& csv)
{
    std::vector<causalsim::SimDuration> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    if (out.empty()) return std::nullopt;
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"deterministic simulator for Byzantine-tolerant causal message ordering"};
    app.require_subcommand(1);

    SharedFlags run_flags;
    std::string out_path;
    bool check = true;
    CLI::App* run_cmd = app.add_subcommand("run", "run one scenario and judge the outcome");
    add_shared_flags(run_cmd, run_flags);
    run_cmd->add_option("--out", out_path, "write the event trace as JSON lines");
    run_cmd->add_flag("--check,!--no-check", check, "run the trace checkers (default on)");

    SharedFlags sweep_flags;
    std::string values_csv;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "re-run a scenario across sent-control timer values");
    add_shared_flags(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--values", values_csv, "comma-separated delta_s values")
        ->required();

    CLI::App* list_cmd = app.add_subcommand("list", "list scenario presets");

    CLI11_PARSE(app, argc, argv);

    if (list_cmd->parsed()) {
        for (const causalsim::PresetSpec& p : causalsim::all_presets())
            std::cout << p.name << "\t" << to_string(p.expect) << "\t" << p.summary << "\n";
        return 0;
    }

    if (run_cmd->parsed()) {
        auto assembled = assemble_config(run_cmd, run_flags);
        if (!assembled) return 2;
        auto [cfg, expect] = *assembled;
        causalsim::RunOptions opt;
        opt.check = check;
        causalsim::RunResult res = causalsim::run_scenario(cfg, opt);
        std::cout << causalsim::render_report(res);
        if (!out_path.empty()) {
            std::ofstream out(out_path);
            if (!out) {
                std::cerr << "cannot write " << out_path << "\n";
                return 2;
            }
            res.trace.write_jsonl(out);
        }
        std::cout << causalsim::verdict_json(res) << "\n";
        if (!check) return 0;
        bool met = causalsim::expectation_met(res.verdict, expect);
        std::cout << "expected " << to_string(expect) << ": " << (met ? "met" : "NOT met")
                  << "\n";
        return met ? 0 : 1;
    }

    auto assembled = assemble_config(sweep_cmd, sweep_flags);
    if (!assembled) return 2;
    auto values = parse_values(values_csv);
    if (!values) {
        std::cerr << "--values needs a non-empty comma-separated list of ticks\n";
        return 2;
    }
    auto rows = causalsim::sweep_delta_s(assembled->first, *values);
    std::cout << causalsim::render_sweep(rows);
    for (const causalsim::SweepRow& r : rows)
        if (!r.clean) return 1;
    return 0;
}
