#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <memory>
#include <vector>

#include "causalsim/presets.hpp"
#include "causalsim/runner.hpp"
#include "causalsim/simnet.hpp"

using namespace causalsim;

namespace
{

ScenarioConfig tiny(std::uint32_t n, SimDuration delta, SimTime horizon)
{
    ScenarioConfig cfg;
    cfg.n = n;
    cfg.delta = delta;
    cfg.horizon = horizon;
    cfg.delay_model = DelayModel::fixed;
    cfg.delay_fixed = 1;
    return cfg;
}

struct Inert : ProcessHandler
{
    void on_workload(SimEngine&, const WorkloadSend&) override {}
    void on_arrival(SimEngine&, const Envelope&) override {}
};

template <typename F>
struct Scripted : ProcessHandler
{
    F fn;
    explicit Scripted(F f) : fn(std::move(f)) {}
    void on_workload(SimEngine& eng, const WorkloadSend& w) override { fn(eng, &w, nullptr); }
    void on_arrival(SimEngine& eng, const Envelope& env) override { fn(eng, nullptr, &env); }
};

template <typename F>
std::unique_ptr<ProcessHandler> scripted(F f)
{
    return std::make_unique<Scripted<F>>(std::move(f));
}

} // namespace

TEST_CASE("arrival time clamps the draw and respects pair order")
{
    CHECK(arrival_time_for(10, 3, 5, std::nullopt) == 13);
    CHECK(arrival_time_for(10, 0, 5, std::nullopt) == 11);
    CHECK(arrival_time_for(10, 7, 5, std::nullopt) == 15);
    CHECK(arrival_time_for(10, 2, 5, SimTime{20}) == 20);
    CHECK(arrival_time_for(10, 2, 5, SimTime{11}) == 12);
}

TEST_CASE("sends record envelopes and arrivals dispatch in order")
{
    ScenarioConfig cfg = tiny(2, 5, 50);
    cfg.workload.push_back({1, 0, 1, std::nullopt, "a"});
    cfg.workload.push_back({2, 0, 1, std::nullopt, "b"});
    SimEngine eng(cfg);
    std::vector<std::string> seen;
    eng.set_handler(0, scripted([](SimEngine& e, const WorkloadSend* w, const Envelope*) {
        if (!w) return;
        SendSpec s;
        s.dest = *w->dest;
        s.payload = w->payload;
        e.submit(0, std::move(s));
    }));
    eng.set_handler(1, scripted([&](SimEngine&, const WorkloadSend*, const Envelope* env) {
        if (env) seen.push_back(env->payload);
    }));
    Trace t = eng.run();
    CHECK(seen == std::vector<std::string>{"a", "b"});
    REQUIRE(t.envelopes.size() == 2);
    CHECK(t.envelopes[0].sent_at == 1);
    CHECK(t.envelopes[0].arrive_at == 2);
}

TEST_CASE("per-pair fifo holds and delays stay inside the bound")
{
    ScenarioConfig cfg;
    cfg.n = 4;
    cfg.delta = 6;
    cfg.horizon = 400;
    cfg.seed = 1234;
    std::mt19937_64 rng(99);
    cfg.workload = random_workload(4, 60, 300, false, rng);
    for (auto& w : cfg.workload) w.payload = "x";
    SimEngine eng(cfg);
    for (ProcessId p = 0; p < 4; ++p)
        eng.set_handler(p, scripted([p](SimEngine& e, const WorkloadSend* w, const Envelope*) {
            if (!w) return;
            SendSpec s;
            s.dest = *w->dest;
            s.payload = w->payload;
            e.submit(p, std::move(s));
        }));
    Trace t = eng.run();
    REQUIRE(t.envelopes.size() == 60);
    std::map<std::pair<ProcessId, ProcessId>, SimTime> last;
    for (const Envelope& env : t.envelopes) {
        SimDuration d = env.arrive_at - env.sent_at;
        CHECK(d >= 1);
        CHECK(d <= cfg.delta);
        auto key = std::make_pair(env.origin, env.dest);
        auto it = last.find(key);
        if (it != last.end()) CHECK(env.arrive_at >= it->second);
        last[key] = env.arrive_at;
    }
}

TEST_CASE("identical configs replay byte-identical traces")
{
    ScenarioConfig cfg;
    cfg.n = 5;
    cfg.protocol = Protocol::rst;
    cfg.delta = 4;
    cfg.horizon = 300;
    cfg.seed = 777;
    std::mt19937_64 rng(5);
    cfg.workload = random_workload(5, 40, 250, false, rng);
    RunOptions opt;
    opt.check = false;
    std::string a = run_scenario(cfg, opt).trace.to_jsonl();
    std::string b = run_scenario(cfg, opt).trace.to_jsonl();
    CHECK(a == b);
    CHECK_FALSE(a.empty());

    cfg.seed = 778;
    std::string c = run_scenario(cfg, opt).trace.to_jsonl();
    CHECK(a != c);
}

TEST_CASE("timers fire once, stop is idempotent, late stop is a recorded no-op")
{
    ScenarioConfig cfg = tiny(2, 5, 50);
    SimEngine eng(cfg);
    TimerId armed = 0;
    bool fired = false;
    struct TimerOwner : ProcessHandler
    {
        TimerId* slot;
        bool* fired;
        TimerOwner(TimerId* s, bool* f) : slot(s), fired(f) {}
        void on_start(SimEngine& eng) override { *slot = eng.start_timer(0, std::nullopt, 7, "probe"); }
        void on_workload(SimEngine&, const WorkloadSend&) override {}
        void on_arrival(SimEngine&, const Envelope&) override {}
        void on_timer(SimEngine&, TimerId id) override { *fired = *fired || id == *slot; }
    };
    eng.set_handler(0, std::make_unique<TimerOwner>(&armed, &fired));
    eng.set_handler(1, std::make_unique<Inert>());
    Trace t = eng.run();
    CHECK(fired);
    std::size_t timeouts = 0;
    for (const auto& ev : t.events)
        if (ev.kind == EventKind::timeout) {
            timeouts++;
            CHECK(ev.time == 7);
        }
    CHECK(timeouts == 1);

    struct Stopper : ProcessHandler
    {
        TimerId t = 0;
        void on_start(SimEngine& eng) override { t = eng.start_timer(0, std::nullopt, 40, "probe"); }
        void on_workload(SimEngine& eng, const WorkloadSend&) override
        {
            eng.stop_timer(t, "done early");
            eng.stop_timer(t, "again");
        }
        void on_arrival(SimEngine&, const Envelope&) override {}
        void on_timer(SimEngine&, TimerId) override { FAIL("stopped timer fired"); }
    };
    ScenarioConfig cfg2 = cfg;
    cfg2.workload.push_back({3, 0, 1, std::nullopt, ""});
    SimEngine eng3(cfg2);
    eng3.set_handler(0, std::make_unique<Stopper>());
    eng3.set_handler(1, std::make_unique<Inert>());
    Trace t3 = eng3.run();
    std::size_t stops = 0, fires = 0;
    for (const auto& ev : t3.events) {
        if (ev.kind == EventKind::timer_stop) stops++;
        if (ev.kind == EventKind::timeout) fires++;
    }
    CHECK(stops == 1);
    CHECK(fires == 0);
}

TEST_CASE("stopping a timer that already fired records the attempt")
{
    ScenarioConfig cfg = tiny(2, 5, 50);
    cfg.workload.push_back({9, 0, 1, std::nullopt, ""});
    struct LateStopper : ProcessHandler
    {
        TimerId t = 0;
        void on_start(SimEngine& eng) override { t = eng.start_timer(0, std::nullopt, 2, "probe"); }
        void on_workload(SimEngine& eng, const WorkloadSend&) override { eng.stop_timer(t); }
        void on_arrival(SimEngine&, const Envelope&) override {}
    };
    SimEngine eng(cfg);
    eng.set_handler(0, std::make_unique<LateStopper>());
    eng.set_handler(1, std::make_unique<Inert>());
    Trace t = eng.run();
    bool noted = false;
    for (const auto& ev : t.events)
        noted = noted ||
                (ev.kind == EventKind::timer_stop && ev.detail.find("already fired") == 0);
    CHECK(noted);
}

TEST_CASE("message-phase work at a tick runs before timer expirations at that tick")
{
    ScenarioConfig cfg = tiny(2, 5, 50);
    cfg.delay_fixed = 5;
    cfg.workload.push_back({1, 0, 1, std::nullopt, "race"});
    std::vector<std::string> order;
    struct Racer : ProcessHandler
    {
        std::vector<std::string>* order;
        explicit Racer(std::vector<std::string>* o) : order(o) {}
        void on_start(SimEngine& eng) override { eng.start_timer(1, std::nullopt, 6, "race"); }
        void on_workload(SimEngine&, const WorkloadSend&) override {}
        void on_arrival(SimEngine& eng, const Envelope&) override
        {
            order->push_back("arrival@" + std::to_string(eng.now()));
        }
        void on_timer(SimEngine& eng, TimerId) override
        {
            order->push_back("timer@" + std::to_string(eng.now()));
        }
    };
    struct Sender : ProcessHandler
    {
        void on_workload(SimEngine& eng, const WorkloadSend& w) override
        {
            SendSpec s;
            s.dest = *w.dest;
            s.payload = w.payload;
            eng.submit(0, std::move(s));
        }
        void on_arrival(SimEngine&, const Envelope&) override {}
    };
    SimEngine eng(cfg);
    eng.set_handler(0, std::make_unique<Sender>());
    eng.set_handler(1, std::make_unique<Racer>(&order));
    eng.run();
    REQUIRE(order.size() == 2);
    CHECK(order[0] == "arrival@6");
    CHECK(order[1] == "timer@6");
}

TEST_CASE("origin forgery is rejected at submission and recorded")
{
    ScenarioConfig cfg = tiny(3, 5, 50);
    cfg.workload.push_back({1, 0, 1, std::nullopt, "forged"});
    struct Forger : ProcessHandler
    {
        void on_workload(SimEngine& eng, const WorkloadSend& w) override
        {
            SendSpec s;
            s.dest = *w.dest;
            s.claimed_origin = 2;
            CHECK_FALSE(eng.submit(0, std::move(s)).has_value());
        }
        void on_arrival(SimEngine&, const Envelope&) override { FAIL("forged send delivered"); }
    };
    SimEngine eng(cfg);
    eng.set_handler(0, std::make_unique<Forger>());
    eng.set_handler(1, std::make_unique<Inert>());
    eng.set_handler(2, std::make_unique<Inert>());
    Trace t = eng.run();
    CHECK(t.envelopes.empty());
    bool dropped = false;
    for (const auto& ev : t.events)
        dropped = dropped || (ev.kind == EventKind::drop && ev.process == 0 &&
                              ev.detail == "origin forgery rejected: claimed 2");
    CHECK(dropped);
}

TEST_CASE("a throwing handler aborts the run but keeps the partial trace")
{
    ScenarioConfig cfg = tiny(2, 5, 50);
    cfg.workload.push_back({1, 0, 1, std::nullopt, "ok"});
    cfg.workload.push_back({5, 0, 1, std::nullopt, "boom"});
    struct Fragile : ProcessHandler
    {
        void on_workload(SimEngine& eng, const WorkloadSend& w) override
        {
            if (w.payload == "boom") throw std::runtime_error("scripted fault");
            SendSpec s;
            s.dest = *w.dest;
            s.payload = w.payload;
            eng.submit(0, std::move(s));
        }
        void on_arrival(SimEngine&, const Envelope&) override {}
    };
    SimEngine eng(cfg);
    eng.set_handler(0, std::make_unique<Fragile>());
    eng.set_handler(1, std::make_unique<Inert>());
    try {
        eng.run();
        FAIL("expected SimAbort");
    } catch (const SimAbort& a) {
        CHECK(std::string(a.what()).find("scripted fault") != std::string::npos);
        CHECK(a.trace.envelopes.size() == 1);
    }
}

TEST_CASE("invalid submissions are programming errors")
{
    ScenarioConfig cfg = tiny(2, 5, 50);
    cfg.workload.push_back({1, 0, 1, std::nullopt, "x"});
    struct SelfSender : ProcessHandler
    {
        void on_workload(SimEngine& eng, const WorkloadSend&) override
        {
            SendSpec s;
            s.dest = 0;
            eng.submit(0, std::move(s));
        }
        void on_arrival(SimEngine&, const Envelope&) override {}
    };
    SimEngine eng(cfg);
    eng.set_handler(0, std::make_unique<SelfSender>());
    eng.set_handler(1, std::make_unique<Inert>());
    CHECK_THROWS_AS(eng.run(), SimAbort);
}

TEST_CASE("adversarial delay schedule pins chosen pairs")
{
    ScenarioConfig cfg;
    cfg.n = 3;
    cfg.delta = 8;
    cfg.horizon = 100;
    cfg.delay_model = DelayModel::adversarial_schedule;
    cfg.delay_schedule.push_back({0, 1, 8});
    cfg.delay_default = 2;
    cfg.workload.push_back({1, 0, 1, std::nullopt, "slow"});
    cfg.workload.push_back({1, 0, 2, std::nullopt, "fast"});
    SimEngine eng(cfg);
    for (ProcessId p = 0; p < 3; ++p)
        eng.set_handler(p, scripted([p](SimEngine& e, const WorkloadSend* w, const Envelope*) {
            if (!w) return;
            SendSpec s;
            s.dest = *w->dest;
            s.payload = w->payload;
            e.submit(p, std::move(s));
        }));
    Trace t = eng.run();
    REQUIRE(t.envelopes.size() == 2);
    CHECK(t.envelopes[0].arrive_at == 9);
    CHECK(t.envelopes[1].arrive_at == 3);
}
