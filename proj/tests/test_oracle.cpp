#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "causalsim/oracle.hpp"
#include "causalsim/presets.hpp"
#include "causalsim/runner.hpp"

using namespace causalsim;

namespace
{

// Hand-built trace: p0 sends m0 to p1; p1 delivers m0, then sends m1 to p2;
// p2 delivers m1. m0 must precede m1.
Trace chain_trace()
{
    Trace t;
    Envelope m0;
    m0.id = 0;
    m0.origin = 0;
    m0.dest = 1;
    m0.pair_seq = PairSeq{0, 1, 1};
    Envelope m1;
    m1.id = 1;
    m1.origin = 1;
    m1.dest = 2;
    m1.pair_seq = PairSeq{1, 2, 1};
    t.envelopes = {m0, m1};
    t.record(1, 0, EventKind::send, 0);
    t.record(3, 1, EventKind::deliver, 0);
    t.record(4, 1, EventKind::send, 1);
    t.record(6, 2, EventKind::deliver, 1);
    return t;
}

} // namespace

TEST_CASE("indexing groups envelopes into messages with delivery times")
{
    Trace t = chain_trace();
    MessageIndex idx = index_messages(t, 3);
    REQUIRE(idx.messages.size() == 2);
    CHECK(idx.messages[0].origin == 0);
    CHECK(idx.messages[0].delivered_at.at(1) == 3);
    CHECK(idx.messages[1].delivered_at.at(2) == 6);
    REQUIRE(idx.actions[1].size() == 2);
    CHECK_FALSE(idx.actions[1][0].is_send);
    CHECK(idx.actions[1][1].is_send);
}

TEST_CASE("multicast envelopes sharing a key collapse into one message")
{
    Trace t;
    for (ProcessId d : {1u, 2u}) {
        Envelope e;
        e.id = d - 1;
        e.origin = 0;
        e.dest = d;
        e.pair_seq = PairSeq{0, d, 1};
        e.match_key = PairSeq{0, 0, 5};
        e.group = GroupSet::of({1, 2});
        t.envelopes.push_back(e);
        t.record(1, 0, EventKind::send, e.id);
    }
    t.record(2, 1, EventKind::deliver, 0);
    t.record(3, 2, EventKind::deliver, 1);
    MessageIndex idx = index_messages(t, 3);
    REQUIRE(idx.messages.size() == 1);
    CHECK(idx.messages[0].dests == std::set<ProcessId>{1, 2});
    CHECK(idx.messages[0].delivered_at.size() == 2);
    // One send action at the origin, not two.
    CHECK(idx.actions[0].size() == 1);
}

TEST_CASE("the happens-before relation chains sends through deliveries")
{
    MessageIndex idx = index_messages(chain_trace(), 3);
    CausalRelation hb = build_hb(idx);
    CHECK(hb.precedes(0, 1));
    CHECK_FALSE(hb.precedes(1, 0));
    CHECK(hb.irreflexive());
}

TEST_CASE("transitive closure agrees with the cubic reference on random graphs")
{
    std::mt19937_64 rng(424242);
    for (int round = 0; round < 50; ++round) {
        std::size_t n = 2 + rng() % 11;
        CausalRelation r;
        r.n = n;
        std::size_t edges = rng() % (n * 2);
        for (std::size_t i = 0; i < edges; ++i) {
            std::size_t a = rng() % n, b = rng() % n;
            if (a != b) r.edges.push_back({a, b});
        }
        auto expected = brute_force_closure(r.edges, n);
        close_relation(r);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                CHECK(r.closure[i][j] == expected[i][j]);
    }
}

TEST_CASE("the byzantine-aware order drops edges created by faulty processes")
{
    // p1 is byzantine. p0 -> p1 (m0), then p1 -> p2 (m1): with p1 faulty there
    // is no witnessed chain from m0 to m1.
    Trace t = chain_trace();
    MessageIndex idx = index_messages(t, 3);
    std::vector<bool> correct{true, false, true};
    CausalRelation bhb = build_bhb(idx, correct);
    CHECK_FALSE(bhb.precedes(0, 1));
    CHECK(bhb.irreflexive());

    // With everyone correct the same trace does order them.
    CausalRelation hb = build_bhb(idx, std::vector<bool>(3, true));
    CHECK(hb.precedes(0, 1));
}

TEST_CASE("messages from one byzantine source are ordered by first correct delivery")
{
    Trace t;
    for (EnvelopeId i = 0; i < 2; ++i) {
        Envelope e;
        e.id = i;
        e.origin = 1;
        e.dest = 2;
        e.pair_seq = PairSeq{1, 2, i + 1};
        t.envelopes.push_back(e);
    }
    t.record(1, 1, EventKind::send, 0);
    t.record(2, 1, EventKind::send, 1);
    t.record(4, 2, EventKind::deliver, 1);   // the later send lands first
    t.record(6, 2, EventKind::deliver, 0);
    MessageIndex idx = index_messages(t, 3);
    CausalRelation bhb = build_bhb(idx, std::vector<bool>{true, false, true});
    CHECK(bhb.precedes(1, 0));
    CHECK_FALSE(bhb.precedes(0, 1));
}

TEST_CASE("safety checking flags inverted and missing predecessor deliveries")
{
    Trace t = chain_trace();
    // Add p2 as a destination of m0, delivered after m1.
    Envelope m0b;
    m0b.id = 2;
    m0b.origin = 0;
    m0b.dest = 2;
    m0b.pair_seq = PairSeq{0, 2, 1};
    m0b.match_key = PairSeq{0, 0, 9};
    t.envelopes.push_back(m0b);
    // Tie the two m0 envelopes into one message via a shared match key.
    t.envelopes[0].match_key = PairSeq{0, 0, 9};
    t.envelopes[0].group = GroupSet::of({1, 2});
    t.envelopes[2].group = GroupSet::of({1, 2});
    t.events.insert(t.events.begin() + 1, {1, 0, EventKind::send, EnvelopeId{2}, ""});

    SUBCASE("predecessor delivered late")
    {
        t.record(8, 2, EventKind::deliver, 2);
        MessageIndex idx = index_messages(t, 3);
        CausalRelation hb = build_hb(idx);
        auto v = check_safety(idx, hb, std::vector<bool>(3, true));
        REQUIRE(v.size() == 1);
        CHECK(v[0].at == 2);
        CHECK(v[0].early_time == 6);
        CHECK(v[0].late_time == SimTime{8});
    }
    SUBCASE("predecessor never delivered")
    {
        MessageIndex idx = index_messages(t, 3);
        CausalRelation hb = build_hb(idx);
        auto v = check_safety(idx, hb, std::vector<bool>(3, true));
        REQUIRE(v.size() == 1);
        CHECK_FALSE(v[0].late_time.has_value());
    }
    SUBCASE("faulty observer is exempt")
    {
        t.record(8, 2, EventKind::deliver, 2);
        MessageIndex idx = index_messages(t, 3);
        CausalRelation hb = build_hb(idx);
        auto v = check_safety(idx, hb, std::vector<bool>{true, true, false});
        CHECK(v.empty());
    }
}

TEST_CASE("liveness checking counts expected correct-pair deliveries")
{
    ScenarioConfig cfg;
    cfg.n = 3;
    cfg.workload.push_back({1, 0, 1, std::nullopt, "a"});
    cfg.workload.push_back({2, 0, 2, std::nullopt, "b"});
    Trace t;
    Envelope e;
    e.id = 0;
    e.origin = 0;
    e.dest = 1;
    e.pair_seq = PairSeq{0, 1, 1};
    t.envelopes.push_back(e);
    t.record(1, 0, EventKind::send, 0);
    t.record(2, 1, EventKind::deliver, 0);
    MessageIndex idx = index_messages(t, 3);
    auto misses = check_liveness(idx, cfg);
    REQUIRE(misses.size() == 1);
    CHECK(misses[0].sender == 0);
    CHECK(misses[0].dest == 2);
    CHECK(misses[0].expected == 1);
    CHECK(misses[0].got == 0);
}

TEST_CASE("planted delivery inversions are always detected")
{
    ScenarioConfig cfg;
    cfg.n = 4;
    cfg.protocol = Protocol::rst;
    cfg.delta = 5;
    cfg.horizon = 400;
    cfg.seed = 99;
    std::mt19937_64 rng(6);
    cfg.workload = random_workload(4, 40, 300, false, rng);
    RunResult res = run_scenario(cfg);
    REQUIRE(res.verdict.clean());

    MessageIndex idx = index_messages(res.trace, cfg.n);
    CausalRelation hb = build_hb(idx);
    auto planted = plan_delivery_inversion(res.trace, idx, hb, 3);
    REQUIRE(planted.has_value());
    Trace mutated = apply_inversion(res.trace, *planted);
    MessageIndex midx = index_messages(mutated, cfg.n);
    auto v = check_safety(midx, hb, std::vector<bool>(cfg.n, true));
    CHECK_FALSE(v.empty());
    bool found = false;
    for (const auto& viol : v)
        found = found || (viol.at == planted->at);
    CHECK(found);
}

TEST_CASE("a delivery moved ahead of its own send is still attributed and flagged")
{
    ScenarioConfig cfg;
    cfg.n = 3;
    cfg.protocol = Protocol::rst;
    cfg.delta = 3;
    cfg.horizon = 80;
    cfg.delay_model = DelayModel::fixed;
    cfg.delay_fixed = 1;
    cfg.workload.push_back({1, 0, 2, std::nullopt, "a"});
    cfg.workload.push_back({10, 0, 2, std::nullopt, "b"});
    RunResult res = run_scenario(cfg);
    REQUIRE(res.verdict.clean());

    MessageIndex idx = index_messages(res.trace, cfg.n);
    CausalRelation hb = build_hb(idx);

    // Drag b's delivery to the front of the trace, before b was even sent.
    std::size_t deliver_a = 0, deliver_b = 0;
    for (std::size_t i = 0; i < res.trace.events.size(); ++i) {
        const TraceEvent& ev = res.trace.events[i];
        if (ev.kind != EventKind::deliver || !ev.envelope) continue;
        const Envelope& env = res.trace.envelope(*ev.envelope);
        (env.payload == "a" ? deliver_a : deliver_b) = i;
    }
    REQUIRE(deliver_a < deliver_b);
    Trace mutated = res.trace;
    std::swap(mutated.events[deliver_a].envelope, mutated.events[deliver_b].envelope);
    std::rotate(mutated.events.begin(), mutated.events.begin() + deliver_a,
                mutated.events.begin() + deliver_a + 1);

    MessageIndex midx = index_messages(mutated, cfg.n);
    std::size_t b_id = midx.by_key.at({0, PairSeq{0, 2, 2}});
    REQUIRE(midx.messages[b_id].delivered_pos.count(2) == 1);
    CHECK(midx.messages[b_id].delivered_pos.at(2) == 0);

    auto v = check_safety(midx, hb, std::vector<bool>(cfg.n, true));
    REQUIRE(v.size() == 1);
    CHECK(v.front().early_msg == b_id);
    CHECK(v.front().at == 2);
}

TEST_CASE("queue-delay accounting separates the stated and alternate bounds")
{
    ScenarioConfig cfg;
    cfg.n = 3;
    cfg.protocol = Protocol::channel_sync;
    cfg.delta = 5;
    cfg.delta_s = 3;
    cfg.horizon = 60;
    cfg.delay_model = DelayModel::fixed;
    cfg.delay_fixed = 1;
    cfg.workload.push_back({1, 0, 1, std::nullopt, "m"});
    RunResult res = run_scenario(cfg);
    REQUIRE(res.verdict.cs_bound.has_value());
    const CsBoundReport& r = *res.verdict.cs_bound;
    CHECK(r.bound_stated == 10);   // max(3, 5 + max(3, 5))
    CHECK(r.bound_alt == 13);      // 2*5 + 3
    CHECK(r.checked == 1);
    CHECK(r.stated_held());
}
