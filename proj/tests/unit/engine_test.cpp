#include <gtest/gtest.h>

#include "deact/engine.hpp"
#include "deact/experiment.hpp"

using namespace deact;

namespace {

// Cycles between events; long enough for each op to drain first.
constexpr std::uint64_t kGap = 40000;

SimConfig tiny(Scheme scheme)
{
    SimConfig c;
    c.scheme = scheme;
    c.nodes = 1;
    c.cores_per_node = 1;
    c.local_size = 64 * MiB;
    c.fam_view_size = 256 * MiB;
    c.fam_capacity = 1 * GiB;
    c.shared_region_bytes = 64 * MiB;
    c.translation_cache_bytes = 64 * KiB;
    return c;
}

std::vector<TraceEvent> trace(std::initializer_list<std::pair<AccessKind, std::uint64_t>> events,
                              std::uint64_t gap = 0)
{
    std::vector<TraceEvent> out;
    std::uint64_t seq = 0;
    for (auto [kind, addr] : events)
        out.push_back(TraceEvent{seq++, kind, VirtAddr{addr}, gap});
    return out;
}

double latency_ns(const OpRecord& r) { return ticks_to_ns(r.completed - r.issued); }

// Cold access cost shared by every scheme: both TLB levels miss, then the fault.
double cold_front(const SimConfig& c)
{
    return (c.tlb_l1_cycles + c.tlb_l2_cycles) * c.cycle_ns() + c.minor_fault_ns;
}

double fam_round_trip(const SimConfig& c) { return 2 * c.fabric_latency_ns + c.fam_read_ns; }

} // namespace

TEST(Engine, EmptyRunIsAllZeros)
{
    Simulator sim(tiny(Scheme::DeactN), {});
    const SimStats s = sim.run();
    EXPECT_EQ(s.total_ticks, 0u);
    EXPECT_EQ(s.measured_ticks, 0u);
    EXPECT_EQ(s.total, Counters{});
}

TEST(Engine, RejectsMoreTracesThanCores)
{
    EXPECT_THROW(Simulator(tiny(Scheme::DeactN), {{}, {}}), ConfigError);
    SimConfig bad = tiny(Scheme::DeactN);
    bad.acm_bits = 12;
    EXPECT_THROW(Simulator(bad, {}), ConfigError);
}

TEST(Engine, RunTwiceIsAnError)
{
    Simulator sim(tiny(Scheme::DeactN), {});
    sim.run();
    EXPECT_THROW(sim.run(), std::logic_error);
}

TEST(Engine, LocalAccessLatencies)
{
    SimConfig c = tiny(Scheme::DeactN);
    c.local_fraction = 1.0;
    Simulator sim(c, {trace({{AccessKind::Read, 0x1000}, {AccessKind::Read, 0x1040}}, kGap)}, EngineOptions{true, true});
    sim.run();
    const auto& r = sim.records()[0];
    EXPECT_EQ(r[0].outcome, Outcome::Local);
    // Four local table reads, then the demand read.
    EXPECT_DOUBLE_EQ(latency_ns(r[0]), cold_front(c) + 5 * c.local_read_ns);
    // L1 TLB hit.
    EXPECT_DOUBLE_EQ(latency_ns(r[1]), c.tlb_l1_cycles * c.cycle_ns() + c.local_read_ns);
}

TEST(Engine, EfamColdReadWalksFamTables)
{
    SimConfig c = tiny(Scheme::EFam);
    c.local_fraction = 0.0;
    Simulator sim(c, {trace({{AccessKind::Read, 0x5000}})}, EngineOptions{true, true});
    const SimStats s = sim.run();
    const auto& r = sim.records()[0][0];
    EXPECT_EQ(r.outcome, Outcome::Allowed);
    EXPECT_DOUBLE_EQ(latency_ns(r), cold_front(c) + 5 * fam_round_trip(c));
    EXPECT_EQ(s[Counter::fam_at_walk], 4u);
    EXPECT_EQ(s[Counter::fam_demand], 1u);
    EXPECT_EQ(s[Counter::fam_at_acm], 0u);
}

TEST(Engine, DeactColdFamZoneRead)
{
    SimConfig c = tiny(Scheme::DeactN);
    c.local_fraction = 0.0;
    Simulator sim(c, {trace({{AccessKind::Read, 0x5000}})}, EngineOptions{true, true});
    const SimStats s = sim.run();
    const auto& r = sim.records()[0][0];
    EXPECT_EQ(r.outcome, Outcome::Allowed);
    const double expect = cold_front(c) + 4 * c.local_read_ns // node walk
                          + c.local_read_ns + c.translator_compare_cycles * c.cycle_ns() // translator probe
                          + c.stu_hop_ns + c.stu_lookup_ns                                 // to the STU
                          + 4 * fam_round_trip(c)                                          // FAM walk
                          + fam_round_trip(c)                                              // ACM
                          + fam_round_trip(c);                                             // demand
    EXPECT_DOUBLE_EQ(latency_ns(r), expect);
    EXPECT_EQ(s[Counter::translator_misses], 1u);
    EXPECT_EQ(s[Counter::stu_walk_reads], 4u);
    EXPECT_EQ(s[Counter::stu_acm_reads], 1u);
    EXPECT_EQ(s[Counter::translator_updates], 1u);
}

TEST(Engine, IfamColdFamZoneRead)
{
    SimConfig c = tiny(Scheme::IFam);
    c.local_fraction = 0.0;
    Simulator sim(c, {trace({{AccessKind::Read, 0x5000}})}, EngineOptions{true, true});
    sim.run();
    const auto& r = sim.records()[0][0];
    EXPECT_EQ(r.outcome, Outcome::Allowed);
    EXPECT_DOUBLE_EQ(latency_ns(r), cold_front(c) + 4 * c.local_read_ns + c.stu_hop_ns + c.stu_lookup_ns +
                                        6 * fam_round_trip(c));
}

TEST(Engine, WarmDeactReadHitsEverything)
{
    SimConfig c = tiny(Scheme::DeactN);
    c.local_fraction = 0.0;
    Simulator sim(c, {trace({{AccessKind::Read, 0x5000}, {AccessKind::Read, 0x5040}}, kGap)}, EngineOptions{true, true});
    sim.run();
    const auto& r = sim.records()[0][1];
    EXPECT_DOUBLE_EQ(latency_ns(r), c.tlb_l1_cycles * c.cycle_ns() + c.local_read_ns +
                                        c.translator_compare_cycles * c.cycle_ns() + c.stu_hop_ns +
                                        c.stu_lookup_ns + fam_round_trip(c));
}

TEST(Engine, PostedWritesRetireAtIssue)
{
    SimConfig c = tiny(Scheme::EFam);
    c.local_fraction = 0.0;
    Simulator sim(c, {trace({{AccessKind::Read, 0x5000}, {AccessKind::Write, 0x5040}}, kGap)}, EngineOptions{true, true});
    const SimStats s = sim.run();
    const auto& r = sim.records()[0][1];
    EXPECT_DOUBLE_EQ(latency_ns(r), c.tlb_l1_cycles * c.cycle_ns());
    EXPECT_EQ(s[Counter::fam_writes], 1u);
}

TEST(Engine, DeterministicAcrossRuns)
{
    for (Scheme scheme : kAllSchemes) {
        SimConfig c = tiny(scheme);
        c.nodes = 2;
        c.cores_per_node = 2;
        c.workload.length = 3000;
        c.workload.footprint = 8 * MiB;
        const TraceSet t = make_traces(c);
        const SimStats a = run_once(c, t);
        const SimStats b = run_once(c, t);
        EXPECT_EQ(a.total, b.total) << to_string(scheme);
        EXPECT_EQ(a.total_ticks, b.total_ticks);
        EXPECT_GT(a[Counter::events], 0u);
    }
}

TEST(Engine, AuditHoldsUnderLoad)
{
    for (Scheme scheme : kAllSchemes) {
        SimConfig c = tiny(scheme);
        c.nodes = 2;
        c.cores_per_node = 4;
        c.workload.length = 2000;
        c.workload.footprint = 16 * MiB;
        c.workload.mpki_target = 200;
        c.oml_capacity = 4;
        c.fabric_serialization_ns = 2;
        Simulator sim(c, make_traces(c), EngineOptions{true, true});
        const SimStats s = sim.run(); // throws if latency segments do not add up
        EXPECT_EQ(s[Counter::fam_admitted], s[Counter::fam_completed]);
        EXPECT_EQ(s[Counter::local_admitted], s[Counter::local_completed]);
        for (std::size_t p = 0; p < c.nodes; ++p)
            for (const auto& bank : sim.fam_pool(p).audit())
                for (std::size_t i = 1; i < bank.size(); ++i)
                    ASSERT_LE(bank[i - 1].second, bank[i].first);
        for (const auto& core : sim.records())
            for (const auto& r : core)
                ASSERT_NE(r.outcome, Outcome::Pending);
    }
}

TEST(Engine, WarmupExcludesEarlyEvents)
{
    SimConfig c = tiny(Scheme::DeactN);
    c.workload.length = 4000;
    c.warmup_events = 1000;
    const SimStats s = run_once(c, make_traces(c));
    EXPECT_EQ(s[Counter::events], 3000u);
    EXPECT_LT(s.measured_ticks, s.total_ticks);
}

TEST(Engine, RawRequestsAreChecked)
{
    SimConfig c = tiny(Scheme::DeactN);
    c.nodes = 2;
    c.shared_regions.push_back(SharedRegionSpec{{0}, Perm::R, 0x100000000});
    Simulator sim(c, {});
    const SharedRegion region = sim.broker().shared_regions().at(0);
    const FamAddr page = region.page(3).base();
    sim.inject_raw(RawRequest{1, 0, page.value, true, AccessKind::Read});
    sim.inject_raw(RawRequest{0, 0, page.value, true, AccessKind::Write});
    sim.inject_raw(RawRequest{0, 0, page.value, true, AccessKind::Read});
    sim.inject_raw(RawRequest{0, 0, sim.broker().layout().mt_base.value, true, AccessKind::Read});
    int demands = 0;
    sim.set_fam_observer([&](NodeId, FamAddr, RequestClass cls, MemOp, AccessKind) { demands += cls == RequestClass::Demand; });
    const SimStats s = sim.run();
    EXPECT_EQ(s[Counter::denied_not_in_bitmap], 1u);
    EXPECT_EQ(s[Counter::denied_insufficient_perm], 1u);
    EXPECT_EQ(s[Counter::denied_unallocated], 1u);
    EXPECT_EQ(s[Counter::allowed], 1u);
    EXPECT_EQ(demands, 1);
}

TEST(Engine, RawNodeAddressesAreWalkedOrDropped)
{
    SimConfig c = tiny(Scheme::IFam);
    Simulator sim(c, {});
    sim.inject_raw(RawRequest{0, 0, c.local_size + 0x3000, false, AccessKind::Read});
    sim.inject_raw(RawRequest{0, 0, 0x2000, false, AccessKind::Read});
    const SimStats s = sim.run();
    EXPECT_EQ(s[Counter::stu_on_demand], 1u);
    EXPECT_EQ(s[Counter::allowed], 1u);
    EXPECT_EQ(s[Counter::stu_dropped], 1u);
}

TEST(Engine, EfamRejectsRawRequests)
{
    Simulator sim(tiny(Scheme::EFam), {});
    sim.inject_raw(RawRequest{0, 0, 0x1000, true, AccessKind::Read});
    EXPECT_THROW(sim.run(), std::logic_error);
}

TEST(Engine, AllocationLogStartsWithRoot)
{
    SimConfig c = tiny(Scheme::DeactN);
    Simulator sim(c, {trace({{AccessKind::Read, 0x1000}, {AccessKind::Read, 0x2000}, {AccessKind::Read, 0x1000}})});
    sim.run();
    const auto& log = sim.allocation_log();
    ASSERT_EQ(log.size(), 3u);
    EXPECT_EQ(log[0].kind, AllocationRecord::Kind::Root);
    EXPECT_EQ(log[1].kind, AllocationRecord::Kind::Fault);
    EXPECT_EQ(log[1].page, 1u);
    EXPECT_EQ(log[2].page, 2u);
}

TEST(Engine, StaleAcmAfterReleaseIsUnallocated)
{
    BrokerConfig bc;
    bc.nodes = 2;
    bc.view = NodeView{64 * MiB, 256 * MiB};
    bc.fam_capacity = 1 * GiB;
    bc.shared_region_bytes = 64 * MiB;
    Broker b(bc);
    Stu stu(StuConfig{}, 1);
    b.set_acm_listener([&](FamPage first, std::uint64_t count) { stu.invalidate(first, count); });
    Allocation a = b.allocate_page(1);
    while (!a.fam_page)
        a = b.allocate_page(1);
    EXPECT_TRUE(stu.verify(a.fam_page->base(), AccessKind::Read, b).verdict.allow);
    b.release_page(1, NodePage{a.loc.page});
    EXPECT_EQ(stu.verify(a.fam_page->base(), AccessKind::Read, b).verdict, Verdict::denied(DenyReason::Unallocated));
}
