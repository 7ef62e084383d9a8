// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Pass criterion numbers as arguments to run a subset.

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "deact/engine.hpp"
#include "deact/experiment.hpp"
#include "reference_model.hpp"

using namespace deact;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string pct(std::optional<double> v) { return v ? fmt::format("{:.2f}%", *v * 100) : "n/a"; }

// ---- 1: oracle equivalence ----------------------------------------------

constexpr int kOracleConfigs = 100;
constexpr std::uint64_t kOracleEvents = 100000;

SimConfig random_config(Rng& rng, int i)
{
    SimConfig c;
    c.scheme = kAllSchemes[i % 4];
    c.seed = rng.next();
    c.nodes = 1 + static_cast<unsigned>(rng.below(3));
    c.cores_per_node = 1 + static_cast<unsigned>(rng.below(2));
    c.max_outstanding = rng.below(2) ? 32 : 4;
    c.tlb_l1_entries = rng.below(2) ? 32 : 8;
    c.tlb_l2_entries = rng.below(2) ? 256 : 64;
    c.ptw_cache_entries = rng.below(2) ? 32 : 4;
    c.local_size = 32 * MiB;
    c.fam_view_size = 256 * MiB;
    c.fam_capacity = (rng.below(2) ? 512 : 1024) * MiB;
    c.shared_region_bytes = 16 * MiB;
    c.fabric_latency_ns = rng.below(2) ? 500 : 100;
    c.fabric_serialization_ns = rng.below(2) ? 0 : 5;
    const std::size_t entries[] = {64, 256, 1024};
    c.stu_entries = entries[rng.below(3)];
    c.stu_ways = rng.below(2) ? 8 : 4;
    const unsigned bits[] = {8, 16, 32};
    c.acm_bits = bits[rng.below(3)];
    c.stu_max_walks = rng.below(2) ? 8 : 1;
    c.translation_cache_bytes = rng.below(2) ? 64 * KiB : 4 * KiB;
    c.oml_capacity = rng.below(3) == 0 ? 2 : 128;
    const double fractions[] = {0.0, 0.2, 0.5};
    c.local_fraction = fractions[rng.below(3)];
    c.placement = rng.below(2) ? Placement::Random : Placement::FirstFit;
    c.tables_follow_split = rng.below(2) == 0;

    auto& w = c.workload;
    const GeneratorKind gens[] = {GeneratorKind::Uniform, GeneratorKind::Zipf, GeneratorKind::Stream,
                                  GeneratorKind::PointerChase};
    w.generator = gens[rng.below(4)];
    w.footprint = (1 + rng.below(8)) * MiB;
    w.rw_ratio = rng.unit() * 0.5;
    w.mpki_target = 5.0 + rng.unit() * 95.0;
    w.zipf_skew = 0.5 + rng.unit();
    w.seed = rng.next();
    w.length = ceil_div(kOracleEvents, c.total_cores());

    // Half the configs share the top quarter of the footprint between a
    // random subset of nodes; every other node faults into it too and is
    // refused.
    if (rng.below(2)) {
        SharedRegionSpec r;
        for (NodeId n = 0; n < c.nodes; ++n)
            if (rng.below(2))
                r.members.push_back(n);
        if (r.members.empty())
            r.members.push_back(0);
        const Perm perms[] = {Perm::R, Perm::RW, Perm::RWX};
        r.perm = perms[rng.below(3)];
        r.va_base = w.footprint / 4 * 3 / kPageSize * kPageSize;
        c.shared_regions.push_back(r);
    }
    return c;
}

Result oracle_equivalence()
{
    const auto t0 = Clock::now();
    Rng rng(2024);
    std::uint64_t events = 0;
    std::uint64_t mismatches = 0;
    std::array<std::uint64_t, 5> outcomes{};
    std::string first;
    for (int i = 0; i < kOracleConfigs; ++i) {
        const SimConfig c = random_config(rng, i);
        TraceSet traces = make_traces(c);
        for (auto& t : traces)
            for (auto& ev : t)
                if (rng.below(20) == 0)
                    ev.kind = AccessKind::Execute;

        Simulator sim(c, traces, EngineOptions{true, false});
        try {
            sim.run();
        } catch (const std::exception& e) {
            return {false, fmt::format("config {} ({}) threw: {}", i, to_string(c.scheme), e.what())};
        }
        const auto ref = testing::reference_run(c, traces, sim.allocation_log());
        for (std::size_t core = 0; core < traces.size(); ++core) {
            for (std::size_t k = 0; k < traces[core].size(); ++k) {
                const OpRecord& got = sim.records()[core][k];
                const testing::RefAccess& want = ref[core][k];
                ++events;
                ++outcomes[static_cast<std::size_t>(got.outcome)];
                const bool same = got.outcome == want.outcome && got.addr == want.addr &&
                                  (got.outcome != Outcome::Denied || got.reason == want.reason);
                if (!same && mismatches++ == 0)
                    first = fmt::format("config {} ({}) core {} event {}: sim ({}, {:#x}) ref ({}, {:#x})", i,
                                        to_string(c.scheme), core, k, static_cast<int>(got.outcome), got.addr,
                                        static_cast<int>(want.outcome), want.addr);
            }
        }
    }
    const double secs = seconds_since(t0);
    const bool pass = mismatches == 0 && secs < 120.0;
    std::string detail = fmt::format("{} configs, {} events, {} mismatches (local {}, allowed {}, denied {}), {:.1f}s",
                                     kOracleConfigs, events, mismatches, outcomes[1], outcomes[2], outcomes[3], secs);
    if (!first.empty())
        detail += "; first: " + first;
    return {pass, detail};
}

// ---- 2: security property -------------------------------------------------

Result security_property()
{
    const auto t0 = Clock::now();
    constexpr NodeId kAdversary = 2;
    constexpr int kRequests = 100000;
    std::vector<std::string> parts;
    bool pass = true;
    for (Scheme scheme : {Scheme::IFam, Scheme::DeactW, Scheme::DeactN}) {
        SimConfig c;
        c.scheme = scheme;
        c.nodes = 3;
        c.cores_per_node = 1;
        c.local_size = 2 * MiB;
        c.fam_view_size = 8 * MiB;
        c.fam_capacity = 1024 * kPageSize;
        c.shared_region_bytes = 256 * KiB;
        c.translation_cache_bytes = 64 * KiB;
        c.stu_entries = 64;
        c.workload.footprint = 1536 * KiB;
        c.workload.length = 5000;
        c.shared_regions.push_back(SharedRegionSpec{{0, kAdversary}, Perm::R, 512 * KiB});
        c.shared_regions.push_back(SharedRegionSpec{{0, 1}, Perm::RW, 1 * MiB});

        Simulator sim(c, make_traces(c));
        Broker& broker = sim.broker();
        Rng rng(mix_seed(77, static_cast<std::uint64_t>(scheme)));
        const AccessKind kinds[] = {AccessKind::Read, AccessKind::Write, AccessKind::Execute};
        for (int i = 0; i < kRequests; ++i) {
            RawRequest r;
            r.node = kAdversary;
            r.at = ns_to_ticks(50.0 * i);
            r.v = rng.below(2) == 1;
            r.kind = kinds[rng.below(3)];
            const std::uint64_t span = r.v ? c.fam_capacity : c.view().end();
            r.addr = rng.below(span + 64 * KiB) & ~(kBlockSize - 1);
            sim.inject_raw(r);
        }

        std::uint64_t forwarded = 0;
        std::uint64_t violations = 0;
        sim.set_fam_observer([&](NodeId node, FamAddr addr, RequestClass cls, MemOp, AccessKind kind) {
            if (node != kAdversary || cls != RequestClass::Demand)
                return;
            ++forwarded;
            bool ok = false;
            if (addr < broker.layout().mt_base) {
                const AcmDecoded acm = broker.acm_format().decode(broker.acm(addr.page()));
                if (const auto* o = std::get_if<AcmOwned>(&acm))
                    ok = o->node == kAdversary && permits(o->perm, kind);
                else if (const auto* s = std::get_if<AcmShared>(&acm))
                    ok = broker.bitmap_bit(addr.page(), kAdversary) && permits(s->perm, kind);
            }
            violations += ok ? 0 : 1;
        });
        const SimStats s = sim.run();
        const std::uint64_t denied = s[Counter::denied_not_owner] + s[Counter::denied_not_in_bitmap] +
                                     s[Counter::denied_insufficient_perm] + s[Counter::denied_unallocated];
        parts.push_back(fmt::format("{}: {} violations, {} forwarded, {} denied, {} dropped", to_string(scheme),
                                    violations, forwarded, denied, s[Counter::stu_dropped]));
        pass = pass && violations == 0 && forwarded > 0 && denied > 0;
    }
    return {pass, fmt::format("{}; {:.1f}s", fmt::join(parts, "; "), seconds_since(t0))};
}

// ---- 3: cold-access cost identities ---------------------------------------

Result cold_identities()
{
    using Key = std::pair<RequestClass, MemOp>;
    const Key walk{RequestClass::AtWalk, MemOp::Read};
    const Key acm_read{RequestClass::AtAcm, MemOp::Read};
    const Key acm_write{RequestClass::AtAcm, MemOp::Write};
    const Key demand{RequestClass::Demand, MemOp::Read};

    bool pass = true;
    std::vector<std::string> parts;
    for (Scheme scheme : kAllSchemes) {
        SimConfig c;
        c.scheme = scheme;
        c.nodes = 1;
        c.cores_per_node = 1;
        c.local_fraction = 0.0; // the data page lands in the FAM zone
        const std::vector<std::vector<TraceEvent>> traces{{TraceEvent{0, AccessKind::Read, VirtAddr{0x5000}, 0}}};
        Simulator sim(c, traces);
        std::map<Key, std::uint64_t> fam;
        sim.set_fam_observer([&](NodeId, FamAddr, RequestClass cls, MemOp op, AccessKind) { ++fam[{cls, op}]; });
        const SimStats s = sim.run();
        const auto at = [&](const Key& k) { return fam.count(k) ? fam.at(k) : 0; };
        std::uint64_t fam_total = 0;
        for (const auto& [k, v] : fam)
            fam_total += v;
        const std::uint64_t lr = s[Counter::local_reads];
        const std::uint64_t lw = s[Counter::local_writes];

        bool ok = false;
        switch (scheme) {
        case Scheme::EFam:
            ok = at(walk) >= 1 && at(walk) <= 4 && at(demand) == 1 && fam_total == at(walk) + 1 && lr + lw == 0;
            break;
        case Scheme::IFam:
            // 4 local walk, 4 FAM walk, 1 ACM, 1 demand; plus the allocation's ACM write.
            ok = lr == 4 && lw == 0 && at(walk) == 4 && at(acm_read) == 1 && at(demand) == 1 && at(acm_write) == 1 &&
                 fam_total == 7;
            break;
        case Scheme::DeactW:
        case Scheme::DeactN:
            // 4 local walk + 1 translator read + RMW (read, write); FAM as I-FAM.
            ok = lr == 6 && lw == 1 && at(walk) == 4 && at(acm_read) == 1 && at(demand) == 1 &&
                 at(acm_write) == 1 && fam_total == 7 && s[Counter::translator_lookups] == 1 &&
                 s[Counter::translator_updates] == 1;
            break;
        }
        parts.push_back(fmt::format("{}: local {}R/{}W, FAM walk {} acm {}R/{}W demand {}", to_string(scheme), lr, lw,
                                    at(walk), at(acm_read), at(acm_write), at(demand)));
        pass = pass && ok;
    }
    return {pass, fmt::format("{}", fmt::join(parts, "; "))};
}

// ---- 4: translation-cache hit rate ---------------------------------------

Result translation_hit_rate()
{
    const auto t0 = Clock::now();
    SimConfig c;
    c.scheme = Scheme::DeactN;
    c.nodes = 1;
    c.cores_per_node = 1;
    c.translation_cache_bytes = 64 * KiB;
    const std::uint64_t reach_pages = c.translation_cache_bytes / kBlockSize * kTranslationWays;
    c.workload.generator = GeneratorKind::Uniform;
    c.workload.footprint = reach_pages * 6 / 10 * kPageSize;
    c.workload.length = 80000;
    c.warmup_events = 40000;
    const SimStats s = run_once(c, make_traces(c));
    const auto hit = s.translation_hit_rate();
    const double secs = seconds_since(t0);
    return {hit && *hit > 0.90 && secs < 60.0,
            fmt::format("footprint {} pages vs reach {} pages, hit rate {} ({} lookups), {:.1f}s",
                        c.workload.footprint / kPageSize, reach_pages, pct(hit), s[Counter::translator_lookups],
                        secs)};
}

// ---- 5: AT-fraction ordering -----------------------------------------------

std::uint64_t deact_n_reach(const SimConfig& c) { return c.stu_entries * c.effective_pairs(); }

Result at_fraction_ordering()
{
    SimConfig c;
    c.nodes = 1;
    c.cores_per_node = 1;
    c.workload.generator = GeneratorKind::Zipf;
    c.workload.zipf_skew = 1.4;
    c.workload.footprint = 4 * deact_n_reach(c) * kPageSize;
    c.workload.length = 600000;
    c.warmup_events = 300000;
    const TraceSet traces = make_traces(c);
    std::map<Scheme, SimStats> runs;
    for (Scheme s : {Scheme::IFam, Scheme::DeactW, Scheme::DeactN}) {
        c.scheme = s;
        runs[s] = run_once(c, traces);
    }
    const double i = runs[Scheme::IFam].at_fraction().value_or(0);
    const double w = runs[Scheme::DeactW].at_fraction().value_or(0);
    const double n = runs[Scheme::DeactN].at_fraction().value_or(0);
    const auto tr_hit = runs[Scheme::DeactN].translation_hit_rate();
    const bool hit_condition = tr_hit && *tr_hit > 0.90;
    const bool pass = i > w && w > n && (!hit_condition || n < 0.05);
    return {pass, fmt::format("AT fraction I-FAM {:.2f}% > DeACT-W {:.2f}% > DeACT-N {:.2f}%; translation hit "
                              "rate {} so DeACT-N must be < 5%: {}",
                              i * 100, w * 100, n * 100, pct(tr_hit), hit_condition ? "yes" : "not required")};
}

// ---- 6: ACM organization ----------------------------------------------------

Result acm_organization()
{
    SimConfig c;
    c.nodes = 1;
    c.cores_per_node = 1;
    c.workload.generator = GeneratorKind::Uniform;
    c.workload.footprint = 12288 * kPageSize;
    c.workload.length = 200000;
    c.warmup_events = 100000;
    const TraceSet traces = make_traces(c);
    std::map<Scheme, double> hit;
    std::uint64_t fam_pages = 0;
    for (Scheme s : {Scheme::DeactW, Scheme::DeactN}) {
        c.scheme = s;
        Simulator sim(c, traces);
        hit[s] = sim.run().acm_hit_rate().value_or(0);
        fam_pages = sim.broker().counters().fam_pages;
    }
    const double gap = hit[Scheme::DeactN] - hit[Scheme::DeactW];
    return {fam_pages >= 8192 && gap >= 0.05,
            fmt::format("{} FAM pages; ACM hit rate DeACT-N {:.2f}% vs DeACT-W {:.2f}% ({:+.2f} points)", fam_pages,
                        hit[Scheme::DeactN] * 100, hit[Scheme::DeactW] * 100, gap * 100)};
}

// ---- 7: performance ordering -----------------------------------------------

SimConfig at_sensitive()
{
    SimConfig c;
    c.nodes = 1;
    c.cores_per_node = 4;
    c.fabric_latency_ns = 500;
    c.workload.generator = GeneratorKind::Zipf;
    c.workload.zipf_skew = 0.9;
    c.workload.footprint = 8 * deact_n_reach(c) * kPageSize;
    // All data in FAM, at a rate that keeps local DRAM from becoming the
    // bottleneck for page walks and translator reads.
    c.local_fraction = 0;
    c.workload.mpki_target = 20;
    // Long enough a warmup that cold faults no longer dominate.
    c.workload.length = 150000;
    c.warmup_events = 100000;
    return c;
}

Result performance_ordering()
{
    const auto rows = compare(at_sensitive());
    std::map<std::string, const ResultRow*> by;
    for (const auto& r : rows)
        by[r.stats.scheme] = &r;
    const double e = by["efam"]->stats.ns();
    const double i = by["ifam"]->stats.ns();
    const double w = by["deact-w"]->stats.ns();
    const double n = by["deact-n"]->stats.ns();
    const double speedup = i / n;
    return {e <= n && n <= w && w <= i && speedup >= 1.2,
            fmt::format("ns E-FAM {:.0f} <= DeACT-N {:.0f} <= DeACT-W {:.0f} <= I-FAM {:.0f}; DeACT-N speedup over "
                        "I-FAM {:.2f}x",
                        e, n, w, i, speedup)};
}

// ---- 8: sensitivity monotonicity ---------------------------------------------

Result sensitivity()
{
    struct Axis {
        std::string key;
        std::vector<std::string> values;
        bool increasing; // expected direction of the speedup
        double serialization_ns;
    };
    const std::vector<Axis> axes = {
        {"stu_entries", {"256", "1024", "4096"}, false, 0.0},
        {"fabric_latency_ns", {"100", "500", "6000"}, true, 0.0},
        {"nodes", {"1", "4", "8"}, true, 2.0},
    };
    bool pass = true;
    std::vector<std::string> parts;
    for (const auto& axis : axes) {
        SimConfig c = at_sensitive();
        c.scheme = Scheme::DeactN;
        c.fabric_serialization_ns = axis.serialization_ns;
        const auto rows = sweep(c, axis.key, axis.values);
        std::vector<double> s;
        for (const auto& r : rows)
            s.push_back(r.speedup_vs_ifam.value_or(0));
        bool mono = true;
        for (std::size_t k = 1; k < s.size(); ++k)
            mono = mono && (axis.increasing ? s[k] >= s[k - 1] : s[k] <= s[k - 1]);
        std::vector<std::string> pts;
        for (std::size_t k = 0; k < s.size(); ++k)
            pts.push_back(fmt::format("{}:{:.3f}x", axis.values[k], s[k]));
        parts.push_back(fmt::format("{} ({}) {}", axis.key, axis.increasing ? "non-decreasing" : "non-increasing",
                                    fmt::join(pts, " ")));
        pass = pass && mono;
    }
    return {pass, fmt::format("{}", fmt::join(parts, "; "))};
}

// ---- 9: determinism ------------------------------------------------------------

Result determinism()
{
    SimConfig c = at_sensitive();
    c.nodes = 2;
    c.workload.length = 5000;
    c.fabric_serialization_ns = 2;
    c.shared_regions.push_back(SharedRegionSpec{{0}, Perm::R, 0});
    const auto csv = [&] {
        std::ostringstream out;
        write_csv(out, compare(c));
        c.scheme = Scheme::DeactW;
        write_csv(out, sweep(c, "stu_entries", {"256", "1024"}));
        c.scheme = Scheme::DeactN;
        return out.str();
    };
    const std::string a = csv();
    const std::string b = csv();
    return {a == b && !a.empty(), fmt::format("{} bytes of CSV, {}", a.size(), a == b ? "identical" : "differ")};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
        {"oracle equivalence", oracle_equivalence},
        {"security property", security_property},
        {"cold-access identities", cold_identities},
        {"translation-cache hit rate", translation_hit_rate},
        {"AT-fraction ordering", at_fraction_ordering},
        {"ACM organization", acm_organization},
        {"performance ordering", performance_ordering},
        {"sensitivity monotonicity", sensitivity},
        {"determinism", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i)
        only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k + 1);
        if (!only.empty() && !only.count(id))
            continue;
        Result r;
        try {
            r = criteria[k].second();
        } catch (const std::exception& e) {
            r = {false, fmt::format("threw: {}", e.what())};
        }
        failures += r.pass ? 0 : 1;
        fmt::print("{} {}. {}: {}\n", r.pass ? "PASS" : "FAIL", id, criteria[k].first, r.detail);
        std::fflush(stdout);
    }
    return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
