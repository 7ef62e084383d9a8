#include "deact/engine.hpp"

#include <algorithm>
#include <deque>
#include <queue>

#include <fmt/format.h>

#include "deact/layout.hpp"

namespace deact {

std::string_view to_string(Segment s)
{
    switch (s) {
    case Segment::Tlb: return "tlb";
    case Segment::Fault: return "fault";
    case Segment::LocalDram: return "local_dram";
    case Segment::Translator: return "translator";
    case Segment::FabricOut: return "fabric_out";
    case Segment::Stu: return "stu";
    case Segment::FamBank: return "fam_bank";
    case Segment::FabricBack: return "fabric_back";
    case Segment::Queue: return "queue";
    case Segment::kCount: break;
    }
    return "?";
}

BrokerConfig broker_config(const SimConfig& c)
{
    BrokerConfig b;
    b.nodes = c.nodes;
    b.view = c.view();
    b.local_reserved = is_deact(c.scheme) ? c.translation_cache_bytes : 0;
    b.fam_capacity = c.fam_capacity;
    b.shared_region_bytes = c.shared_region_bytes;
    b.acm_bits = c.acm_bits;
    b.local_fraction = c.local_fraction;
    b.placement = c.placement;
    b.direct_fam = c.scheme == Scheme::EFam;
    b.tables_follow_split = c.tables_follow_split;
    b.maintain_acm = c.scheme != Scheme::EFam;
    b.seed = mix_seed(c.seed, 0xa110c);
    return b;
}

std::vector<SharedWindow> make_shared_windows(Broker& broker, const SimConfig& c)
{
    std::vector<SharedWindow> windows;
    for (const auto& spec : c.shared_regions)
        windows.push_back(SharedWindow{VirtAddr{spec.va_base}, broker.create_shared_region(spec.members, spec.perm)});
    return windows;
}

namespace {

enum Stage : std::uint16_t {
    CoreWake,
    OpStart,
    OpTlbMiss,
    OpWalkBegin,
    OpWalkStepDone,
    OpAccessStage,
    OpComplete,
    LocalDone,
    FamArrive,
    FamDone,
    TrProbe,
    TrProbeDone,
    TrCompare,
    TrMappingArrive,
    PendingResume,
    RmwReadDone,
    RmwWriteDone,
    StuArrive,
    IfamLookup,
    StuAcmDone,
    StuAcmReady,
    StuBitmapDone,
    WalkStepDone,
    WalkAcmDone,
    WaiterResume,
    ZoneResponse,
    ZoneFault,
    RawStart,
    FlowEnd,
};

enum class FlowKind : std::uint8_t { Op, Walk, Rmw, AcmWrite, Raw };

enum class OmlState : std::uint8_t { None, TrReserved, TrBound, StuReserved, StuBound };

struct Event {
    Tick time;
    std::uint64_t seq;
    std::uint32_t flow;
    std::uint16_t stage;
    std::uint8_t seg;

    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct Flow {
    FlowKind kind = FlowKind::Op;
    OmlState oml = OmlState::None;
    bool v = false;
    bool posted = false;
    AccessKind demand = AccessKind::Read;
    /// Kind of the request in progress (a table read during a walk).
    AccessKind akind = AccessKind::Read;
    MemOp op = MemOp::Read;
    RequestClass cls = RequestClass::Demand;
    Perm shared_perm = Perm::None;
    std::int8_t step = 0;
    NodeId node = 0;
    std::uint32_t core = 0;
    std::uint64_t index = 0;
    std::uint64_t vpage = 0;
    std::uint64_t offset = 0;
    /// Request address: FAM byte address when v, node physical otherwise.
    std::uint64_t addr = 0;
    std::uint64_t node_addr = 0;
    /// Physical access in progress (may differ from the request, e.g. an ACM block).
    std::uint64_t mem_addr = 0;
    MemOp mem_op = MemOp::Read;
    RequestClass mem_cls = RequestClass::Demand;
    Stage resume = FlowEnd;
    Stage zone_done = FlowEnd;
    PageLoc target;
    std::uint64_t page = 0;
    std::uint64_t fam_page = 0;
    std::array<std::uint64_t, kTableLevels> walk_addrs{};
    std::array<PageSpace, kTableLevels> walk_spaces{};
    Tick start = 0;
    Tick last = 0;
    SegmentTimes seg{};
};

struct Core {
    const std::vector<TraceEvent>* trace = nullptr;
    std::size_t next = 0;
    Tick last_issue = 0;
    std::uint32_t in_flight = 0;
    bool wake_pending = false;
    bool past_warmup = false;
    NodeId node = 0;
    std::unique_ptr<Frontend> frontend;
};

struct NodeUnits {
    std::unique_ptr<BankedMemory> local;
    std::unique_ptr<Stu> stu;
    std::unique_ptr<FamTranslator> translator;
    std::deque<std::uint32_t> tr_stalled;
    std::deque<std::uint32_t> stu_stalled;
    Counters counters;
};

constexpr std::uint32_t kCoreFlag = 0x80000000u;

} // namespace

struct Simulator::Impl {
    SimConfig cfg;
    EngineOptions options;
    std::vector<std::vector<TraceEvent>> traces;
    Broker broker;
    std::vector<SharedWindow> windows;
    FrontendConfig fe_cfg;
    std::vector<Core> cores;
    std::vector<NodeUnits> nodes;
    std::vector<std::unique_ptr<BankedMemory>> pools;
    // All nodes share one request and one response link per pool.
    std::vector<FabricLink> req_links;
    std::vector<FabricLink> resp_links;

    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
    std::uint64_t seq = 0;
    std::deque<Flow> flows; // deque: references survive new flows
    std::vector<std::uint32_t> free_flows;

    std::vector<std::vector<OpRecord>> records;
    std::vector<std::vector<SegmentTimes>> op_segments;
    std::vector<AllocationRecord> alloc_log;
    std::vector<RawRequest> raws;
    FamObserver observer;

    Tick cycle;
    Tick hop;
    Tick stu_delay;
    Tick tlb_l1;
    Tick tlb_l2;
    Tick fault_cost;
    Tick compare;

    std::size_t cores_past_warmup = 0;
    bool snapped = false;
    Counters snapshot;
    std::vector<Counters> snapshot_nodes;
    Tick snapshot_time = 0;
    Tick last_retire = 0;
    bool ran = false;

    Impl(const SimConfig& c, std::vector<std::vector<TraceEvent>> t, EngineOptions o)
        : cfg(c),
          options(o),
          traces(std::move(t)),
          broker(broker_config(c))
    {
        cycle = ns_to_ticks(cfg.cycle_ns());
        hop = ns_to_ticks(cfg.stu_hop_ns);
        stu_delay = ns_to_ticks(cfg.stu_hop_ns + cfg.stu_lookup_ns);
        tlb_l1 = cycle * cfg.tlb_l1_cycles;
        tlb_l2 = cycle * cfg.tlb_l2_cycles;
        fault_cost = ns_to_ticks(cfg.minor_fault_ns);
        compare = cycle * cfg.translator_compare_cycles;

        fe_cfg = FrontendConfig{cfg.tlb_l1_entries, cfg.tlb_l2_entries, cfg.tlb_l2_ways, cfg.ptw_cache_entries};

        broker.set_acm_listener([this](FamPage first, std::uint64_t count) {
            for (auto& n : nodes)
                n.stu->invalidate(first, count);
        });
        windows = make_shared_windows(broker, cfg);

        const MemoryTiming local_timing{cfg.local_banks, cfg.local_read_ns, cfg.local_write_ns,
                                        cfg.local_max_outstanding};
        const MemoryTiming fam_timing{cfg.fam_banks, cfg.fam_read_ns, cfg.fam_write_ns, cfg.fam_max_outstanding};
        StuConfig stu_cfg;
        stu_cfg.mode = cfg.scheme == Scheme::IFam     ? StuMode::Indirect
                       : cfg.scheme == Scheme::DeactW ? StuMode::DeactWide
                                                      : StuMode::DeactNarrow;
        stu_cfg.entries = cfg.stu_entries;
        stu_cfg.ways = cfg.stu_ways;
        stu_cfg.acm_bits = cfg.acm_bits;
        stu_cfg.pairs_per_way = cfg.effective_pairs();
        stu_cfg.max_walks = cfg.stu_max_walks;
        stu_cfg.oml_capacity = cfg.oml_capacity;

        nodes.resize(cfg.nodes);
        for (NodeId n = 0; n < cfg.nodes; ++n) {
            auto& u = nodes[n];
            u.local = std::make_unique<BankedMemory>(local_timing);
            u.stu = std::make_unique<Stu>(stu_cfg, n);
            if (is_deact(cfg.scheme))
                u.translator = std::make_unique<FamTranslator>(cfg.local_size - cfg.translation_cache_bytes,
                                                               cfg.translation_cache_bytes,
                                                               mix_seed(cfg.seed, 0x7a00 + n), cfg.oml_capacity);
            if (options.audit)
                u.local->enable_audit();
        }
        for (unsigned p = 0; p < cfg.nodes; ++p) {
            pools.push_back(std::make_unique<BankedMemory>(fam_timing));
            req_links.emplace_back(cfg.fabric_latency_ns, cfg.fabric_serialization_ns);
            resp_links.emplace_back(cfg.fabric_latency_ns, cfg.fabric_serialization_ns);
            if (options.audit)
                pools.back()->enable_audit();
        }

        cores.resize(cfg.total_cores());
        records.resize(cores.size());
        op_segments.resize(cores.size());
        for (std::size_t c = 0; c < cores.size(); ++c) {
            cores[c].node = static_cast<NodeId>(c / cfg.cores_per_node);
            cores[c].trace = c < traces.size() ? &traces[c] : nullptr;
            if (options.record_ops && cores[c].trace)
                records[c].resize(cores[c].trace->size());
            if (options.audit && cores[c].trace)
                op_segments[c].resize(cores[c].trace->size());
        }
    }

    // ---- plumbing -------------------------------------------------------

    std::uint32_t new_flow(FlowKind kind, NodeId node, Tick now)
    {
        std::uint32_t id;
        if (!free_flows.empty()) {
            id = free_flows.back();
            free_flows.pop_back();
            flows[id] = Flow{};
        } else {
            id = static_cast<std::uint32_t>(flows.size());
            flows.emplace_back();
        }
        Flow& f = flows[id];
        f.kind = kind;
        f.node = node;
        f.start = now;
        f.last = now;
        return id;
    }

    void end_flow(std::uint32_t id) { free_flows.push_back(id); }

    void schedule(std::uint32_t flow, Tick at, Stage stage, Segment seg)
    {
        queue.push(Event{at, seq++, flow, stage, static_cast<std::uint8_t>(seg)});
    }

    Counters& nc(NodeId n) { return nodes[n].counters; }

    OpRecord* record(const Flow& f)
    {
        if (f.kind != FlowKind::Op || !options.record_ops)
            return nullptr;
        return &records[f.core][f.index];
    }

    void set_outcome(const Flow& f, Outcome o, std::uint64_t addr, DenyReason reason = DenyReason::Unallocated)
    {
        if (OpRecord* r = record(f)) {
            r->outcome = o;
            r->addr = addr;
            r->reason = reason;
        }
    }

    // ---- cores ----------------------------------------------------------

    void try_issue(std::uint32_t c, Tick now)
    {
        Core& core = cores[c];
        if (!core.trace)
            return;
        while (core.next < core.trace->size() && core.in_flight < cfg.max_outstanding) {
            const TraceEvent& ev = (*core.trace)[core.next];
            const Tick ready = core.last_issue + ev.gap_cycles * cycle;
            if (ready > now) {
                if (!core.wake_pending) {
                    core.wake_pending = true;
                    queue.push(Event{ready, seq++, c | kCoreFlag, CoreWake, 0});
                }
                return;
            }
            core.last_issue = now;
            issue(c, core.next++, now);
            note_warmup(c, now);
        }
    }

    void note_warmup(std::uint32_t c, Tick now)
    {
        Core& core = cores[c];
        if (core.past_warmup)
            return;
        if (core.next >= cfg.warmup_events || core.next >= core.trace->size()) {
            core.past_warmup = true;
            if (++cores_past_warmup == cores.size())
                take_snapshot(now);
        }
    }

    void take_snapshot(Tick now)
    {
        if (snapped)
            return;
        snapped = true;
        snapshot = collect_total();
        snapshot_nodes.clear();
        for (NodeId n = 0; n < nodes.size(); ++n)
            snapshot_nodes.push_back(collect_node(n));
        snapshot_time = now;
    }

    void issue(std::uint32_t c, std::size_t index, Tick now)
    {
        Core& core = cores[c];
        if (!core.frontend) {
            core.frontend = std::make_unique<Frontend>(core.node, broker, fe_cfg, windows);
            alloc_log.push_back(AllocationRecord{AllocationRecord::Kind::Root, core.node, c, 0});
        }
        const TraceEvent& ev = (*core.trace)[index];
        const std::uint32_t id = new_flow(FlowKind::Op, core.node, now);
        Flow& f = flows[id];
        f.core = c;
        f.index = index;
        f.demand = ev.kind;
        f.vpage = ev.vaddr.page().value;
        f.offset = ev.vaddr.offset();
        ++core.in_flight;

        Counters& n = nc(core.node);
        ++n[Counter::events];
        ++n[ev.kind == AccessKind::Read ? Counter::reads : ev.kind == AccessKind::Write ? Counter::writes : Counter::executes];
        if (OpRecord* r = record(f))
            r->issued = now;

        if (auto hit = core.frontend->tlb_translate(VirtPage{f.vpage})) {
            f.target = hit->loc;
            schedule(id, now + tlb_l1 + (hit->level == TlbLevel::L2 ? tlb_l2 : 0), OpAccessStage, Segment::Tlb);
        } else {
            schedule(id, now + tlb_l1 + tlb_l2, OpTlbMiss, Segment::Tlb);
        }
    }

    void retire(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        Core& core = cores[f.core];
        --core.in_flight;
        last_retire = std::max(last_retire, now);
        if (OpRecord* r = record(f))
            r->completed = now;
        if (options.audit) {
            Tick sum = 0;
            for (Tick t : f.seg)
                sum += t;
            if (sum != now - f.start)
                throw ProtocolViolation(fmt::format("latency segments of core {} event {} do not add up", f.core, f.index));
            op_segments[f.core][f.index] = f.seg;
        }
        try_issue(f.core, now);
    }

    void complete_op(std::uint32_t id, Tick now)
    {
        retire(id, now);
        end_flow(id);
    }

    // ---- memory primitives ---------------------------------------------

    void local_access(std::uint32_t id, Tick now, std::uint64_t addr, MemOp op, RequestClass cls, Stage resume)
    {
        Flow& f = flows[id];
        f.mem_addr = addr;
        f.mem_op = op;
        f.resume = resume;
        const Tick done = nodes[f.node].local->service(now, addr, op, cls);
        schedule(id, done, LocalDone, Segment::LocalDram);
    }

    /// Request over the fabric to a FAM pool; reads come back on the response link.
    void fam_access(std::uint32_t id, Tick now, std::uint64_t addr, MemOp op, RequestClass cls, Stage resume)
    {
        Flow& f = flows[id];
        f.mem_addr = addr;
        f.mem_op = op;
        f.mem_cls = cls;
        f.resume = resume;
        schedule(id, req_links[pool_index(addr)].transit(now), FamArrive, Segment::FabricOut);
    }

    std::size_t pool_index(std::uint64_t addr) const { return (addr >> kPageShift) % pools.size(); }
    BankedMemory& pool_of(std::uint64_t addr) { return *pools[pool_index(addr)]; }

    void spawn_acm_write(NodeId node, FamPage page, Tick now)
    {
        const std::uint32_t id = new_flow(FlowKind::AcmWrite, node, now);
        const FamAddr block = acm_block_address(broker.layout().mt_base, page.base(),
                                                broker.acm_format().entries_per_block());
        fam_access(id, now, block.value, MemOp::Write, RequestClass::AtAcm, FlowEnd);
    }

    void route(std::uint32_t id, Tick now, PageSpace space, std::uint64_t addr, MemOp op, RequestClass cls,
               Stage done)
    {
        if (space == PageSpace::Fam) {
            fam_access(id, now, addr, op, cls, done);
            return;
        }
        const auto parts = decompose_node_address(NodePhysAddr{addr}, cfg.view());
        if (!parts)
            throw ProtocolViolation(fmt::format("node address {:#x} outside the node view", addr));
        if (parts->zone == Zone::Local)
            local_access(id, now, addr, op, cls, done);
        else
            famzone_access(id, now, addr, op, cls, done);
    }

    void famzone_access(std::uint32_t id, Tick now, std::uint64_t node_addr, MemOp op, RequestClass cls, Stage done)
    {
        Flow& f = flows[id];
        f.addr = node_addr;
        f.node_addr = node_addr;
        f.v = false;
        f.op = op;
        f.cls = cls;
        f.zone_done = done;
        if (cfg.scheme == Scheme::EFam)
            throw ProtocolViolation("FAM-zone node address under E-FAM");
        if (is_deact(cfg.scheme))
            tr_submit(id, now);
        else
            schedule(id, now + stu_delay, StuArrive, Segment::Stu);
    }

    bool expects_response(const Flow& f) const { return f.kind == FlowKind::Op && f.op == MemOp::Read; }

    // ---- op path --------------------------------------------------------

    void op_tlb_miss(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        Core& core = cores[f.core];
        if (core.frontend->mapped(VirtPage{f.vpage})) {
            op_walk_begin(id, now);
            return;
        }
        const FaultInfo info = core.frontend->fault(VirtPage{f.vpage});
        alloc_log.push_back(AllocationRecord{AllocationRecord::Kind::Fault, f.node, f.core, f.vpage});
        const NodeId node = f.node;
        auto charge = [&](const Allocation& a) {
            if (a.acm_written)
                spawn_acm_write(node, *a.fam_page, now);
        };
        if (info.data)
            charge(*info.data);
        for (const auto& t : info.tables)
            charge(t);
        schedule(id, now + fault_cost, OpWalkBegin, Segment::Fault);
    }

    void op_walk_begin(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        const WalkPlan plan = cores[f.core].frontend->plan_walk(VirtPage{f.vpage});
        for (int l = 0; l < kTableLevels; ++l) {
            f.walk_addrs[l] = plan.refs[l].byte_address();
            f.walk_spaces[l] = plan.refs[l].table.space;
        }
        f.step = static_cast<std::int8_t>(plan.first);
        walk_issue(id, now);
    }

    void walk_issue(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        f.akind = AccessKind::Read;
        route(id, now, f.walk_spaces[f.step], f.walk_addrs[f.step], MemOp::Read, RequestClass::AtWalk, OpWalkStepDone);
    }

    void op_walk_step_done(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        if (++f.step < kTableLevels) {
            walk_issue(id, now);
            return;
        }
        f.target = cores[f.core].frontend->finish_walk(VirtPage{f.vpage});
        op_access(id, now);
    }

    void op_access(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        const std::uint64_t addr = f.target.byte_address(f.offset);
        const RequestClass cls = RequestClass::Demand;
        f.akind = f.demand;
        f.op = f.demand == AccessKind::Write ? MemOp::Write : MemOp::Read;
        if (f.target.space == PageSpace::Fam) {
            ++nc(f.node)[Counter::fam_demands];
            set_outcome(f, Outcome::Allowed, addr);
            if (f.op == MemOp::Write) {
                f.posted = true;
                retire(id, now);
                fam_access(id, now, addr, MemOp::Write, cls, FlowEnd);
            } else {
                fam_access(id, now, addr, MemOp::Read, cls, OpComplete);
            }
            return;
        }
        const auto parts = decompose_node_address(NodePhysAddr{addr}, cfg.view());
        if (!parts)
            throw ProtocolViolation(fmt::format("translated address {:#x} outside the node view", addr));
        if (parts->zone == Zone::Local) {
            ++nc(f.node)[Counter::local_demands];
            set_outcome(f, Outcome::Local, addr);
            local_access(id, now, addr, f.op, cls, OpComplete);
            return;
        }
        ++nc(f.node)[Counter::fam_demands];
        if (f.op == MemOp::Write) {
            f.posted = true;
            retire(id, now);
            famzone_access(id, now, addr, MemOp::Write, cls, FlowEnd);
        } else {
            famzone_access(id, now, addr, MemOp::Read, cls, OpComplete);
        }
    }

    // ---- translator (DeACT) --------------------------------------------

    void tr_submit(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        NodeUnits& u = nodes[f.node];
        if (expects_response(f)) {
            if (!u.translator->oml().reserve()) {
                ++u.translator->counters().oml_stalls;
                u.tr_stalled.push_back(id);
                return;
            }
            f.oml = OmlState::TrReserved;
        }
        tr_probe(id, now);
    }

    void tr_probe(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        const NodePhysAddr set = nodes[f.node].translator->cache().set_address(NodePhysAddr{f.node_addr}.page());
        local_access(id, now, set.value, MemOp::Read, RequestClass::AtWalk, TrProbeDone);
    }

    void tr_compare(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        FamTranslator& tr = *nodes[f.node].translator;
        const NodePhysAddr node_addr{f.node_addr};
        const TranslatorOutput out = tr.translate(node_addr);
        if (out.v) {
            map_and_send(id, now, out.fam.page());
            return;
        }
        if (auto* pending = tr.pending().find(node_addr.page())) {
            ++tr.counters().pending_joins;
            if (pending->resolved)
                map_and_send(id, now, *pending->resolved);
            else
                pending->waiters.push_back(id);
            return;
        }
        tr.pending().open(node_addr.page());
        schedule(id, now + stu_delay, StuArrive, Segment::Stu);
    }

    /// Rewrites the request to its FAM address (V=1), binds the mapping and
    /// sends it to the STU.
    void map_and_send(std::uint32_t id, Tick now, FamPage fam)
    {
        Flow& f = flows[id];
        f.v = true;
        f.addr = fam.at(f.node_addr & kPageMask).value;
        bind_translator(f, fam);
        schedule(id, now + stu_delay, StuArrive, Segment::Stu);
    }

    void bind_translator(Flow& f, FamPage fam)
    {
        if (f.oml == OmlState::TrReserved) {
            nodes[f.node].translator->oml().bind(fam, NodePhysAddr{f.node_addr}.page());
            f.oml = OmlState::TrBound;
        }
    }

    void tr_mapping_arrive(std::uint32_t id, Tick now)
    {
        Flow& rmw = flows[id];
        FamTranslator& tr = *nodes[rmw.node].translator;
        const NodePage page{rmw.page};
        if (auto* pending = tr.pending().find(page); pending && !pending->resolved) {
            for (std::uint32_t w : tr.pending().resolve(page, FamPage{rmw.fam_page})) {
                flows[w].fam_page = rmw.fam_page;
                schedule(w, now, PendingResume, Segment::Queue);
            }
        }
        local_access(id, now, tr.cache().set_address(page).value, MemOp::Read, RequestClass::AtWalk, RmwReadDone);
    }

    void rmw_write_done(std::uint32_t id)
    {
        Flow& rmw = flows[id];
        FamTranslator& tr = *nodes[rmw.node].translator;
        const NodePage page{rmw.page};
        tr.handle_mapping_response(page, FamPage{rmw.fam_page});
        if (auto* pending = tr.pending().find(page); pending && pending->resolved)
            tr.pending().erase(page);
        end_flow(id);
    }

    void release_oml(Flow& f, Tick now)
    {
        NodeUnits& u = nodes[f.node];
        switch (f.oml) {
        case OmlState::None: return;
        case OmlState::TrReserved: u.translator->oml().release_reserved(); break;
        case OmlState::TrBound: u.translator->oml().cancel(FamAddr{f.addr}.page()); break;
        case OmlState::StuReserved: u.stu->oml().release_reserved(); break;
        case OmlState::StuBound: u.stu->oml().cancel(FamAddr{f.addr}.page()); break;
        }
        const bool at_stu = f.oml == OmlState::StuReserved || f.oml == OmlState::StuBound;
        f.oml = OmlState::None;
        wake_stalled(u, at_stu, now);
    }

    void wake_stalled(NodeUnits& u, bool at_stu, Tick now)
    {
        auto& stalled = at_stu ? u.stu_stalled : u.tr_stalled;
        if (stalled.empty())
            return;
        const std::uint32_t w = stalled.front();
        stalled.pop_front();
        if (at_stu) {
            u.stu->oml().reserve();
            flows[w].oml = OmlState::StuReserved;
            schedule(w, now, IfamLookup, Segment::Queue);
        } else {
            u.translator->oml().reserve();
            flows[w].oml = OmlState::TrReserved;
            schedule(w, now, TrProbe, Segment::Queue);
        }
    }

    void zone_response(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        NodeUnits& u = nodes[f.node];
        if (f.oml == OmlState::TrBound || f.oml == OmlState::StuBound) {
            const bool at_stu = f.oml == OmlState::StuBound;
            OutstandingMappingList& oml = at_stu ? u.stu->oml() : u.translator->oml();
            const NodePhysAddr back = oml.map_response(FamAddr{f.addr});
            if (back.value != f.node_addr)
                throw ProtocolViolation(fmt::format("response for {:#x} re-addressed to {:#x}", f.node_addr, back.value));
            f.oml = OmlState::None;
            wake_stalled(u, at_stu, now);
        }
        run_stage(id, f.zone_done, now);
    }

    void zone_fault(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        release_oml(f, now);
        complete_op(id, now);
    }

    // ---- STU ------------------------------------------------------------

    void stu_arrive(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        if (cfg.scheme == Scheme::IFam) {
            stu_ifam(id, now);
        } else if (f.v) {
            stu_verify(id, now);
        } else {
            stu_walk_request(id, now);
        }
    }

    void stu_drop(std::uint32_t id)
    {
        Flow& f = flows[id];
        ++nodes[f.node].stu->counters().dropped;
        if (f.kind != FlowKind::Raw)
            throw ProtocolViolation(fmt::format("STU dropped a request of core {} (address {:#x})", f.core, f.addr));
        end_flow(id);
    }

    void stu_ifam(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        const auto parts = decompose_node_address(NodePhysAddr{f.addr}, cfg.view());
        if (!parts || parts->zone != Zone::FamZone) {
            stu_drop(id);
            return;
        }
        NodeUnits& u = nodes[f.node];
        if (expects_response(f)) {
            if (!u.stu->oml().reserve()) {
                ++nc(f.node)[Counter::oml_stalls];
                u.stu_stalled.push_back(id);
                return;
            }
            f.oml = OmlState::StuReserved;
        }
        ifam_lookup(id, now);
    }

    void ifam_lookup(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        Stu& stu = *nodes[f.node].stu;
        ++stu.counters().verifications;
        const NodePhysAddr node_addr{f.node_addr};
        if (auto entry = stu.combined().lookup(node_addr.page())) {
            f.v = true;
            f.addr = FamPage{entry->fam_page}.at(node_addr.offset()).value;
            stu_check(id, now, entry->acm);
            return;
        }
        stu_walk_request(id, now);
    }

    void stu_verify(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        Stu& stu = *nodes[f.node].stu;
        ++stu.counters().verifications;
        const FamAddr addr{f.addr};
        const auto& layout = broker.layout();
        if (layout.in_metadata(addr) || addr.value >= layout.fam_capacity) {
            stu_verdict(id, now, Verdict::denied(DenyReason::Unallocated));
            return;
        }
        AcmCache& cache = stu.acm_cache();
        if (auto raw = cache.lookup(addr.page())) {
            stu_check(id, now, *raw);
            return;
        }
        auto& inflight = stu.acm_inflight();
        const std::uint64_t key = cache.fill_key(addr.page());
        if (auto it = inflight.find(key); it != inflight.end()) {
            ++stu.counters().acm_merges;
            it->second.push_back(id);
            return;
        }
        inflight[key].push_back(id);
        ++stu.counters().acm_reads;
        const FamAddr block = acm_block_address(layout.mt_base, addr, broker.acm_format().entries_per_block());
        fam_access(id, now, block.value, MemOp::Read, RequestClass::AtAcm, StuAcmDone);
    }

    void stu_acm_done(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        Stu& stu = *nodes[f.node].stu;
        const FamPage page = FamAddr{f.addr}.page();
        stu.acm_cache().fill(page, broker);
        auto node = stu.acm_inflight().extract(stu.acm_cache().fill_key(page));
        for (std::uint32_t w : node.mapped())
            schedule(w, now, StuAcmReady, Segment::Queue);
    }

    void stu_check(std::uint32_t id, Tick now, std::uint32_t raw)
    {
        Flow& f = flows[id];
        Stu& stu = *nodes[f.node].stu;
        const AcmDecision d = decide_acm(broker.acm_format(), raw, f.node, f.akind);
        if (!d.need_bitmap) {
            stu_verdict(id, now, d.verdict);
            return;
        }
        f.shared_perm = d.shared_perm;
        ++stu.counters().bitmap_reads;
        const auto& layout = broker.layout();
        const BitmapProbe probe = bitmap_probe(layout.bitmap_base, FamAddr{f.addr}, f.node, layout.region_bytes);
        fam_access(id, now, probe.block_addr.value, MemOp::Read, RequestClass::AtBitmap, StuBitmapDone);
    }

    void stu_verdict(std::uint32_t id, Tick now, Verdict v)
    {
        Flow& f = flows[id];
        nodes[f.node].stu->count(v);
        if (!v.allow) {
            set_outcome(f, Outcome::Denied, f.addr, v.reason);
            if (f.kind == FlowKind::Op && !f.posted)
                schedule(id, now + hop, ZoneFault, Segment::Stu);
            else
                end_flow(id);
            return;
        }
        set_outcome(f, Outcome::Allowed, f.addr);
        if (f.oml == OmlState::StuReserved) {
            nodes[f.node].stu->oml().bind(FamAddr{f.addr}.page(), NodePhysAddr{f.node_addr}.page());
            f.oml = OmlState::StuBound;
        }
        if (f.kind == FlowKind::Op && f.op == MemOp::Read)
            fam_access(id, now, f.addr, MemOp::Read, f.cls, ZoneResponse);
        else
            fam_access(id, now, f.addr, f.op, f.cls, FlowEnd);
    }

    void stu_walk_request(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        const auto parts = decompose_node_address(NodePhysAddr{f.node_addr}, cfg.view());
        if (!parts || parts->zone != Zone::FamZone) {
            stu_drop(id);
            return;
        }
        Stu& stu = *nodes[f.node].stu;
        if (stu.coalescer().request(parts->page.value, id) == WalkCoalescer::Join::Started)
            start_walk(f.node, parts->page.value, now);
    }

    void start_walk(NodeId node, std::uint64_t page, Tick now)
    {
        Stu& stu = *nodes[node].stu;
        if (!broker.fam_translate(node, NodePage{page})) {
            Allocation a;
            try {
                a = broker.allocate_on_demand(node, NodePage{page});
            } catch (const OutOfMemory&) {
                // Nothing can back the page: every waiter is refused.
                for (std::uint32_t g : stu.coalescer().complete(page))
                    stu_verdict(g, now, Verdict::denied(DenyReason::Unallocated));
                while (auto next = stu.coalescer().next_start())
                    start_walk(node, *next, now);
                return;
            }
            alloc_log.push_back(AllocationRecord{AllocationRecord::Kind::OnDemand, node, 0, page});
            ++stu.counters().on_demand;
            if (a.acm_written)
                spawn_acm_write(node, *a.fam_page, now);
        }
        const std::uint32_t id = new_flow(FlowKind::Walk, node, now);
        Flow& w = flows[id];
        w.page = page;
        w.fam_page = broker.fam_translate(node, NodePage{page})->value;
        const auto refs = broker.fam_table(node).walk_entries(page);
        for (int l = 0; l < kTableLevels; ++l)
            w.walk_addrs[l] = refs[l].byte_address();
        w.step = 0;
        ++stu.counters().walks;
        stu_walk_read(id, now);
    }

    void stu_walk_read(std::uint32_t id, Tick now)
    {
        Flow& w = flows[id];
        ++nodes[w.node].stu->counters().walk_reads;
        fam_access(id, now, w.walk_addrs[w.step], MemOp::Read, RequestClass::AtWalk, WalkStepDone);
    }

    void walk_step_done(std::uint32_t id, Tick now)
    {
        Flow& w = flows[id];
        if (++w.step < kTableLevels) {
            stu_walk_read(id, now);
            return;
        }
        if (cfg.scheme == Scheme::IFam) {
            Stu& stu = *nodes[w.node].stu;
            ++stu.counters().acm_reads;
            const FamAddr block = acm_block_address(broker.layout().mt_base, FamPage{w.fam_page}.base(),
                                                    broker.acm_format().entries_per_block());
            fam_access(id, now, block.value, MemOp::Read, RequestClass::AtAcm, WalkAcmDone);
            return;
        }
        walk_finish(id, now);
    }

    void walk_finish(std::uint32_t id, Tick now)
    {
        Flow& w = flows[id];
        const NodeId node = w.node;
        const std::uint64_t page = w.page;
        const FamPage fam{w.fam_page};
        Stu& stu = *nodes[node].stu;
        if (cfg.scheme == Scheme::IFam)
            stu.combined().install(NodePage{page}, CombinedEntry{fam.value, broker.acm(fam)});

        for (std::uint32_t g : stu.coalescer().complete(page)) {
            Flow& f = flows[g];
            f.v = true;
            f.addr = fam.at(f.node_addr & kPageMask).value;
            bind_translator(f, fam);
            schedule(g, now, WaiterResume, Segment::Queue);
        }
        if (is_deact(cfg.scheme)) {
            ++stu.counters().mapping_responses;
            const std::uint32_t rmw = new_flow(FlowKind::Rmw, node, now);
            flows[rmw].page = page;
            flows[rmw].fam_page = fam.value;
            schedule(rmw, now + hop, TrMappingArrive, Segment::Stu);
        }
        end_flow(id);
        while (auto next = stu.coalescer().next_start())
            start_walk(node, *next, now);
    }

    void waiter_resume(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        if (cfg.scheme == Scheme::IFam)
            stu_check(id, now, broker.acm(FamAddr{f.addr}.page()));
        else
            stu_verify(id, now);
    }

    // ---- raw requests ---------------------------------------------------

    void raw_start(std::uint32_t id, Tick now)
    {
        Flow& f = flows[id];
        if (cfg.scheme == Scheme::EFam)
            throw std::logic_error("raw requests need an STU; E-FAM has none");
        if (cfg.scheme == Scheme::IFam || !f.v) {
            f.v = false;
            f.node_addr = f.addr;
        }
        schedule(id, now + stu_delay, StuArrive, Segment::Stu);
    }

    // ---- dispatch -------------------------------------------------------

    void run_stage(std::uint32_t id, Stage stage, Tick now)
    {
        switch (stage) {
        case OpTlbMiss: op_tlb_miss(id, now); break;
        case OpWalkBegin: op_walk_begin(id, now); break;
        case OpWalkStepDone: op_walk_step_done(id, now); break;
        case OpAccessStage: op_access(id, now); break;
        case OpComplete: complete_op(id, now); break;
        case LocalDone:
            nodes[flows[id].node].local->complete();
            run_stage(id, flows[id].resume, now);
            break;
        case FamArrive: {
            Flow& f = flows[id];
            BankedMemory& pool = pool_of(f.mem_addr);
            ++nc(f.node)[f.mem_cls == RequestClass::Demand  ? Counter::fam_demand
                         : f.mem_cls == RequestClass::AtWalk ? Counter::fam_at_walk
                         : f.mem_cls == RequestClass::AtAcm  ? Counter::fam_at_acm
                                                             : Counter::fam_at_bitmap];
            if (observer)
                observer(f.node, FamAddr{f.mem_addr}, f.mem_cls, f.mem_op, f.akind);
            schedule(id, pool.service(now, f.mem_addr, f.mem_op, f.mem_cls), FamDone, Segment::FamBank);
            break;
        }
        case FamDone: {
            Flow& f = flows[id];
            pool_of(f.mem_addr).complete();
            if (f.mem_op == MemOp::Read)
                schedule(id, resp_links[pool_index(f.mem_addr)].transit(now), f.resume, Segment::FabricBack);
            else
                run_stage(id, f.resume, now);
            break;
        }
        case TrProbe: tr_probe(id, now); break;
        case TrProbeDone: schedule(id, now + compare, TrCompare, Segment::Translator); break;
        case TrCompare: tr_compare(id, now); break;
        case TrMappingArrive: tr_mapping_arrive(id, now); break;
        case PendingResume: map_and_send(id, now, FamPage{flows[id].fam_page}); break;
        case RmwReadDone:
            local_access(id, now, nodes[flows[id].node].translator->cache().set_address(NodePage{flows[id].page}).value,
                         MemOp::Write, RequestClass::AtWalk, RmwWriteDone);
            break;
        case RmwWriteDone: rmw_write_done(id); break;
        case StuArrive: stu_arrive(id, now); break;
        case IfamLookup: ifam_lookup(id, now); break;
        case StuAcmDone: stu_acm_done(id, now); break;
        case StuAcmReady: stu_check(id, now, broker.acm(FamAddr{flows[id].addr}.page())); break;
        case StuBitmapDone: {
            Flow& f = flows[id];
            const FamAddr addr{f.addr};
            stu_verdict(id, now, decide_shared(broker.bitmap_bit(addr.page(), f.node), f.shared_perm, f.akind));
            break;
        }
        case WalkStepDone: walk_step_done(id, now); break;
        case WalkAcmDone: walk_finish(id, now); break;
        case WaiterResume: waiter_resume(id, now); break;
        case ZoneResponse: zone_response(id, now); break;
        case ZoneFault: zone_fault(id, now); break;
        case RawStart: raw_start(id, now); break;
        case FlowEnd: end_flow(id); break;
        case CoreWake:
        case OpStart: throw ProtocolViolation("stage dispatched without a flow");
        }
    }

    void dispatch(const Event& e)
    {
        if (e.flow & kCoreFlag) {
            const std::uint32_t c = e.flow & ~kCoreFlag;
            cores[c].wake_pending = false;
            try_issue(c, e.time);
            return;
        }
        Flow& f = flows[e.flow];
        f.seg[e.seg] += e.time - f.last;
        f.last = e.time;
        run_stage(e.flow, static_cast<Stage>(e.stage), e.time);
    }

    // ---- stats ----------------------------------------------------------

    Counters collect_node(NodeId n) const
    {
        const NodeUnits& u = nodes[n];
        Counters c = u.counters;
        for (const auto& core : cores) {
            if (core.node != n || !core.frontend)
                continue;
            const auto& t = core.frontend->tlb().counters();
            c[Counter::tlb_l1_hits] += t.l1_hits;
            c[Counter::tlb_l2_hits] += t.l2_hits;
            c[Counter::tlb_misses] += t.misses;
            c[Counter::walks] += core.frontend->walks();
            c[Counter::walk_accesses] += core.frontend->walk_accesses();
            c[Counter::faults] += core.frontend->faults();
        }
        if (u.translator) {
            const auto& t = u.translator->counters();
            c[Counter::translator_lookups] += t.lookups;
            c[Counter::translator_hits] += t.hits;
            c[Counter::translator_misses] += t.misses;
            c[Counter::translator_pending_joins] += t.pending_joins;
            c[Counter::translator_updates] += t.updates;
            c[Counter::translator_evictions] += t.evictions;
            c[Counter::translator_dram_reads] += t.dram_reads;
            c[Counter::translator_dram_writes] += t.dram_writes;
            c[Counter::oml_stalls] += t.oml_stalls;
        }
        const Stu& stu = *u.stu;
        const auto& s = stu.counters();
        if (const AcmCache* a = stu.acm_cache_if()) {
            c[Counter::stu_acm_hits] += a->counters().hits;
            c[Counter::stu_acm_misses] += a->counters().misses;
            c[Counter::stu_invalidations] += a->counters().invalidations;
        }
        if (const CombinedCache* cc = stu.combined_if()) {
            c[Counter::stu_combined_hits] += cc->counters().hits;
            c[Counter::stu_combined_misses] += cc->counters().misses;
            c[Counter::stu_invalidations] += cc->counters().invalidations;
        }
        c[Counter::stu_acm_merges] += s.acm_merges;
        c[Counter::stu_verifications] += s.verifications;
        c[Counter::stu_walks] += s.walks;
        c[Counter::stu_walks_merged] += stu.coalescer().merged();
        c[Counter::stu_walk_reads] += s.walk_reads;
        c[Counter::stu_acm_reads] += s.acm_reads;
        c[Counter::stu_bitmap_reads] += s.bitmap_reads;
        c[Counter::stu_mapping_responses] += s.mapping_responses;
        c[Counter::stu_on_demand] += s.on_demand;
        c[Counter::stu_dropped] += s.dropped;
        c[Counter::allowed] += s.allowed;
        c[Counter::denied_not_owner] += s.denied[static_cast<std::size_t>(DenyReason::NotOwner)];
        c[Counter::denied_not_in_bitmap] += s.denied[static_cast<std::size_t>(DenyReason::NotInBitmap)];
        c[Counter::denied_insufficient_perm] += s.denied[static_cast<std::size_t>(DenyReason::InsufficientPerm)];
        c[Counter::denied_unallocated] += s.denied[static_cast<std::size_t>(DenyReason::Unallocated)];
        const auto& l = u.local->counters();
        c[Counter::local_reads] += l.reads;
        c[Counter::local_writes] += l.writes;
        c[Counter::local_admitted] += l.admitted;
        c[Counter::local_completed] += l.completed;
        return c;
    }

    Counters collect_shared() const
    {
        Counters c;
        for (const auto& p : pools) {
            const auto& m = p->counters();
            c[Counter::fam_reads] += m.reads;
            c[Counter::fam_writes] += m.writes;
            c[Counter::fam_admitted] += m.admitted;
            c[Counter::fam_completed] += m.completed;
            c[Counter::fam_admission_waits] += m.admission_waits;
        }
        for (std::size_t p = 0; p < pools.size(); ++p) {
            c[Counter::fabric_messages] += req_links[p].messages() + resp_links[p].messages();
            c[Counter::fabric_queue_ps] += req_links[p].queueing() + resp_links[p].queueing();
        }
        const auto& b = broker.counters();
        c[Counter::allocations] = b.allocations;
        c[Counter::local_pages] = b.local_pages;
        c[Counter::fam_pages] = b.fam_pages;
        c[Counter::alloc_fallbacks] = b.fallbacks;
        c[Counter::alloc_acm_writes] = b.acm_writes;
        return c;
    }

    Counters collect_total() const
    {
        Counters c = collect_shared();
        for (NodeId n = 0; n < nodes.size(); ++n)
            c += collect_node(n);
        return c;
    }

    SimStats run()
    {
        if (ran)
            throw std::logic_error("Simulator::run called twice");
        ran = true;

        for (const RawRequest& r : raws) {
            if (r.node >= nodes.size())
                throw std::invalid_argument("raw request from an unknown node");
            const std::uint32_t id = new_flow(FlowKind::Raw, r.node, r.at);
            Flow& f = flows[id];
            f.addr = r.addr;
            f.v = r.v;
            f.akind = r.kind;
            f.demand = r.kind;
            f.op = r.kind == AccessKind::Write ? MemOp::Write : MemOp::Read;
            schedule(id, r.at, RawStart, Segment::Queue);
        }

        if (cfg.warmup_events == 0 || cores.empty())
            take_snapshot(0);
        for (std::uint32_t c = 0; c < cores.size(); ++c) {
            if (!cores[c].trace || cores[c].trace->empty())
                note_warmup_empty(c);
            try_issue(c, 0);
        }

        while (!queue.empty()) {
            const Event e = queue.top();
            queue.pop();
            dispatch(e);
        }

        for (const auto& core : cores)
            if (core.trace && (core.next != core.trace->size() || core.in_flight != 0))
                throw ProtocolViolation("event queue drained with events still in flight");

        SimStats stats;
        stats.scheme = std::string(to_string(cfg.scheme));
        stats.seed = cfg.seed;
        stats.total_ticks = last_retire;
        stats.measured_ticks = last_retire > snapshot_time ? last_retire - snapshot_time : 0;
        stats.total = collect_total();
        stats.total -= snapshot;
        for (NodeId n = 0; n < nodes.size(); ++n) {
            Counters c = collect_node(n);
            c -= snapshot_nodes[n];
            stats.per_node.push_back(c);
        }
        return stats;
    }

    void note_warmup_empty(std::uint32_t c)
    {
        Core& core = cores[c];
        if (core.past_warmup)
            return;
        core.past_warmup = true;
        if (++cores_past_warmup == cores.size())
            take_snapshot(0);
    }
};

Simulator::Simulator(const SimConfig& config, std::vector<std::vector<TraceEvent>> traces, EngineOptions options)
{
    auto issues = validate(config);
    if (!issues.empty())
        throw ConfigError(std::move(issues));
    if (traces.size() > config.total_cores())
        throw ConfigError(fmt::format("{} traces for {} cores", traces.size(), config.total_cores()));
    impl_ = std::make_unique<Impl>(config, std::move(traces), options);
}

Simulator::~Simulator() = default;

void Simulator::inject_raw(const RawRequest& request)
{
    impl_->raws.push_back(request);
}

void Simulator::set_fam_observer(FamObserver observer)
{
    impl_->observer = std::move(observer);
}

SimStats Simulator::run()
{
    return impl_->run();
}

const SimConfig& Simulator::config() const { return impl_->cfg; }
Broker& Simulator::broker() { return impl_->broker; }
const std::vector<std::vector<OpRecord>>& Simulator::records() const { return impl_->records; }
const std::vector<std::vector<SegmentTimes>>& Simulator::segments() const { return impl_->op_segments; }
const std::vector<AllocationRecord>& Simulator::allocation_log() const { return impl_->alloc_log; }
const BankedMemory& Simulator::fam_pool(std::size_t i) const { return *impl_->pools.at(i); }
const BankedMemory& Simulator::local_memory(NodeId node) const { return *impl_->nodes.at(node).local; }
const Stu& Simulator::stu(NodeId node) const { return *impl_->nodes.at(node).stu; }
const FamTranslator* Simulator::translator(NodeId node) const { return impl_->nodes.at(node).translator.get(); }

} // namespace deact
