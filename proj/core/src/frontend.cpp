#include "deact/frontend.hpp"

#include <stdexcept>

namespace deact {

Tlb::Tlb(std::size_t l1_entries, std::size_t l2_entries, std::size_t l2_ways)
    : l1_(1, l1_entries), l2_(l2_entries / l2_ways, l2_ways)
{
    if (l2_ways == 0 || l2_entries % l2_ways != 0)
        throw std::invalid_argument("L2 TLB ways must divide its entries");
}

std::optional<TlbHit> Tlb::lookup(VirtPage page)
{
    if (const PageLoc* loc = l1_.find(0, page.value)) {
        ++counters_.l1_hits;
        return TlbHit{*loc, TlbLevel::L1};
    }
    if (const PageLoc* loc = l2_.find(l2_set(page), page.value)) {
        ++counters_.l2_hits;
        const PageLoc hit = *loc;
        l1_.insert(0, page.value, hit);
        return TlbHit{hit, TlbLevel::L2};
    }
    ++counters_.misses;
    return std::nullopt;
}

void Tlb::fill(VirtPage page, PageLoc loc)
{
    l1_.insert(0, page.value, loc);
    l2_.insert(l2_set(page), page.value, loc);
}

int PtwCache::deepest(std::uint64_t page)
{
    for (int level = kTableLevels - 1; level >= 1; --level)
        if (cache_.find(0, key(level, page)))
            return level;
    return 0;
}

void PtwCache::fill(std::uint64_t page)
{
    for (int level = 1; level < kTableLevels; ++level)
        cache_.insert(0, key(level, page), 0);
}

FaultInfo handle_fault(Broker& broker, NodeId node, RadixPageTable& table, VirtPage page,
                       const std::vector<SharedWindow>& windows)
{
    FaultInfo info;
    bool placed = false;
    for (const auto& w : windows) {
        if (w.contains(page)) {
            info.loc = broker.map_shared(node, w.region.page(page.value - w.va_base.page().value));
            placed = true;
            break;
        }
    }
    if (!placed) {
        info.data = broker.allocate_page(node, PageRole::Data);
        info.loc = info.data->loc;
    }
    table.map(page.value, info.loc, [&] {
        info.tables.push_back(broker.allocate_page(node, PageRole::Table));
        return info.tables.back().loc;
    });
    return info;
}

namespace {

PageLoc allocate_root(Broker& broker, NodeId node)
{
    return broker.allocate_page(node, PageRole::Table).loc;
}

} // namespace

Frontend::Frontend(NodeId node, Broker& broker, const FrontendConfig& config,
                   std::vector<SharedWindow> windows)
    : node_(node),
      broker_(broker),
      windows_(std::move(windows)),
      table_(allocate_root(broker, node)),
      tlb_(config.tlb_l1_entries, config.tlb_l2_entries, config.tlb_l2_ways),
      ptw_(config.ptw_entries)
{
}

FaultInfo Frontend::fault(VirtPage page)
{
    ++faults_;
    return handle_fault(broker_, node_, table_, page, windows_);
}

WalkPlan Frontend::plan_walk(VirtPage page)
{
    WalkPlan plan;
    plan.refs = table_.walk_entries(page.value);
    plan.first = ptw_.deepest(page.value);
    ++walks_;
    walk_accesses_ += plan.accesses();
    return plan;
}

PageLoc Frontend::finish_walk(VirtPage page)
{
    auto loc = table_.lookup(page.value);
    if (!loc)
        throw ProtocolViolation("walk finished on an unmapped page");
    ptw_.fill(page.value);
    tlb_.fill(page, *loc);
    return *loc;
}

std::pair<PageLoc, std::vector<TableEntryRef>> Frontend::walk_node_table(VirtAddr vaddr)
{
    const VirtPage page = vaddr.page();
    if (!mapped(page))
        fault(page);
    const WalkPlan plan = plan_walk(page);
    std::vector<TableEntryRef> accesses(plan.refs.begin() + plan.first, plan.refs.end());
    const PageLoc loc = finish_walk(page);
    return {PageLoc{loc.space, loc.page}, std::move(accesses)};
}

} // namespace deact
