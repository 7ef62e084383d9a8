#include "deact/translator.hpp"

#include <stdexcept>
#include <utility>

#include <fmt/format.h>

namespace deact {

TranslationCache::TranslationCache(std::uint64_t base, std::uint64_t capacity_bytes, std::uint64_t seed)
    : base_(base), sets_(capacity_bytes / kBlockSize), rng_(seed), entries_(sets_ * kTranslationWays)
{
    if (sets_ == 0)
        throw std::invalid_argument("translation cache needs at least one 64-byte set");
}

std::optional<FamPage> TranslationCache::probe(NodePage page) const
{
    const Entry* set = &entries_[set_index(page) * kTranslationWays];
    std::uint64_t out = 0;
    for (std::size_t w = 0; w < kTranslationWays; ++w)
        if (set[w].value != 0 && set[w].tag == page.value)
            out = set[w].value;
    if (out == 0)
        return std::nullopt;
    return FamPage{out};
}

std::optional<NodePage> TranslationCache::install(NodePage page, FamPage fam)
{
    if (fam.value == 0)
        throw std::invalid_argument("FAM page 0 is the miss sentinel");
    Entry* set = &entries_[set_index(page) * kTranslationWays];
    for (std::size_t w = 0; w < kTranslationWays; ++w) {
        if (set[w].value != 0 && set[w].tag == page.value) {
            set[w].value = fam.value;
            return std::nullopt;
        }
    }
    for (std::size_t w = 0; w < kTranslationWays; ++w) {
        if (set[w].value == 0) {
            set[w] = Entry{page.value, fam.value};
            return std::nullopt;
        }
    }
    Entry& victim = set[rng_.below(kTranslationWays)];
    const NodePage evicted{victim.tag};
    victim = Entry{page.value, fam.value};
    return evicted;
}

std::size_t TranslationCache::occupancy() const
{
    std::size_t n = 0;
    for (const auto& e : entries_)
        n += e.value != 0;
    return n;
}

bool OutstandingMappingList::reserve()
{
    if (full())
        return false;
    ++in_use_;
    return true;
}

void OutstandingMappingList::release_reserved()
{
    if (in_use_ <= bound_)
        throw ProtocolViolation("outstanding mapping list: release without reservation");
    --in_use_;
}

void OutstandingMappingList::bind(FamPage fam, NodePage node)
{
    if (in_use_ <= bound_)
        throw ProtocolViolation("outstanding mapping list: bind without reservation");
    auto [it, inserted] = map_.try_emplace(fam.value, Binding{node.value, 0});
    if (!inserted && it->second.node_page != node.value)
        throw ProtocolViolation(fmt::format("FAM page {:#x} bound to two node pages", fam.value));
    ++it->second.refs;
    ++bound_;
}

NodePhysAddr OutstandingMappingList::map_response(FamAddr addr)
{
    auto it = map_.find(addr.page().value);
    if (it == map_.end())
        throw ProtocolViolation(fmt::format("response at FAM address {:#x} has no outstanding mapping", addr.value));
    const NodePhysAddr out = NodePage{it->second.node_page}.at(addr.offset());
    cancel(addr.page());
    return out;
}

void OutstandingMappingList::cancel(FamPage fam)
{
    auto it = map_.find(fam.value);
    if (it == map_.end())
        throw ProtocolViolation(fmt::format("no outstanding mapping for FAM page {:#x}", fam.value));
    if (--it->second.refs == 0)
        map_.erase(it);
    --bound_;
    --in_use_;
}

PendingMissQueue::Entry* PendingMissQueue::find(NodePage page)
{
    auto it = map_.find(page.value);
    return it == map_.end() ? nullptr : &it->second;
}

PendingMissQueue::Entry& PendingMissQueue::open(NodePage page)
{
    auto [it, inserted] = map_.try_emplace(page.value);
    if (!inserted)
        throw ProtocolViolation(fmt::format("second pending miss opened for node page {:#x}", page.value));
    return it->second;
}

std::vector<std::uint32_t> PendingMissQueue::resolve(NodePage page, FamPage fam)
{
    Entry* e = find(page);
    if (e == nullptr || e->resolved)
        throw ProtocolViolation(fmt::format("mapping response for node page {:#x} without a pending miss", page.value));
    e->resolved = fam;
    return std::exchange(e->waiters, {});
}

TranslatorOutput FamTranslator::translate(NodePhysAddr addr)
{
    ++counters_.lookups;
    ++counters_.dram_reads;
    TranslatorOutput out;
    if (auto fam = cache_.probe(addr.page())) {
        ++counters_.hits;
        out.v = true;
        out.fam = fam->at(addr.offset());
    } else {
        ++counters_.misses;
        out.node = addr;
    }
    return out;
}

void FamTranslator::handle_mapping_response(NodePage page, FamPage fam)
{
    ++counters_.updates;
    ++counters_.dram_reads;
    ++counters_.dram_writes;
    if (cache_.install(page, fam))
        ++counters_.evictions;
}

} // namespace deact
