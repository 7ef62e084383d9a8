#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "deact/address.hpp"
#include "deact/broker.hpp"
#include "deact/page_table.hpp"
#include "deact/set_assoc.hpp"

namespace deact {

struct TlbCounters {
    std::uint64_t l1_hits = 0;
    std::uint64_t l2_hits = 0;
    std::uint64_t misses = 0;
};

enum class TlbLevel : std::uint8_t { L1, L2 };

struct TlbHit {
    PageLoc loc;
    TlbLevel level;
};

/// Two-level TLB: fully associative L1, set-associative L2, both LRU.
class Tlb {
public:
    Tlb(std::size_t l1_entries = 32, std::size_t l2_entries = 256, std::size_t l2_ways = 4);

    /// An L2 hit is copied into L1. A miss changes nothing.
    std::optional<TlbHit> lookup(VirtPage page);
    void fill(VirtPage page, PageLoc loc);

    const TlbCounters& counters() const { return counters_; }

private:
    std::size_t l2_set(VirtPage page) const { return page.value % l2_.sets(); }

    SetAssocLru<std::uint64_t, PageLoc> l1_;
    SetAssocLru<std::uint64_t, PageLoc> l2_;
    TlbCounters counters_;
};

/// Fully associative LRU cache of intermediate page-table pointers, keyed by
/// (level, index prefix). Level l names the table reached after l steps, so a
/// hit at level l skips the first l reads of a walk.
class PtwCache {
public:
    explicit PtwCache(std::size_t entries = 32) : cache_(1, entries) {}

    /// Deepest cached level for `page` (0 when nothing is cached).
    int deepest(std::uint64_t page);
    void fill(std::uint64_t page);

private:
    static std::uint64_t key(int level, std::uint64_t page)
    {
        return (static_cast<std::uint64_t>(level) << 60) | RadixPageTable::prefix_at(page, level);
    }

    SetAssocLru<std::uint64_t, char> cache_;
};

/// A node physical (or, under E-FAM, FAM) window of a shared region mapped
/// at a fixed virtual base in every core's address space.
struct SharedWindow {
    VirtAddr va_base;
    SharedRegion region;

    bool contains(VirtPage p) const
    {
        const std::uint64_t first = va_base.page().value;
        return p.value >= first && p.value < first + region.pages;
    }
};

struct FaultInfo {
    PageLoc loc;
    std::optional<Allocation> data; ///< absent for shared pages
    std::vector<Allocation> tables;
};

/// First-touch handling shared by the simulator and the reference model:
/// allocate (or map the shared page), then install it with any missing
/// table pages in `table`.
FaultInfo handle_fault(Broker& broker, NodeId node, RadixPageTable& table, VirtPage page,
                       const std::vector<SharedWindow>& windows);

struct WalkPlan {
    std::array<TableEntryRef, kTableLevels> refs;
    int first = 0; ///< index of the first entry actually read

    int accesses() const { return kTableLevels - first; }
};

struct FrontendConfig {
    std::size_t tlb_l1_entries = 32;
    std::size_t tlb_l2_entries = 256;
    std::size_t tlb_l2_ways = 4;
    std::size_t ptw_entries = 32;
};

/// Per-core virtual to node-physical translation: TLBs, PTW cache and the
/// core's 4-level page table (whose pages come from the broker).
class Frontend {
public:
    Frontend(NodeId node, Broker& broker, const FrontendConfig& config,
             std::vector<SharedWindow> windows = {});

    NodeId node() const { return node_; }
    const RadixPageTable& page_table() const { return table_; }
    const Tlb& tlb() const { return tlb_; }

    std::optional<TlbHit> tlb_translate(VirtPage page) { return tlb_.lookup(page); }

    bool mapped(VirtPage page) const { return table_.is_mapped(page.value); }
    FaultInfo fault(VirtPage page);

    /// Entries a walk of a mapped page must read, after PTW-cache hits.
    WalkPlan plan_walk(VirtPage page);
    /// Completes a walk: PTW cache and TLBs filled, target returned.
    PageLoc finish_walk(VirtPage page);

    /// Functional walk: the accesses it issues and the resulting location.
    std::pair<PageLoc, std::vector<TableEntryRef>> walk_node_table(VirtAddr vaddr);

    std::uint64_t walks() const { return walks_; }
    std::uint64_t walk_accesses() const { return walk_accesses_; }
    std::uint64_t faults() const { return faults_; }

private:
    NodeId node_;
    Broker& broker_;
    std::vector<SharedWindow> windows_;
    RadixPageTable table_;
    Tlb tlb_;
    PtwCache ptw_;
    std::uint64_t walks_ = 0;
    std::uint64_t walk_accesses_ = 0;
    std::uint64_t faults_ = 0;
};

} // namespace deact
