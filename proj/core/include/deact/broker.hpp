#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "deact/acm.hpp"
#include "deact/address.hpp"
#include "deact/common.hpp"
#include "deact/layout.hpp"
#include "deact/page_table.hpp"

namespace deact {

enum class Placement { Random, FirstFit };

std::string_view to_string(Placement p);

enum class PageRole { Data, Table };

struct BrokerConfig {
    unsigned nodes = 1;
    NodeView view;
    /// Bytes at the top of local DRAM reserved for the FAM translation cache.
    std::uint64_t local_reserved = 0;
    std::uint64_t fam_capacity = 16 * GiB;
    std::uint64_t shared_region_bytes = kSharedRegionBytes;
    unsigned acm_bits = 16;
    double local_fraction = 0.2;
    Placement placement = Placement::Random;
    /// E-FAM: node page tables hold FAM pages directly; no FAM page table.
    bool direct_fam = false;
    /// Node page-table pages take part in the local/FAM split (always true
    /// under direct_fam; optional otherwise).
    bool tables_follow_split = false;
    /// Keep the ACM region up to date. Off when nothing verifies accesses.
    bool maintain_acm = true;
    std::uint64_t seed = 1;
};

struct Allocation {
    PageLoc loc;
    std::optional<FamPage> fam_page; ///< backing FAM page, when the page lives in FAM
    bool acm_written = false;
    bool fell_back = false;
};

struct SharedRegion {
    FamAddr base;
    std::uint64_t pages = 0;
    std::vector<NodeId> members;
    Perm perm = Perm::R;

    FamPage page(std::uint64_t i) const { return FamPage{base.page().value + i}; }
    bool contains(FamPage p) const
    {
        return p.value >= base.page().value && p.value < base.page().value + pages;
    }
};

struct BrokerCounters {
    std::uint64_t allocations = 0;
    std::uint64_t local_pages = 0;
    std::uint64_t fam_pages = 0;
    std::uint64_t fallbacks = 0;
    std::uint64_t on_demand = 0;
    std::uint64_t releases = 0;
    std::uint64_t acm_writes = 0;
    std::uint64_t fam_table_pages = 0;
};

/// System-level memory manager. Hands out node physical and FAM pages on
/// first touch, owns the ACM region, the shared-region bitmaps and every
/// node's FAM page table.
class Broker {
public:
    using AcmListener = std::function<void(FamPage first, std::uint64_t count)>;

    explicit Broker(const BrokerConfig& config);

    const BrokerConfig& config() const { return config_; }
    const RegionLayout& layout() const { return layout_; }
    const AcmFormat& acm_format() const { return format_; }
    const BrokerCounters& counters() const { return counters_; }

    /// Called after every change to the ACM region (for STU coherence).
    void set_acm_listener(AcmListener listener) { listener_ = std::move(listener); }

    /// First-touch allocation for `node`. Data pages (and table pages when they
    /// follow the split) go local on every 1/local_fraction-th allocation, FAM
    /// otherwise; a zone that is full falls back to the other one.
    Allocation allocate_page(NodeId node, PageRole role = PageRole::Data);

    /// Backs an unmapped FAM-zone node page on behalf of an STU walk.
    Allocation allocate_on_demand(NodeId node, NodePage page);

    /// Maps `fam_page` (inside a shared region) into `node`'s view. Repeated
    /// calls for the same pair return the same node page.
    PageLoc map_shared(NodeId node, FamPage fam_page);

    SharedRegion create_shared_region(const std::vector<NodeId>& members, Perm perm);

    /// Tears down a private FAM-zone page: ACM zeroed, mapping removed, pages
    /// freed. Throws std::invalid_argument when `node` does not own it.
    void release_page(NodeId node, NodePage page);

    std::optional<FamPage> fam_translate(NodeId node, NodePage page) const;
    const RadixPageTable& fam_table(NodeId node) const { return fam_tables_.at(node); }

    std::uint32_t acm(FamPage page) const;
    bool bitmap_bit(FamPage page, NodeId node) const;
    bool fam_page_used(FamPage page) const { return page.value < fam_used_.size() && fam_used_[page.value]; }

    /// Allocator for a node's own page-table pages.
    PageLoc allocate_table_page(NodeId node);

    const std::vector<SharedRegion>& shared_regions() const { return shared_; }

private:
    struct NodeState {
        std::uint64_t counter = 0;
        std::uint64_t next_local = 0;
        std::uint64_t next_famzone = 0;
        std::vector<std::uint64_t> free_local;
        std::vector<std::uint64_t> free_famzone;
        std::unordered_map<std::uint64_t, std::uint64_t> shared_map; // fam page -> node page
    };

    bool route_local(NodeState& st);
    std::optional<std::uint64_t> take_local(NodeState& st);
    std::optional<std::uint64_t> take_famzone(NodeId node, NodeState& st);
    std::optional<FamPage> take_fam();
    Allocation back_with_fam(NodeId node, std::uint64_t node_page);
    void write_acm(FamPage page, std::uint32_t raw);
    void set_bitmap_bit(std::uint64_t region, NodeId node);

    BrokerConfig config_;
    RegionLayout layout_;
    AcmFormat format_;
    Rng rng_;
    std::vector<bool> fam_used_;
    std::uint64_t fam_cursor_ = 1;
    std::uint64_t local_pages_;
    std::uint64_t famzone_first_;
    std::uint64_t famzone_end_;
    std::vector<NodeState> nodes_;
    std::vector<RadixPageTable> fam_tables_;
    std::unordered_map<std::uint64_t, std::uint32_t> acm_;
    std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> bitmaps_;
    std::vector<SharedRegion> shared_;
    BrokerCounters counters_;
    AcmListener listener_;
};

} // namespace deact
