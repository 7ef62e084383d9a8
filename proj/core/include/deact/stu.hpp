#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "deact/acm.hpp"
#include "deact/address.hpp"
#include "deact/broker.hpp"
#include "deact/fam_memory.hpp"
#include "deact/set_assoc.hpp"
#include "deact/translator.hpp"

namespace deact {

enum class DenyReason : std::uint8_t { NotOwner, NotInBitmap, InsufficientPerm, Unallocated };

inline constexpr std::size_t kDenyReasons = 4;

std::string_view to_string(DenyReason r);

struct Verdict {
    bool allow = true;
    DenyReason reason = DenyReason::Unallocated;

    static Verdict allowed() { return Verdict{true, DenyReason::Unallocated}; }
    static Verdict denied(DenyReason r) { return Verdict{false, r}; }

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Outcome of checking a decoded ACM entry. Shared pages cannot be decided
/// without the region bitmap.
struct AcmDecision {
    bool need_bitmap = false;
    Perm shared_perm = Perm::None;
    Verdict verdict;
};

AcmDecision decide_acm(const AcmFormat& format, std::uint32_t raw, NodeId node, AccessKind kind);
Verdict decide_shared(bool member, Perm perm, AccessKind kind);

enum class AcmLayout : std::uint8_t { Wide, Narrow };

/// Invalidations of at most this many pages probe sets directly instead of
/// scanning the whole cache.
inline constexpr std::uint64_t kTargetedInvalidation = 64;

struct AcmCacheCounters {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t fills = 0;
    std::uint64_t invalidations = 0;
};

/// DeACT STU cache of ACM entries. Wide: one tag per group of contiguous
/// pages (64 payload bits per way). Narrow: every way split into independent
/// (tag, ACM) pairs that act as separate LRU ways of the set.
class AcmCache {
public:
    AcmCache(AcmLayout layout, std::size_t entries, std::size_t ways, unsigned acm_bits,
             unsigned pairs_per_way = 2);

    AcmLayout layout() const { return layout_; }
    std::size_t sets() const { return sets_; }
    /// Pages covered by one Wide way.
    std::uint64_t group() const { return group_; }
    unsigned tag_bits() const { return tag_bits_; }
    std::uint64_t reach_pages() const;

    std::size_t set_of(FamPage page) const;
    /// Identity of the fill that covers `page` (group id or page).
    std::uint64_t fill_key(FamPage page) const;

    std::optional<std::uint32_t> lookup(FamPage page);
    /// Installs what the layout holds for `page`, reading ACM values from `broker`.
    void fill(FamPage page, const Broker& broker);
    void invalidate(FamPage first, std::uint64_t count);

    const AcmCacheCounters& counters() const { return counters_; }

private:
    using Group = std::array<std::uint32_t, 8>;

    std::uint64_t tag_of(FamPage page) const;

    AcmLayout layout_;
    std::size_t sets_;
    std::uint64_t group_;
    unsigned tag_bits_;
    SetAssocLru<std::uint64_t, Group> wide_;
    SetAssocLru<std::uint64_t, std::uint32_t> narrow_;
    AcmCacheCounters counters_;
};

struct CombinedEntry {
    std::uint64_t fam_page = 0;
    std::uint32_t acm = 0;
};

/// I-FAM STU cache: node page -> (FAM page, ACM).
class CombinedCache {
public:
    CombinedCache(std::size_t entries, std::size_t ways) : cache_(entries / ways, ways) {}

    std::size_t sets() const { return cache_.sets(); }
    std::optional<CombinedEntry> lookup(NodePage page);
    void install(NodePage page, CombinedEntry entry);
    void invalidate(FamPage first, std::uint64_t count);

    const AcmCacheCounters& counters() const { return counters_; }

private:
    SetAssocLru<std::uint64_t, CombinedEntry> cache_;
    std::unordered_map<std::uint64_t, std::uint64_t> by_fam_; // fam page -> node page
    AcmCacheCounters counters_;
};

/// MSHR-style merging of FAM page-table walks for the same node page, with
/// a bound on distinct walks in flight. Excess walks wait in FIFO order.
class WalkCoalescer {
public:
    enum class Join { Started, Merged, Queued };

    explicit WalkCoalescer(std::size_t max_walks = 8) : max_walks_(max_walks) {}

    Join request(std::uint64_t node_page, std::uint32_t flow);
    /// Finishes the walk and returns every flow waiting on it.
    std::vector<std::uint32_t> complete(std::uint64_t node_page);
    /// Next queued walk allowed to start, if a slot is free.
    std::optional<std::uint64_t> next_start();

    std::size_t active() const { return active_; }
    std::uint64_t merged() const { return merged_; }

private:
    struct Walk {
        bool started = false;
        std::vector<std::uint32_t> waiters;
    };

    std::size_t max_walks_;
    std::size_t active_ = 0;
    std::uint64_t merged_ = 0;
    std::unordered_map<std::uint64_t, Walk> walks_;
    std::deque<std::uint64_t> queued_;
};

enum class StuMode : std::uint8_t { Indirect, DeactWide, DeactNarrow };

struct StuConfig {
    StuMode mode = StuMode::DeactNarrow;
    std::size_t entries = 1024;
    std::size_t ways = 8;
    unsigned acm_bits = 16;
    unsigned pairs_per_way = 2;
    std::size_t max_walks = 8;
    std::size_t oml_capacity = 128;
};

struct StuCounters {
    std::uint64_t verifications = 0;
    std::uint64_t allowed = 0;
    std::array<std::uint64_t, kDenyReasons> denied{};
    std::uint64_t walks = 0;
    std::uint64_t walk_reads = 0;
    std::uint64_t acm_reads = 0;
    std::uint64_t acm_merges = 0;
    std::uint64_t bitmap_reads = 0;
    std::uint64_t on_demand = 0;
    std::uint64_t mapping_responses = 0;
    /// Requests naming a node address outside the FAM zone (dropped).
    std::uint64_t dropped = 0;

    std::uint64_t denials() const { return denied[0] + denied[1] + denied[2] + denied[3]; }
};

struct FamAccess {
    RequestClass cls;
    FamAddr addr;

    friend bool operator==(const FamAccess&, const FamAccess&) = default;
};

struct VerifyResult {
    Verdict verdict;
    std::vector<FamAccess> accesses;
};

/// System translation unit for one node. The engine sequences its timing;
/// this class owns the caches, the walk coalescer, the I-FAM outstanding
/// mapping list and the counters.
class Stu {
public:
    Stu(const StuConfig& config, NodeId node);

    const StuConfig& config() const { return config_; }
    NodeId node() const { return node_; }

    AcmCache& acm_cache() { return *acm_; }
    const AcmCache* acm_cache_if() const { return acm_ ? &*acm_ : nullptr; }
    CombinedCache& combined() { return *combined_; }
    const CombinedCache* combined_if() const { return combined_ ? &*combined_ : nullptr; }
    WalkCoalescer& coalescer() { return coalescer_; }
    const WalkCoalescer& coalescer() const { return coalescer_; }
    OutstandingMappingList& oml() { return oml_; }
    StuCounters& counters() { return counters_; }
    const StuCounters& counters() const { return counters_; }

    /// ACM fetches in flight, keyed by AcmCache::fill_key.
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>>& acm_inflight() { return acm_inflight_; }

    /// Broker listener hook: drops cached ACM state for changed pages.
    void invalidate(FamPage first, std::uint64_t count);

    void count(const Verdict& v);

    /// Zero-latency DeACT verification (V=1 path): same cache behaviour as
    /// the timed path, with fills applied immediately.
    VerifyResult verify(FamAddr addr, AccessKind kind, const Broker& broker);

    /// Zero-latency walk of node's FAM page table. Backs the page on demand.
    /// Returns the FAM page and the four table reads.
    std::pair<FamPage, std::vector<FamAccess>> service_walk(NodePage page, Broker& broker);

    /// Zero-latency I-FAM translation of a node address.
    VerifyResult ifam_translate(NodePhysAddr addr, AccessKind kind, Broker& broker, FamAddr* out = nullptr);

private:
    Verdict finish_check(FamAddr addr, std::uint32_t raw, AccessKind kind, const Broker& broker,
                         std::vector<FamAccess>& accesses);

    StuConfig config_;
    NodeId node_;
    std::optional<AcmCache> acm_;
    std::optional<CombinedCache> combined_;
    WalkCoalescer coalescer_;
    OutstandingMappingList oml_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> acm_inflight_;
    StuCounters counters_;
};

} // namespace deact
