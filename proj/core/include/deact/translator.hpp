#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "deact/address.hpp"
#include "deact/common.hpp"

namespace deact {

inline constexpr std::size_t kTranslationWays = 4;

/// Node-page to FAM-page cache kept in a reserved slice of local DRAM. One
/// 64-byte set holds four (52-bit tag, 52-bit value) entries. Replacement is
/// random, since recency state would cost extra DRAM traffic.
class TranslationCache {
public:
    TranslationCache(std::uint64_t base, std::uint64_t capacity_bytes, std::uint64_t seed);

    std::uint64_t sets() const { return sets_; }
    std::uint64_t base() const { return base_; }
    std::uint64_t set_index(NodePage page) const { return page.value % sets_; }
    /// Local DRAM byte address of the set holding `page`.
    NodePhysAddr set_address(NodePage page) const { return NodePhysAddr{base_ + set_index(page) * kBlockSize}; }

    /// Tag compare over the four ways of the set. FAM page 0 doubles as the
    /// miss output, so a stored value of 0 never hits.
    std::optional<FamPage> probe(NodePage page) const;

    /// Installs page -> fam. Free ways are used first; otherwise a random way
    /// is replaced and its tag returned.
    std::optional<NodePage> install(NodePage page, FamPage fam);

    std::size_t occupancy() const;

private:
    struct Entry {
        std::uint64_t tag = 0;
        std::uint64_t value = 0; ///< 0 = empty
    };

    std::uint64_t base_;
    std::uint64_t sets_;
    Rng rng_;
    std::vector<Entry> entries_;
};

/// Bounded FAM page -> node page list used to re-address FAM responses. A
/// request first reserves a slot (stalling when none is free) and binds its
/// mapping once the FAM page is known.
class OutstandingMappingList {
public:
    explicit OutstandingMappingList(std::size_t capacity = 128) : capacity_(capacity) {}

    std::size_t capacity() const { return capacity_; }
    std::size_t in_use() const { return in_use_; }
    bool full() const { return in_use_ >= capacity_; }

    bool reserve();
    /// Frees a reserved slot that was never bound (e.g. the request was denied).
    void release_reserved();
    void bind(FamPage fam, NodePage node);

    /// Re-addresses a response and consumes its entry. Throws
    /// ProtocolViolation when no entry exists.
    NodePhysAddr map_response(FamAddr addr);
    /// Consumes a bound entry without a response (request denied after binding).
    void cancel(FamPage fam);

    std::size_t bound() const { return bound_; }

private:
    struct Binding {
        std::uint64_t node_page;
        std::uint32_t refs;
    };

    std::size_t capacity_;
    std::size_t in_use_ = 0;
    std::size_t bound_ = 0;
    std::unordered_map<std::uint64_t, Binding> map_;
};

/// Translation misses in flight, keyed by node page. The first miss goes to
/// the STU; later misses on the same page wait here. Once the mapping is
/// known the entry is resolved, and it is erased after the cache update.
class PendingMissQueue {
public:
    struct Entry {
        std::optional<FamPage> resolved;
        std::vector<std::uint32_t> waiters;
    };

    Entry* find(NodePage page);
    Entry& open(NodePage page);
    /// Records the mapping and hands back the waiters, exactly once.
    std::vector<std::uint32_t> resolve(NodePage page, FamPage fam);
    void erase(NodePage page) { map_.erase(page.value); }

    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<std::uint64_t, Entry> map_;
};

struct TranslatorCounters {
    std::uint64_t lookups = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    /// Misses that found a walk for the same page already in flight.
    std::uint64_t pending_joins = 0;
    std::uint64_t updates = 0;
    std::uint64_t evictions = 0;
    std::uint64_t dram_reads = 0;
    std::uint64_t dram_writes = 0;
    std::uint64_t oml_stalls = 0;
};

/// What leaves the translator: V=1 with a FAM address or V=0 with the
/// untouched node address.
struct TranslatorOutput {
    bool v = false;
    FamAddr fam;
    NodePhysAddr node;
};

/// DeACT node-side unit: translation cache, outstanding mapping list and
/// pending misses. Timing lives in the engine; this class holds the state
/// and the functional decisions.
class FamTranslator {
public:
    FamTranslator(std::uint64_t cache_base, std::uint64_t cache_bytes, std::uint64_t seed,
                  std::size_t oml_capacity = 128)
        : cache_(cache_base, cache_bytes, seed), oml_(oml_capacity)
    {
    }

    TranslationCache& cache() { return cache_; }
    const TranslationCache& cache() const { return cache_; }
    OutstandingMappingList& oml() { return oml_; }
    PendingMissQueue& pending() { return pending_; }
    TranslatorCounters& counters() { return counters_; }
    const TranslatorCounters& counters() const { return counters_; }

    /// Tag compare after the set read. Counts one DRAM read.
    TranslatorOutput translate(NodePhysAddr addr);

    /// Read-modify-write of the set for a walked mapping. Counts one DRAM
    /// read and one write.
    void handle_mapping_response(NodePage page, FamPage fam);

private:
    TranslationCache cache_;
    OutstandingMappingList oml_;
    PendingMissQueue pending_;
    TranslatorCounters counters_;
};

} // namespace deact
