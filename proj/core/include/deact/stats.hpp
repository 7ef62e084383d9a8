#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deact/common.hpp"

namespace deact {

// X-macro list of raw counters. The order is the CSV column order.
#define DEACT_COUNTERS(X)                                                                          \
    X(events)                                                                                      \
    X(reads)                                                                                       \
    X(writes)                                                                                      \
    X(executes)                                                                                    \
    X(local_demands)                                                                               \
    X(fam_demands)                                                                                 \
    X(tlb_l1_hits)                                                                                 \
    X(tlb_l2_hits)                                                                                 \
    X(tlb_misses)                                                                                  \
    X(walks)                                                                                       \
    X(walk_accesses)                                                                               \
    X(faults)                                                                                      \
    X(translator_lookups)                                                                          \
    X(translator_hits)                                                                             \
    X(translator_misses)                                                                           \
    X(translator_pending_joins)                                                                    \
    X(translator_updates)                                                                          \
    X(translator_evictions)                                                                        \
    X(translator_dram_reads)                                                                       \
    X(translator_dram_writes)                                                                      \
    X(oml_stalls)                                                                                  \
    X(stu_acm_hits)                                                                                \
    X(stu_acm_misses)                                                                              \
    X(stu_acm_merges)                                                                              \
    X(stu_combined_hits)                                                                           \
    X(stu_combined_misses)                                                                         \
    X(stu_verifications)                                                                           \
    X(stu_walks)                                                                                   \
    X(stu_walks_merged)                                                                            \
    X(stu_walk_reads)                                                                              \
    X(stu_acm_reads)                                                                               \
    X(stu_bitmap_reads)                                                                            \
    X(stu_mapping_responses)                                                                       \
    X(stu_on_demand)                                                                               \
    X(stu_dropped)                                                                                 \
    X(stu_invalidations)                                                                           \
    X(allowed)                                                                                     \
    X(denied_not_owner)                                                                            \
    X(denied_not_in_bitmap)                                                                        \
    X(denied_insufficient_perm)                                                                    \
    X(denied_unallocated)                                                                          \
    X(fam_demand)                                                                                  \
    X(fam_at_walk)                                                                                 \
    X(fam_at_acm)                                                                                  \
    X(fam_at_bitmap)                                                                               \
    X(fam_reads)                                                                                   \
    X(fam_writes)                                                                                  \
    X(fam_admitted)                                                                                \
    X(fam_completed)                                                                               \
    X(fam_admission_waits)                                                                         \
    X(local_reads)                                                                                 \
    X(local_writes)                                                                                \
    X(local_admitted)                                                                              \
    X(local_completed)                                                                             \
    X(fabric_messages)                                                                             \
    X(fabric_queue_ps)                                                                             \
    X(allocations)                                                                                 \
    X(local_pages)                                                                                 \
    X(fam_pages)                                                                                   \
    X(alloc_fallbacks)                                                                             \
    X(alloc_acm_writes)

enum class Counter : std::size_t {
#define DEACT_ENUM(name) name,
    DEACT_COUNTERS(DEACT_ENUM)
#undef DEACT_ENUM
        kCount
};

inline constexpr std::size_t kCounterCount = static_cast<std::size_t>(Counter::kCount);

std::string_view counter_name(Counter c);

class Counters {
public:
    std::uint64_t& operator[](Counter c) { return values_[static_cast<std::size_t>(c)]; }
    std::uint64_t operator[](Counter c) const { return values_[static_cast<std::size_t>(c)]; }

    Counters& operator+=(const Counters& o);
    Counters& operator-=(const Counters& o);
    friend bool operator==(const Counters&, const Counters&) = default;

    const std::array<std::uint64_t, kCounterCount>& values() const { return values_; }

private:
    std::array<std::uint64_t, kCounterCount> values_{};
};

/// Result of one run. Rates are derived from the raw counters on demand;
/// nullopt means the denominator is zero (the metric does not apply).
struct SimStats {
    std::string scheme;
    std::uint64_t seed = 0;
    /// Measured window: from the end of warmup to the last retired event.
    Tick measured_ticks = 0;
    Tick total_ticks = 0;
    Counters total;
    std::vector<Counters> per_node;

    double ns() const { return ticks_to_ns(measured_ticks); }
    double total_ns() const { return ticks_to_ns(total_ticks); }

    std::uint64_t operator[](Counter c) const { return total[c]; }

    std::uint64_t fam_requests() const;
    std::uint64_t at_requests() const;

    /// Translator hit rate under DeACT, combined-cache hit rate under I-FAM.
    std::optional<double> translation_hit_rate() const;
    /// STU ACM hit rate (DeACT); the combined cache carries ACM under I-FAM.
    std::optional<double> acm_hit_rate() const;
    std::optional<double> at_fraction() const;
    std::optional<double> tlb_hit_rate() const;
};

std::optional<double> ratio(std::uint64_t num, std::uint64_t den);

} // namespace deact
