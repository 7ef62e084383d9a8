#include "deact/stats.hpp"

namespace deact {

namespace {

constexpr std::string_view kNames[] = {
#define DEACT_NAME(name) #name,
    DEACT_COUNTERS(DEACT_NAME)
#undef DEACT_NAME
};

static_assert(std::size(kNames) == kCounterCount);

} // namespace

std::string_view counter_name(Counter c)
{
    return kNames[static_cast<std::size_t>(c)];
}

Counters& Counters::operator+=(const Counters& o)
{
    for (std::size_t i = 0; i < kCounterCount; ++i)
        values_[i] += o.values_[i];
    return *this;
}

Counters& Counters::operator-=(const Counters& o)
{
    for (std::size_t i = 0; i < kCounterCount; ++i)
        values_[i] -= o.values_[i];
    return *this;
}

std::optional<double> ratio(std::uint64_t num, std::uint64_t den)
{
    if (den == 0)
        return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::uint64_t SimStats::fam_requests() const
{
    return total[Counter::fam_demand] + at_requests();
}

std::uint64_t SimStats::at_requests() const
{
    return total[Counter::fam_at_walk] + total[Counter::fam_at_acm] + total[Counter::fam_at_bitmap];
}

std::optional<double> SimStats::translation_hit_rate() const
{
    if (total[Counter::translator_lookups] > 0)
        return ratio(total[Counter::translator_hits], total[Counter::translator_lookups]);
    return ratio(total[Counter::stu_combined_hits],
                 total[Counter::stu_combined_hits] + total[Counter::stu_combined_misses]);
}

std::optional<double> SimStats::acm_hit_rate() const
{
    const std::uint64_t acm = total[Counter::stu_acm_hits] + total[Counter::stu_acm_misses];
    if (acm > 0)
        return ratio(total[Counter::stu_acm_hits], acm);
    return ratio(total[Counter::stu_combined_hits],
                 total[Counter::stu_combined_hits] + total[Counter::stu_combined_misses]);
}

std::optional<double> SimStats::at_fraction() const
{
    return ratio(at_requests(), fam_requests());
}

std::optional<double> SimStats::tlb_hit_rate() const
{
    const std::uint64_t hits = total[Counter::tlb_l1_hits] + total[Counter::tlb_l2_hits];
    return ratio(hits, hits + total[Counter::tlb_misses]);
}

} // namespace deact
