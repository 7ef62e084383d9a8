#include "deact/broker.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace deact {

std::string_view to_string(Placement p)
{
    return p == Placement::Random ? "random" : "first_fit";
}

Broker::Broker(const BrokerConfig& config)
    : config_(config),
      layout_(make_region_layout(config.fam_capacity, config.acm_bits, config.shared_region_bytes)),
      format_(config.acm_bits),
      rng_(mix_seed(config.seed, 0xb40e)),
      fam_used_(layout_.total_pages(), false)
{
    if (config_.local_reserved > config_.view.local_size)
        throw ConfigError("translation cache does not fit in local memory");
    local_pages_ = (config_.view.local_size - config_.local_reserved) >> kPageShift;
    famzone_first_ = config_.view.local_size >> kPageShift;
    famzone_end_ = config_.view.end() >> kPageShift;

    // Page 0 is never handed out; metadata pages are permanently in use.
    fam_used_[0] = true;
    for (std::uint64_t p = layout_.allocatable_pages(); p < fam_used_.size(); ++p)
        fam_used_[p] = true;

    nodes_.resize(config_.nodes);
    for (auto& st : nodes_)
        st.next_famzone = famzone_first_;
    if (!config_.direct_fam) {
        fam_tables_.reserve(config_.nodes);
        for (unsigned n = 0; n < config_.nodes; ++n) {
            auto root = take_fam();
            if (!root)
                throw OutOfMemory("no FAM page left for a FAM page-table root");
            ++counters_.fam_table_pages;
            fam_tables_.emplace_back(PageLoc{PageSpace::Fam, root->value});
        }
    }
}

bool Broker::route_local(NodeState& st)
{
    const std::uint64_t k = ++st.counter;
    const double f = config_.local_fraction;
    return std::floor(static_cast<double>(k) * f) > std::floor(static_cast<double>(k - 1) * f);
}

std::optional<std::uint64_t> Broker::take_local(NodeState& st)
{
    if (!st.free_local.empty()) {
        const auto p = st.free_local.back();
        st.free_local.pop_back();
        return p;
    }
    if (st.next_local < local_pages_)
        return st.next_local++;
    return std::nullopt;
}

std::optional<std::uint64_t> Broker::take_famzone(NodeId node, NodeState& st)
{
    if (!st.free_famzone.empty()) {
        const auto p = st.free_famzone.back();
        st.free_famzone.pop_back();
        return p;
    }
    const RadixPageTable* table = config_.direct_fam ? nullptr : &fam_tables_[node];
    while (st.next_famzone < famzone_end_) {
        const std::uint64_t p = st.next_famzone++;
        // Skip pages an STU walk already backed on demand.
        if (table == nullptr || !table->is_mapped(p))
            return p;
    }
    return std::nullopt;
}

std::optional<FamPage> Broker::take_fam()
{
    const std::uint64_t limit = layout_.allocatable_pages();
    if (limit <= 1)
        return std::nullopt;
    auto claim = [&](std::uint64_t p) {
        fam_used_[p] = true;
        return FamPage{p};
    };
    if (config_.placement == Placement::FirstFit) {
        for (std::uint64_t p = fam_cursor_; p < limit; ++p)
            if (!fam_used_[p]) {
                fam_cursor_ = p + 1;
                return claim(p);
            }
        for (std::uint64_t p = 1; p < fam_cursor_ && p < limit; ++p)
            if (!fam_used_[p])
                return claim(p);
        return std::nullopt;
    }
    for (int tries = 0; tries < 64; ++tries) {
        const std::uint64_t p = 1 + rng_.below(limit - 1);
        if (!fam_used_[p])
            return claim(p);
    }
    const std::uint64_t start = 1 + rng_.below(limit - 1);
    for (std::uint64_t i = 0; i < limit - 1; ++i) {
        const std::uint64_t p = 1 + (start - 1 + i) % (limit - 1);
        if (!fam_used_[p])
            return claim(p);
    }
    return std::nullopt;
}

void Broker::write_acm(FamPage page, std::uint32_t raw)
{
    if (raw == 0)
        acm_.erase(page.value);
    else
        acm_[page.value] = raw;
    if (listener_)
        listener_(page, 1);
}

Allocation Broker::back_with_fam(NodeId node, std::uint64_t node_page)
{
    auto fam = take_fam();
    if (!fam)
        throw OutOfMemory(fmt::format("FAM exhausted while backing node {} page {:#x}", node, node_page));
    try {
        fam_tables_[node].map(node_page, PageLoc{PageSpace::Fam, fam->value}, [this] {
            auto t = take_fam();
            if (!t)
                throw OutOfMemory("FAM exhausted while growing a FAM page table");
            ++counters_.fam_table_pages;
            return PageLoc{PageSpace::Fam, t->value};
        });
    } catch (const OutOfMemory&) {
        // Table pages already added stay in the table; the data page goes back.
        fam_used_[fam->value] = false;
        throw;
    }
    Allocation a;
    a.loc = PageLoc{PageSpace::Node, node_page};
    a.fam_page = fam;
    if (config_.maintain_acm) {
        write_acm(*fam, format_.owned(node, Perm::RWX));
        ++counters_.acm_writes;
        a.acm_written = true;
    }
    return a;
}

Allocation Broker::allocate_page(NodeId node, PageRole role)
{
    NodeState& st = nodes_.at(node);
    const bool split = role == PageRole::Data || config_.direct_fam || config_.tables_follow_split;
    const bool want_local = split ? route_local(st) : true;

    for (int attempt = 0; attempt < 2; ++attempt) {
        const bool local = (attempt == 0) == want_local;
        std::optional<Allocation> got;
        if (local) {
            if (auto p = take_local(st)) {
                got = Allocation{PageLoc{PageSpace::Node, *p}, std::nullopt, false, false};
                ++counters_.local_pages;
            }
        } else if (config_.direct_fam) {
            if (auto f = take_fam()) {
                got = Allocation{PageLoc{PageSpace::Fam, f->value}, f, false, false};
                if (config_.maintain_acm) {
                    write_acm(*f, format_.owned(node, Perm::RWX));
                    ++counters_.acm_writes;
                    got->acm_written = true;
                }
                ++counters_.fam_pages;
            }
        } else if (auto np = take_famzone(node, st)) {
            try {
                got = back_with_fam(node, *np);
                ++counters_.fam_pages;
            } catch (const OutOfMemory&) {
                st.free_famzone.push_back(*np); // FAM is full: try the local zone
            }
        }
        if (got) {
            got->fell_back = attempt == 1;
            counters_.fallbacks += attempt;
            ++counters_.allocations;
            return *got;
        }
    }
    throw OutOfMemory(fmt::format("node {}: both local and FAM zones exhausted", node));
}

PageLoc Broker::allocate_table_page(NodeId node)
{
    return allocate_page(node, PageRole::Table).loc;
}

Allocation Broker::allocate_on_demand(NodeId node, NodePage page)
{
    if (config_.direct_fam)
        throw std::logic_error("on-demand FAM backing is meaningless without a FAM page table");
    if (page.value < famzone_first_ || page.value >= famzone_end_)
        throw std::invalid_argument(fmt::format("node page {:#x} is not in the FAM zone", page.value));
    if (fam_tables_.at(node).is_mapped(page.value))
        throw std::logic_error("allocate_on_demand on a mapped page");
    auto a = back_with_fam(node, page.value);
    ++counters_.on_demand;
    ++counters_.fam_pages;
    ++counters_.allocations;
    return a;
}

PageLoc Broker::map_shared(NodeId node, FamPage fam_page)
{
    bool inside = false;
    for (const auto& r : shared_)
        inside = inside || r.contains(fam_page);
    if (!inside)
        throw std::invalid_argument(fmt::format("FAM page {:#x} is not in a shared region", fam_page.value));
    if (config_.direct_fam)
        return PageLoc{PageSpace::Fam, fam_page.value};

    NodeState& st = nodes_.at(node);
    if (auto it = st.shared_map.find(fam_page.value); it != st.shared_map.end())
        return PageLoc{PageSpace::Node, it->second};
    auto np = take_famzone(node, st);
    if (!np)
        throw OutOfMemory(fmt::format("node {}: FAM zone exhausted mapping a shared page", node));
    fam_tables_[node].map(*np, PageLoc{PageSpace::Fam, fam_page.value}, [this] {
        auto t = take_fam();
        if (!t)
            throw OutOfMemory("FAM exhausted while growing a FAM page table");
        ++counters_.fam_table_pages;
        return PageLoc{PageSpace::Fam, t->value};
    });
    st.shared_map.emplace(fam_page.value, *np);
    return PageLoc{PageSpace::Node, *np};
}

void Broker::set_bitmap_bit(std::uint64_t region, NodeId node)
{
    auto& words = bitmaps_[region];
    if (words.empty())
        words.assign(kBitmapBytesPerRegion * 8 / 64, 0);
    words[node / 64] |= std::uint64_t{1} << (node % 64);
}

SharedRegion Broker::create_shared_region(const std::vector<NodeId>& members, Perm perm)
{
    if (perm == Perm::None)
        throw std::invalid_argument("shared region needs a non-empty permission");
    for (NodeId n : members)
        if (n >= format_.max_nodes())
            throw std::invalid_argument(fmt::format("node id {} exceeds the ACM owner field", n));

    const std::uint64_t pages = config_.shared_region_bytes >> kPageShift;
    const std::uint64_t regions = layout_.allocatable_pages() / pages;
    for (std::uint64_t r = regions; r-- > 0;) {
        const std::uint64_t first = r * pages;
        if (first == 0)
            break; // region 0 holds the reserved page 0
        bool free = true;
        for (std::uint64_t p = first; p < first + pages && free; ++p)
            free = !fam_used_[p];
        if (!free)
            continue;

        const std::uint32_t raw = format_.shared(perm);
        for (std::uint64_t p = first; p < first + pages; ++p) {
            fam_used_[p] = true;
            acm_[p] = raw;
        }
        for (NodeId n : members)
            set_bitmap_bit(r, n);
        if (listener_)
            listener_(FamPage{first}, pages);

        SharedRegion region{FamPage{first}.base(), pages, members, perm};
        shared_.push_back(region);
        return region;
    }
    throw OutOfMemory("no free region-aligned FAM extent for a shared region");
}

void Broker::release_page(NodeId node, NodePage page)
{
    if (config_.direct_fam || node >= nodes_.size())
        throw std::invalid_argument("release_page needs a FAM-zone page of a known node");
    auto fam = fam_translate(node, page);
    if (!fam)
        throw std::invalid_argument(fmt::format("node {} releasing unmapped page {:#x}", node, page.value));
    const auto decoded = format_.decode(acm(*fam));
    const auto* owned = std::get_if<AcmOwned>(&decoded);
    if (owned == nullptr || owned->node != node)
        throw std::invalid_argument(fmt::format("node {} does not own page {:#x}", node, page.value));

    write_acm(*fam, 0);
    fam_tables_[node].unmap(page.value);
    fam_used_[fam->value] = false;
    nodes_[node].free_famzone.push_back(page.value);
    ++counters_.releases;
}

std::optional<FamPage> Broker::fam_translate(NodeId node, NodePage page) const
{
    if (config_.direct_fam || node >= fam_tables_.size())
        return std::nullopt;
    auto loc = fam_tables_[node].lookup(page.value);
    if (!loc)
        return std::nullopt;
    return FamPage{loc->page};
}

std::uint32_t Broker::acm(FamPage page) const
{
    auto it = acm_.find(page.value);
    return it == acm_.end() ? 0 : it->second;
}

bool Broker::bitmap_bit(FamPage page, NodeId node) const
{
    const std::uint64_t region = page.base().value / config_.shared_region_bytes;
    auto it = bitmaps_.find(region);
    if (it == bitmaps_.end() || node >= kBitmapBytesPerRegion * 8)
        return false;
    return (it->second[node / 64] >> (node % 64)) & 1;
}

} // namespace deact
