#include "deact/stu.hpp"

#include <stdexcept>

#include "deact/layout.hpp"

namespace deact {

std::string_view to_string(DenyReason r)
{
    switch (r) {
    case DenyReason::NotOwner: return "not_owner";
    case DenyReason::NotInBitmap: return "not_in_bitmap";
    case DenyReason::InsufficientPerm: return "insufficient_perm";
    case DenyReason::Unallocated: return "unallocated";
    }
    return "?";
}

AcmDecision decide_acm(const AcmFormat& format, std::uint32_t raw, NodeId node, AccessKind kind)
{
    AcmDecision d;
    const AcmDecoded decoded = format.decode(raw);
    if (std::holds_alternative<AcmUnallocated>(decoded)) {
        d.verdict = Verdict::denied(DenyReason::Unallocated);
    } else if (const auto* owned = std::get_if<AcmOwned>(&decoded)) {
        if (owned->node != node)
            d.verdict = Verdict::denied(DenyReason::NotOwner);
        else if (!permits(owned->perm, kind))
            d.verdict = Verdict::denied(DenyReason::InsufficientPerm);
    } else {
        d.need_bitmap = true;
        d.shared_perm = std::get<AcmShared>(decoded).perm;
    }
    return d;
}

Verdict decide_shared(bool member, Perm perm, AccessKind kind)
{
    if (!member)
        return Verdict::denied(DenyReason::NotInBitmap);
    if (!permits(perm, kind))
        return Verdict::denied(DenyReason::InsufficientPerm);
    return Verdict::allowed();
}

namespace {

unsigned narrow_tag_bits(unsigned pairs)
{
    switch (pairs) {
    case 1: return 52;
    case 2: return 44;
    case 3: return 32;
    }
    throw std::invalid_argument("pairs_per_way must be 1, 2 or 3");
}

std::size_t checked_sets(std::size_t entries, std::size_t ways)
{
    if (ways == 0 || entries == 0 || entries % ways != 0)
        throw std::invalid_argument("STU ways must divide STU entries");
    return entries / ways;
}

} // namespace

AcmCache::AcmCache(AcmLayout layout, std::size_t entries, std::size_t ways, unsigned acm_bits,
                   unsigned pairs_per_way)
    : layout_(layout),
      sets_(checked_sets(entries, ways)),
      group_(64 / acm_bits),
      tag_bits_(layout == AcmLayout::Wide ? 52 : narrow_tag_bits(pairs_per_way)),
      wide_(layout == AcmLayout::Wide ? sets_ : 1, layout == AcmLayout::Wide ? ways : 1),
      narrow_(layout == AcmLayout::Narrow ? sets_ : 1, layout == AcmLayout::Narrow ? ways * pairs_per_way : 1)
{
    if (acm_bits != 8 && acm_bits != 16 && acm_bits != 32)
        throw std::invalid_argument("acm_bits must be 8, 16 or 32");
}

std::uint64_t AcmCache::reach_pages() const
{
    return layout_ == AcmLayout::Wide ? wide_.capacity() * group_ : narrow_.capacity();
}

std::size_t AcmCache::set_of(FamPage page) const
{
    return layout_ == AcmLayout::Wide ? (page.value / group_) % sets_ : page.value % sets_;
}

std::uint64_t AcmCache::fill_key(FamPage page) const
{
    return layout_ == AcmLayout::Wide ? page.value / group_ : page.value;
}

std::uint64_t AcmCache::tag_of(FamPage page) const
{
    if (layout_ == AcmLayout::Wide)
        return page.value / group_;
    return tag_bits_ >= 64 ? page.value : page.value & ((std::uint64_t{1} << tag_bits_) - 1);
}

std::optional<std::uint32_t> AcmCache::lookup(FamPage page)
{
    const std::size_t set = set_of(page);
    if (layout_ == AcmLayout::Wide) {
        if (const Group* g = wide_.find(set, tag_of(page))) {
            ++counters_.hits;
            return (*g)[page.value % group_];
        }
    } else if (const std::uint32_t* v = narrow_.find(set, tag_of(page))) {
        ++counters_.hits;
        return *v;
    }
    ++counters_.misses;
    return std::nullopt;
}

void AcmCache::fill(FamPage page, const Broker& broker)
{
    ++counters_.fills;
    const std::size_t set = set_of(page);
    if (layout_ == AcmLayout::Wide) {
        Group g{};
        const std::uint64_t first = page.value / group_ * group_;
        for (std::uint64_t i = 0; i < group_; ++i)
            g[i] = broker.acm(FamPage{first + i});
        wide_.insert(set, tag_of(page), g);
    } else {
        narrow_.insert(set, tag_of(page), broker.acm(page));
    }
}

void AcmCache::invalidate(FamPage first, std::uint64_t count)
{
    const std::uint64_t lo = first.value;
    const std::uint64_t hi = first.value + count;
    if (count <= kTargetedInvalidation) {
        // Few pages (the allocation path): probe their sets directly.
        for (std::uint64_t p = lo; p < hi; ++p) {
            const FamPage page{p};
            const bool hit = layout_ == AcmLayout::Wide ? wide_.erase(set_of(page), tag_of(page))
                                                        : narrow_.erase(set_of(page), tag_of(page));
            counters_.invalidations += hit ? 1 : 0;
        }
        return;
    }
    if (layout_ == AcmLayout::Wide) {
        const std::uint64_t g = group_;
        counters_.invalidations += wide_.erase_if(
            [&](std::uint64_t key, const Group&) { return key * g < hi && key * g + g > lo; });
    } else {
        counters_.invalidations +=
            narrow_.erase_if([&](std::uint64_t key, std::uint32_t) { return key >= lo && key < hi; });
    }
}

std::optional<CombinedEntry> CombinedCache::lookup(NodePage page)
{
    if (const CombinedEntry* e = cache_.find(page.value % cache_.sets(), page.value)) {
        ++counters_.hits;
        return *e;
    }
    ++counters_.misses;
    return std::nullopt;
}

void CombinedCache::install(NodePage page, CombinedEntry entry)
{
    ++counters_.fills;
    if (const CombinedEntry* old = cache_.peek(page.value % cache_.sets(), page.value))
        by_fam_.erase(old->fam_page);
    if (auto evicted = cache_.insert(page.value % cache_.sets(), page.value, entry))
        by_fam_.erase(evicted->second.fam_page);
    by_fam_[entry.fam_page] = page.value;
}

void CombinedCache::invalidate(FamPage first, std::uint64_t count)
{
    const std::uint64_t lo = first.value;
    const std::uint64_t hi = first.value + count;
    if (count <= kTargetedInvalidation) {
        for (std::uint64_t p = lo; p < hi; ++p) {
            auto it = by_fam_.find(p);
            if (it == by_fam_.end())
                continue;
            cache_.erase(it->second % cache_.sets(), it->second);
            by_fam_.erase(it);
            ++counters_.invalidations;
        }
        return;
    }
    counters_.invalidations += cache_.erase_if([&](std::uint64_t, const CombinedEntry& e) {
        if (e.fam_page < lo || e.fam_page >= hi)
            return false;
        by_fam_.erase(e.fam_page);
        return true;
    });
}

WalkCoalescer::Join WalkCoalescer::request(std::uint64_t node_page, std::uint32_t flow)
{
    if (auto it = walks_.find(node_page); it != walks_.end()) {
        it->second.waiters.push_back(flow);
        ++merged_;
        return Join::Merged;
    }
    Walk& w = walks_[node_page];
    w.waiters.push_back(flow);
    if (active_ < max_walks_) {
        w.started = true;
        ++active_;
        return Join::Started;
    }
    queued_.push_back(node_page);
    return Join::Queued;
}

std::vector<std::uint32_t> WalkCoalescer::complete(std::uint64_t node_page)
{
    auto it = walks_.find(node_page);
    if (it == walks_.end() || !it->second.started)
        throw ProtocolViolation("completing a walk that was never started");
    std::vector<std::uint32_t> waiters = std::move(it->second.waiters);
    walks_.erase(it);
    --active_;
    return waiters;
}

std::optional<std::uint64_t> WalkCoalescer::next_start()
{
    if (active_ >= max_walks_ || queued_.empty())
        return std::nullopt;
    const std::uint64_t page = queued_.front();
    queued_.pop_front();
    walks_.at(page).started = true;
    ++active_;
    return page;
}

Stu::Stu(const StuConfig& config, NodeId node)
    : config_(config), node_(node), coalescer_(config.max_walks), oml_(config.oml_capacity)
{
    switch (config.mode) {
    case StuMode::Indirect: combined_.emplace(config.entries, config.ways); break;
    case StuMode::DeactWide:
        acm_.emplace(AcmLayout::Wide, config.entries, config.ways, config.acm_bits, config.pairs_per_way);
        break;
    case StuMode::DeactNarrow:
        acm_.emplace(AcmLayout::Narrow, config.entries, config.ways, config.acm_bits, config.pairs_per_way);
        break;
    }
}

void Stu::invalidate(FamPage first, std::uint64_t count)
{
    if (acm_)
        acm_->invalidate(first, count);
    if (combined_)
        combined_->invalidate(first, count);
}

void Stu::count(const Verdict& v)
{
    if (v.allow)
        ++counters_.allowed;
    else
        ++counters_.denied[static_cast<std::size_t>(v.reason)];
}

Verdict Stu::finish_check(FamAddr addr, std::uint32_t raw, AccessKind kind, const Broker& broker,
                          std::vector<FamAccess>& accesses)
{
    const AcmDecision d = decide_acm(broker.acm_format(), raw, node_, kind);
    Verdict v = d.verdict;
    if (d.need_bitmap) {
        const auto& layout = broker.layout();
        const BitmapProbe probe = bitmap_probe(layout.bitmap_base, addr, node_, layout.region_bytes);
        accesses.push_back(FamAccess{RequestClass::AtBitmap, probe.block_addr});
        ++counters_.bitmap_reads;
        v = decide_shared(broker.bitmap_bit(addr.page(), node_), d.shared_perm, kind);
    }
    count(v);
    return v;
}

VerifyResult Stu::verify(FamAddr addr, AccessKind kind, const Broker& broker)
{
    if (!acm_)
        throw std::logic_error("verify needs a DeACT STU");
    ++counters_.verifications;
    VerifyResult r;
    const auto& layout = broker.layout();
    if (layout.in_metadata(addr) || addr.value >= layout.fam_capacity) {
        r.verdict = Verdict::denied(DenyReason::Unallocated);
        count(r.verdict);
        return r;
    }
    const FamPage page = addr.page();
    auto raw = acm_->lookup(page);
    if (!raw) {
        r.accesses.push_back(FamAccess{RequestClass::AtAcm,
                                       acm_block_address(layout.mt_base, addr, broker.acm_format().entries_per_block())});
        ++counters_.acm_reads;
        acm_->fill(page, broker);
        raw = broker.acm(page);
    }
    r.verdict = finish_check(addr, *raw, kind, broker, r.accesses);
    return r;
}

std::pair<FamPage, std::vector<FamAccess>> Stu::service_walk(NodePage page, Broker& broker)
{
    if (!broker.fam_translate(node_, page)) {
        broker.allocate_on_demand(node_, page);
        ++counters_.on_demand;
    }
    ++counters_.walks;
    std::vector<FamAccess> reads;
    for (const TableEntryRef& ref : broker.fam_table(node_).walk_entries(page.value))
        reads.push_back(FamAccess{RequestClass::AtWalk, FamAddr{ref.byte_address()}});
    counters_.walk_reads += reads.size();
    return {*broker.fam_translate(node_, page), std::move(reads)};
}

VerifyResult Stu::ifam_translate(NodePhysAddr addr, AccessKind kind, Broker& broker, FamAddr* out)
{
    if (!combined_)
        throw std::logic_error("ifam_translate needs an I-FAM STU");
    VerifyResult r;
    auto parts = decompose_node_address(addr, broker.config().view);
    if (!parts || parts->zone != Zone::FamZone) {
        ++counters_.dropped;
        r.verdict = Verdict::denied(DenyReason::Unallocated);
        return r;
    }
    ++counters_.verifications;
    auto entry = combined_->lookup(parts->page);
    if (!entry) {
        auto [fam, reads] = service_walk(parts->page, broker);
        r.accesses = std::move(reads);
        const FamAddr fam_addr = fam.base();
        r.accesses.push_back(FamAccess{RequestClass::AtAcm,
                                       acm_block_address(broker.layout().mt_base, fam_addr,
                                                         broker.acm_format().entries_per_block())});
        ++counters_.acm_reads;
        entry = CombinedEntry{fam.value, broker.acm(fam)};
        combined_->install(parts->page, *entry);
    }
    const FamAddr fam_addr = FamPage{entry->fam_page}.at(parts->offset);
    if (out)
        *out = fam_addr;
    r.verdict = finish_check(fam_addr, entry->acm, kind, broker, r.accesses);
    return r;
}

} // namespace deact
