#include "deact/address.hpp"

#include <stdexcept>
#include <string>

#include "deact/layout.hpp"

namespace deact {

std::optional<NodeAddrParts> decompose_node_address(NodePhysAddr addr, const NodeView& view)
{
    if (addr.value >= view.end())
        return std::nullopt;
    const Zone zone = addr.value < view.local_size ? Zone::Local : Zone::FamZone;
    return NodeAddrParts{zone, addr.page(), addr.offset()};
}

std::uint64_t RegionLayout::acm_region_bytes() const
{
    return total_pages() * acm_bits / 8;
}

std::uint64_t RegionLayout::bitmap_region_bytes() const
{
    return ceil_div(fam_capacity, region_bytes) * kBitmapBytesPerRegion;
}

RegionLayout make_region_layout(std::uint64_t fam_capacity, unsigned acm_bits,
                                std::uint64_t region_bytes)
{
    if (fam_capacity == 0 || fam_capacity % kPageSize != 0)
        throw std::invalid_argument("fam capacity must be a non-zero multiple of 4KB");
    if (region_bytes == 0 || region_bytes % kPageSize != 0)
        throw std::invalid_argument("shared region size must be a non-zero multiple of 4KB");

    RegionLayout layout;
    layout.fam_capacity = fam_capacity;
    layout.region_bytes = region_bytes;
    layout.acm_bits = acm_bits;

    const std::uint64_t acm = round_up(layout.acm_region_bytes(), kPageSize);
    const std::uint64_t bitmap = round_up(layout.bitmap_region_bytes(), kPageSize);
    if (acm + bitmap + 2 * kPageSize > fam_capacity)
        throw std::invalid_argument("fam capacity " + std::to_string(fam_capacity) +
                                    " too small for its metadata");
    layout.bitmap_base = FamAddr{fam_capacity - bitmap};
    layout.mt_base = FamAddr{layout.bitmap_base.value - acm};
    return layout;
}

FamAddr acm_block_address(FamAddr mt_base, FamAddr x, std::uint64_t entries_per_block)
{
    return FamAddr{mt_base.value + x.value / (kPageSize * entries_per_block) * kBlockSize};
}

std::uint64_t acm_entry_offset(FamAddr x, unsigned acm_bits)
{
    const std::uint64_t per_block = kBlockSize * 8 / acm_bits;
    return (x.page().value % per_block) * acm_bits / 8;
}

BitmapProbe bitmap_probe(FamAddr bitmap_base, FamAddr x, NodeId node, std::uint64_t region_bytes)
{
    const std::uint64_t region = x.value / region_bytes;
    const std::uint64_t byte = bitmap_base.value + region * kBitmapBytesPerRegion + node / 8;
    const std::uint64_t block = byte & ~(kBlockSize - 1);
    return BitmapProbe{FamAddr{block}, static_cast<std::uint32_t>(byte - block),
                       static_cast<std::uint32_t>(node % 8)};
}

} // namespace deact
