#pragma once

#include <cstdint>

#include "deact/acm.hpp"
#include "deact/address.hpp"

namespace deact {

inline constexpr std::uint64_t kSharedRegionBytes = 1 * GiB;
inline constexpr std::uint64_t kBitmapBytesPerRegion = 8 * KiB; // 64K bits

/// Placement of the metadata regions inside FAM. Allocatable data pages are
/// [1, mt_base / 4K); page 0 is reserved as the translator's miss sentinel.
/// The ACM region follows, then one 8KB bitmap per shared-region-sized chunk.
struct RegionLayout {
    FamAddr mt_base;
    FamAddr bitmap_base;
    std::uint64_t fam_capacity = 0;
    std::uint64_t region_bytes = kSharedRegionBytes;
    unsigned acm_bits = 16;

    std::uint64_t acm_region_bytes() const;
    std::uint64_t bitmap_region_bytes() const;
    std::uint64_t allocatable_pages() const { return mt_base.value >> kPageShift; }
    std::uint64_t total_pages() const { return fam_capacity >> kPageShift; }

    bool in_metadata(FamAddr x) const { return x.value >= mt_base.value; }
    bool in_acm_region(FamAddr x) const { return x >= mt_base && x < bitmap_base; }
    bool in_bitmap_region(FamAddr x) const
    {
        return x >= bitmap_base && x.value < bitmap_base.value + bitmap_region_bytes();
    }
    bool is_allocatable(FamPage p) const { return p.value != 0 && p.value < allocatable_pages(); }
};

/// Computes the layout for a FAM of `fam_capacity` bytes, metadata packed at
/// the top (page aligned). Throws std::invalid_argument when the capacity
/// cannot hold its own metadata.
RegionLayout make_region_layout(std::uint64_t fam_capacity, unsigned acm_bits = 16,
                                std::uint64_t region_bytes = kSharedRegionBytes);

/// Address of the 64-byte block holding the ACM entry of FAM address `x`.
/// With 16-bit entries one block covers 32 pages (128KB of FAM).
FamAddr acm_block_address(FamAddr mt_base, FamAddr x, std::uint64_t entries_per_block = 32);

/// Byte offset of x's entry inside its ACM block.
std::uint64_t acm_entry_offset(FamAddr x, unsigned acm_bits = 16);

struct BitmapProbe {
    FamAddr block_addr;
    std::uint32_t byte_in_block;
    std::uint32_t bit_index;

    friend bool operator==(const BitmapProbe&, const BitmapProbe&) = default;
};

BitmapProbe bitmap_probe(FamAddr bitmap_base, FamAddr x, NodeId node,
                         std::uint64_t region_bytes = kSharedRegionBytes);

} // namespace deact
