#pragma once

#include <compare>
#include <cstdint>
#include <optional>

namespace deact {

inline constexpr std::uint64_t kPageShift = 12;
inline constexpr std::uint64_t kPageSize = std::uint64_t{1} << kPageShift;
inline constexpr std::uint64_t kPageMask = kPageSize - 1;
inline constexpr std::uint64_t kBlockSize = 64;

inline constexpr std::uint64_t KiB = 1024;
inline constexpr std::uint64_t MiB = 1024 * KiB;
inline constexpr std::uint64_t GiB = 1024 * MiB;

using NodeId = std::uint32_t;

// Address-space tags. Each space gets its own address and page types so that
// a virtual address can never be handed to something expecting a FAM address.
struct VirtSpace {};
struct NodeSpace {};
struct FamSpace {};

template <class Space>
struct Page;

template <class Space>
struct Address {
    std::uint64_t value = 0;

    constexpr Address() = default;
    constexpr explicit Address(std::uint64_t v) : value(v) {}

    constexpr Page<Space> page() const;
    constexpr std::uint64_t offset() const { return value & kPageMask; }
    constexpr Address block_aligned() const { return Address{value & ~(kBlockSize - 1)}; }

    friend constexpr auto operator<=>(Address, Address) = default;
};

template <class Space>
struct Page {
    std::uint64_t value = 0;

    constexpr Page() = default;
    constexpr explicit Page(std::uint64_t v) : value(v) {}

    constexpr Address<Space> base() const { return Address<Space>{value << kPageShift}; }
    constexpr Address<Space> at(std::uint64_t offset) const
    {
        return Address<Space>{(value << kPageShift) | (offset & kPageMask)};
    }

    friend constexpr auto operator<=>(Page, Page) = default;
};

template <class Space>
constexpr Page<Space> Address<Space>::page() const
{
    return Page<Space>{value >> kPageShift};
}

using VirtAddr = Address<VirtSpace>;
using NodePhysAddr = Address<NodeSpace>;
using FamAddr = Address<FamSpace>;

using VirtPage = Page<VirtSpace>;
using NodePage = Page<NodeSpace>;
using FamPage = Page<FamSpace>;

enum class Zone { Local, FamZone };

/// A node's flat physical view: local DRAM below `local_size`, the FAM zone
/// above it.
struct NodeView {
    std::uint64_t local_size = 1 * GiB;
    std::uint64_t fam_view_size = 16 * GiB;

    constexpr std::uint64_t end() const { return local_size + fam_view_size; }
};

struct NodeAddrParts {
    Zone zone;
    NodePage page;
    std::uint64_t offset;

    friend bool operator==(const NodeAddrParts&, const NodeAddrParts&) = default;
};

/// Splits a node physical address into zone, page and offset. Addresses past
/// the end of the node's view yield nullopt (the caller drops and counts them).
std::optional<NodeAddrParts> decompose_node_address(NodePhysAddr addr, const NodeView& view);

constexpr std::uint64_t round_up(std::uint64_t v, std::uint64_t align)
{
    return (v + align - 1) / align * align;
}

constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b)
{
    return (a + b - 1) / b;
}

} // namespace deact
