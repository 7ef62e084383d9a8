#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>

#include "deact/address.hpp"

namespace deact {

/// Which physical space a page lives in: a node physical page (local or FAM
/// zone, decided by its number) or a FAM page named directly.
enum class PageSpace : std::uint8_t { Node, Fam };

struct PageLoc {
    PageSpace space = PageSpace::Node;
    std::uint64_t page = 0;

    std::uint64_t byte_address(std::uint64_t offset = 0) const { return (page << kPageShift) | offset; }

    friend bool operator==(const PageLoc&, const PageLoc&) = default;
};

inline constexpr int kTableLevels = 4;
inline constexpr unsigned kBitsPerLevel = 9;
inline constexpr std::uint64_t kEntriesPerTable = 1u << kBitsPerLevel;
inline constexpr std::uint64_t kPteBytes = 8;

/// A page-table entry touched by a walk: table page plus byte offset.
struct TableEntryRef {
    PageLoc table;
    std::uint64_t offset = 0;

    std::uint64_t byte_address() const { return table.byte_address(offset); }

    friend bool operator==(const TableEntryRef&, const TableEntryRef&) = default;
};

/// Four-level radix table (PGD, PUD, PMD, PTE; 9 index bits each) over page
/// numbers. Table pages are obtained from a caller-supplied allocator so they
/// occupy real simulated memory.
class RadixPageTable {
public:
    using TableAllocator = std::function<PageLoc()>;

    explicit RadixPageTable(PageLoc root) : root_(root) {}

    PageLoc root() const { return root_; }

    std::optional<PageLoc> lookup(std::uint64_t page) const;
    bool is_mapped(std::uint64_t page) const { return leaf_.contains(page); }

    /// Installs page -> target, allocating missing intermediate tables top-down.
    /// Returns how many table pages were allocated.
    int map(std::uint64_t page, PageLoc target, const TableAllocator& alloc);
    bool unmap(std::uint64_t page);

    /// Entries read by a full walk, root first. Precondition: page is mapped.
    std::array<TableEntryRef, kTableLevels> walk_entries(std::uint64_t page) const;

    std::size_t mapped_pages() const { return leaf_.size(); }
    std::size_t table_pages() const;

    template <class F>
    void for_each_mapping(F&& f) const
    {
        for (const auto& [page, loc] : leaf_)
            f(page, loc);
    }

    static std::uint64_t index_at(std::uint64_t page, int level)
    {
        return (page >> (kBitsPerLevel * (kTableLevels - 1 - level))) & (kEntriesPerTable - 1);
    }
    /// Key of the table at `level` that holds page's entry.
    static std::uint64_t prefix_at(std::uint64_t page, int level)
    {
        return page >> (kBitsPerLevel * (kTableLevels - level));
    }

private:
    PageLoc root_;
    // tables_[l - 1] maps prefix_at(page, l) -> table page, for levels 1..3.
    std::array<std::unordered_map<std::uint64_t, PageLoc>, kTableLevels - 1> tables_;
    std::unordered_map<std::uint64_t, PageLoc> leaf_;
};

} // namespace deact
