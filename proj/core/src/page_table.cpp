#include "deact/page_table.hpp"

#include <stdexcept>

namespace deact {

std::optional<PageLoc> RadixPageTable::lookup(std::uint64_t page) const
{
    if (auto it = leaf_.find(page); it != leaf_.end())
        return it->second;
    return std::nullopt;
}

int RadixPageTable::map(std::uint64_t page, PageLoc target, const TableAllocator& alloc)
{
    int allocated = 0;
    for (int level = 1; level < kTableLevels; ++level) {
        auto& tables = tables_[level - 1];
        const std::uint64_t key = prefix_at(page, level);
        if (!tables.contains(key)) {
            tables.emplace(key, alloc());
            ++allocated;
        }
    }
    leaf_[page] = target;
    return allocated;
}

bool RadixPageTable::unmap(std::uint64_t page)
{
    return leaf_.erase(page) > 0;
}

std::array<TableEntryRef, kTableLevels> RadixPageTable::walk_entries(std::uint64_t page) const
{
    std::array<TableEntryRef, kTableLevels> refs;
    PageLoc table = root_;
    for (int level = 0; level < kTableLevels; ++level) {
        refs[level] = TableEntryRef{table, index_at(page, level) * kPteBytes};
        if (level + 1 < kTableLevels) {
            const auto& tables = tables_[level];
            auto it = tables.find(prefix_at(page, level + 1));
            if (it == tables.end())
                throw std::logic_error("walk_entries on an unmapped page");
            table = it->second;
        }
    }
    return refs;
}

std::size_t RadixPageTable::table_pages() const
{
    std::size_t n = 1;
    for (const auto& t : tables_)
        n += t.size();
    return n;
}

} // namespace deact
