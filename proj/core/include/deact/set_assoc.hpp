#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace deact {

/// Set-associative store with true LRU inside each set. The caller picks the
/// set; the container only matches keys within it.
template <class Key, class Value>
class SetAssocLru {
public:
    struct Way {
        bool valid = false;
        Key key{};
        Value value{};
        std::uint64_t stamp = 0;
    };

    SetAssocLru(std::size_t sets, std::size_t ways) : sets_(sets), ways_(ways), slots_(sets * ways)
    {
        if (sets == 0 || ways == 0)
            throw std::invalid_argument("set-associative cache needs at least one set and way");
    }

    std::size_t sets() const { return sets_; }
    std::size_t ways() const { return ways_; }
    std::size_t capacity() const { return slots_.size(); }

    /// Returns the matching value (promoted to MRU when `touch`) or nullptr.
    Value* find(std::size_t set, const Key& key, bool touch = true)
    {
        for (auto& w : row(set)) {
            if (w.valid && w.key == key) {
                if (touch)
                    w.stamp = ++clock_;
                return &w.value;
            }
        }
        return nullptr;
    }

    const Value* peek(std::size_t set, const Key& key) const
    {
        const Way* base = &slots_[set * ways_];
        for (std::size_t i = 0; i < ways_; ++i)
            if (base[i].valid && base[i].key == key)
                return &base[i].value;
        return nullptr;
    }

    /// Installs (or refreshes) key as MRU. Returns the evicted entry, if any.
    std::optional<std::pair<Key, Value>> insert(std::size_t set, const Key& key, const Value& value)
    {
        Way* victim = nullptr;
        for (auto& w : row(set)) {
            if (w.valid && w.key == key) {
                w.value = value;
                w.stamp = ++clock_;
                return std::nullopt;
            }
            if (!w.valid) {
                if (victim == nullptr || victim->valid)
                    victim = &w;
            } else if (victim == nullptr || (victim->valid && w.stamp < victim->stamp)) {
                victim = &w;
            }
        }
        std::optional<std::pair<Key, Value>> evicted;
        if (victim->valid)
            evicted.emplace(victim->key, victim->value);
        victim->valid = true;
        victim->key = key;
        victim->value = value;
        victim->stamp = ++clock_;
        return evicted;
    }

    bool erase(std::size_t set, const Key& key)
    {
        for (auto& w : row(set)) {
            if (w.valid && w.key == key) {
                w.valid = false;
                return true;
            }
        }
        return false;
    }

    /// Invalidates every way for which pred(key, value) holds.
    template <class Pred>
    std::size_t erase_if(Pred pred)
    {
        std::size_t n = 0;
        for (auto& w : slots_) {
            if (w.valid && pred(w.key, w.value)) {
                w.valid = false;
                ++n;
            }
        }
        return n;
    }

    void clear()
    {
        for (auto& w : slots_)
            w.valid = false;
    }

private:
    struct Row {
        Way* first;
        Way* last;
        Way* begin() const { return first; }
        Way* end() const { return last; }
    };
    Row row(std::size_t set) { return Row{&slots_[set * ways_], &slots_[set * ways_] + ways_}; }

    std::size_t sets_;
    std::size_t ways_;
    std::vector<Way> slots_;
    std::uint64_t clock_ = 0;
};

} // namespace deact
