#pragma once

#include <cstdint>
#include <string_view>
#include <variant>

#include "deact/address.hpp"

namespace deact {

enum class AccessKind : std::uint8_t { Read, Write, Execute };

/// Two-bit permission ladder stored in the low bits of every ACM entry.
enum class Perm : std::uint8_t { None = 0, R = 1, RW = 2, RWX = 3 };

constexpr bool permits(Perm perm, AccessKind kind)
{
    const auto level = static_cast<unsigned>(perm);
    switch (kind) {
    case AccessKind::Read: return level >= 1;
    case AccessKind::Write: return level >= 2;
    case AccessKind::Execute: return level == 3;
    }
    return false;
}

char to_char(AccessKind kind);
std::string_view to_string(Perm perm);

struct AcmShared {
    Perm perm;
    friend bool operator==(const AcmShared&, const AcmShared&) = default;
};

struct AcmOwned {
    NodeId node;
    Perm perm;
    friend bool operator==(const AcmOwned&, const AcmOwned&) = default;
};

/// perm == 0. The stale owner bits are kept so decoding stays lossless.
struct AcmUnallocated {
    std::uint32_t stale_owner = 0;
    friend bool operator==(const AcmUnallocated&, const AcmUnallocated&) = default;
};

using AcmDecoded = std::variant<AcmShared, AcmOwned, AcmUnallocated>;

/// Width of an ACM entry. The owner field is everything above the two
/// permission bits; all-ones in the owner field marks a shared page.
class AcmFormat {
public:
    constexpr explicit AcmFormat(unsigned bits = 16) : bits_(bits) {}

    constexpr unsigned bits() const { return bits_; }
    constexpr unsigned owner_bits() const { return bits_ - 2; }
    constexpr std::uint32_t shared_marker() const
    {
        return static_cast<std::uint32_t>((std::uint64_t{1} << owner_bits()) - 1);
    }
    /// Largest usable node id + 1 (the all-ones owner value is reserved).
    constexpr std::uint32_t max_nodes() const { return shared_marker(); }
    constexpr std::uint32_t raw_mask() const
    {
        return static_cast<std::uint32_t>((std::uint64_t{1} << bits_) - 1);
    }
    /// Entries carried by one 64-byte metadata block.
    constexpr std::uint64_t entries_per_block() const { return kBlockSize * 8 / bits_; }

    AcmDecoded decode(std::uint32_t raw) const;
    std::uint32_t encode(const AcmDecoded& acm) const;

    std::uint32_t owned(NodeId node, Perm perm) const { return encode(AcmOwned{node, perm}); }
    std::uint32_t shared(Perm perm) const { return encode(AcmShared{perm}); }

private:
    unsigned bits_;
};

/// 16-bit entry as laid out in the FAM metadata region: bits 15..2 owner or
/// shared marker (0x3FFF), bits 1..0 permission.
struct AcmEntry {
    std::uint16_t raw = 0;

    constexpr std::uint16_t owner_field() const { return raw >> 2; }
    constexpr Perm perm() const { return static_cast<Perm>(raw & 0x3); }

    AcmDecoded decode() const { return AcmFormat{16}.decode(raw); }
    static AcmEntry encode(const AcmDecoded& acm)
    {
        return AcmEntry{static_cast<std::uint16_t>(AcmFormat{16}.encode(acm))};
    }
};

inline AcmDecoded decode_acm(std::uint16_t raw) { return AcmEntry{raw}.decode(); }

} // namespace deact
