#include "deact/acm.hpp"

#include <type_traits>

namespace deact {

char to_char(AccessKind kind)
{
    switch (kind) {
    case AccessKind::Read: return 'R';
    case AccessKind::Write: return 'W';
    case AccessKind::Execute: return 'X';
    }
    return '?';
}

std::string_view to_string(Perm perm)
{
    switch (perm) {
    case Perm::None: return "none";
    case Perm::R: return "r";
    case Perm::RW: return "rw";
    case Perm::RWX: return "rwx";
    }
    return "?";
}

AcmDecoded AcmFormat::decode(std::uint32_t raw) const
{
    raw &= raw_mask();
    const auto perm = static_cast<Perm>(raw & 0x3);
    const std::uint32_t owner = raw >> 2;
    // perm == 0 means unallocated whatever the owner bits say.
    if (perm == Perm::None)
        return AcmUnallocated{owner};
    if (owner == shared_marker())
        return AcmShared{perm};
    return AcmOwned{owner, perm};
}

std::uint32_t AcmFormat::encode(const AcmDecoded& acm) const
{
    return std::visit(
        [this](const auto& v) -> std::uint32_t {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, AcmUnallocated>) {
                return (v.stale_owner & shared_marker()) << 2;
            } else if constexpr (std::is_same_v<T, AcmShared>) {
                return (shared_marker() << 2) | static_cast<std::uint32_t>(v.perm);
            } else {
                return ((v.node & shared_marker()) << 2) | static_cast<std::uint32_t>(v.perm);
            }
        },
        acm);
}

} // namespace deact
