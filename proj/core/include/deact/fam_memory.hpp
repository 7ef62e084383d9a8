#pragma once

#include <array>
#include <cstdint>
#include <queue>
#include <string_view>
#include <utility>
#include <vector>

#include "deact/common.hpp"

namespace deact {

/// What a memory request is for. Everything but Demand is address-translation
/// (AT) traffic.
enum class RequestClass : std::uint8_t { Demand, AtWalk, AtAcm, AtBitmap };

inline constexpr std::size_t kRequestClasses = 4;

constexpr bool is_at(RequestClass c) { return c != RequestClass::Demand; }
std::string_view to_string(RequestClass c);

enum class MemOp : std::uint8_t { Read, Write };

struct MemoryTiming {
    unsigned banks = 32;
    double read_ns = 60.0;
    double write_ns = 150.0;
    unsigned max_outstanding = 128;
};

struct MemoryCounters {
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::array<std::uint64_t, kRequestClasses> by_class{};
    std::uint64_t admitted = 0;
    std::uint64_t completed = 0;
    /// Requests that had to wait for an admission slot.
    std::uint64_t admission_waits = 0;

    std::uint64_t total() const { return reads + writes; }
    std::uint64_t at_total() const { return by_class[1] + by_class[2] + by_class[3]; }
    std::uint64_t of(RequestClass c) const { return by_class[static_cast<std::size_t>(c)]; }
};

/// Banked memory with fixed per-operation latency. A bank serves one request
/// at a time and the module admits at most `max_outstanding` requests. Calls
/// to service() must come in non-decreasing arrival order.
class BankedMemory {
public:
    explicit BankedMemory(const MemoryTiming& timing);

    const MemoryTiming& timing() const { return timing_; }
    const MemoryCounters& counters() const { return counters_; }

    std::size_t bank_of(std::uint64_t addr) const { return (addr >> 6) % timing_.banks; }

    /// Admits the request and returns its completion time.
    Tick service(Tick arrival, std::uint64_t addr, MemOp op, RequestClass cls);

    /// Marks one admitted request as delivered (conservation accounting).
    void complete() { ++counters_.completed; }

    /// Records every bank's busy interval so tests can check they never overlap.
    void enable_audit() { audit_.assign(timing_.banks, {}); }
    const std::vector<std::vector<std::pair<Tick, Tick>>>& audit() const { return audit_; }

    std::size_t peak_in_flight() const { return peak_in_flight_; }

private:
    MemoryTiming timing_;
    Tick read_ticks_;
    Tick write_ticks_;
    std::vector<Tick> bank_free_;
    std::priority_queue<Tick, std::vector<Tick>, std::greater<>> in_flight_;
    std::size_t peak_in_flight_ = 0;
    MemoryCounters counters_;
    std::vector<std::vector<std::pair<Tick, Tick>>> audit_;
};

/// One direction of a fabric link: fixed latency plus optional per-message
/// serialization, which makes concurrent senders queue behind each other.
class FabricLink {
public:
    FabricLink(double latency_ns, double serialization_ns)
        : latency_(ns_to_ticks(latency_ns)), serialization_(ns_to_ticks(serialization_ns))
    {
    }

    Tick transit(Tick depart);

    std::uint64_t messages() const { return messages_; }
    Tick queueing() const { return queueing_; }
    Tick latency() const { return latency_; }

private:
    Tick latency_;
    Tick serialization_;
    Tick free_at_ = 0;
    std::uint64_t messages_ = 0;
    Tick queueing_ = 0;
};

} // namespace deact
