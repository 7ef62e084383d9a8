#include "deact/fam_memory.hpp"

#include <algorithm>
#include <stdexcept>

namespace deact {

std::string_view to_string(RequestClass c)
{
    switch (c) {
    case RequestClass::Demand: return "demand";
    case RequestClass::AtWalk: return "at_walk";
    case RequestClass::AtAcm: return "at_acm";
    case RequestClass::AtBitmap: return "at_bitmap";
    }
    return "?";
}

BankedMemory::BankedMemory(const MemoryTiming& timing)
    : timing_(timing),
      read_ticks_(ns_to_ticks(timing.read_ns)),
      write_ticks_(ns_to_ticks(timing.write_ns)),
      bank_free_(timing.banks, 0)
{
    if (timing.banks == 0 || timing.max_outstanding == 0)
        throw std::invalid_argument("memory needs at least one bank and one admission slot");
}

Tick BankedMemory::service(Tick arrival, std::uint64_t addr, MemOp op, RequestClass cls)
{
    while (!in_flight_.empty() && in_flight_.top() <= arrival)
        in_flight_.pop();
    Tick admit = arrival;
    if (in_flight_.size() >= timing_.max_outstanding) {
        admit = in_flight_.top();
        in_flight_.pop();
        ++counters_.admission_waits;
    }

    const std::size_t bank = bank_of(addr);
    const Tick start = std::max(admit, bank_free_[bank]);
    const Tick done = start + (op == MemOp::Read ? read_ticks_ : write_ticks_);
    bank_free_[bank] = done;
    in_flight_.push(done);
    peak_in_flight_ = std::max(peak_in_flight_, in_flight_.size());
    if (!audit_.empty())
        audit_[bank].emplace_back(start, done);

    ++counters_.admitted;
    ++(op == MemOp::Read ? counters_.reads : counters_.writes);
    ++counters_.by_class[static_cast<std::size_t>(cls)];
    return done;
}

Tick FabricLink::transit(Tick depart)
{
    ++messages_;
    if (serialization_ == 0)
        return depart + latency_;
    const Tick start = std::max(depart, free_at_);
    queueing_ += start - depart;
    free_at_ = start + serialization_;
    return free_at_ + latency_;
}

} // namespace deact
