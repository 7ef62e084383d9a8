#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "deact/broker.hpp"
#include "deact/config.hpp"
#include "deact/fam_memory.hpp"
#include "deact/frontend.hpp"
#include "deact/stats.hpp"
#include "deact/stu.hpp"
#include "deact/translator.hpp"
#include "deact/workload.hpp"

namespace deact {

enum class Outcome : std::uint8_t { Pending, Local, Allowed, Denied, Dropped };

/// Where an op's latency went. Every tick between issue and completion is
/// charged to exactly one segment.
enum class Segment : std::uint8_t {
    Tlb,
    Fault,
    LocalDram,
    Translator,
    FabricOut,
    Stu,
    FamBank,
    FabricBack,
    Queue,
    kCount
};

inline constexpr std::size_t kSegments = static_cast<std::size_t>(Segment::kCount);

std::string_view to_string(Segment s);

using SegmentTimes = std::array<Tick, kSegments>;

/// Per trace event result. `addr` is the FAM byte address the access was
/// (or would have been) sent to, or the node physical address for Local.
struct OpRecord {
    Outcome outcome = Outcome::Pending;
    DenyReason reason = DenyReason::Unallocated;
    std::uint64_t addr = 0;
    Tick issued = 0;
    Tick completed = 0;
};

struct AllocationRecord {
    enum class Kind : std::uint8_t { Root, Fault, OnDemand };
    Kind kind;
    NodeId node;
    std::uint32_t core;
    std::uint64_t page; ///< virtual page (Fault) or node page (OnDemand)
};

/// A request a (possibly malicious) node puts on the fabric directly,
/// bypassing its own TLB and translator.
struct RawRequest {
    NodeId node = 0;
    Tick at = 0;
    std::uint64_t addr = 0;
    bool v = false;
    AccessKind kind = AccessKind::Read;
};

struct EngineOptions {
    bool record_ops = false;
    /// Track per-op latency segments and per-bank service intervals.
    bool audit = false;
};

/// Broker settings implied by a run configuration.
BrokerConfig broker_config(const SimConfig& config);

/// Creates the configured shared regions in `broker`, in order.
std::vector<SharedWindow> make_shared_windows(Broker& broker, const SimConfig& config);

/// Discrete-event simulator for one configuration. Core c belongs to node
/// c / cores_per_node and replays traces[c].
class Simulator {
public:
    /// `kind` is the access kind the request works for. Page-table reads
    /// report Read.
    using FamObserver = std::function<void(NodeId node, FamAddr addr, RequestClass cls, MemOp op, AccessKind kind)>;

    Simulator(const SimConfig& config, std::vector<std::vector<TraceEvent>> traces, EngineOptions options = {});
    ~Simulator();
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    /// Must be called before run().
    void inject_raw(const RawRequest& request);
    /// Called for every request serviced by a FAM pool.
    void set_fam_observer(FamObserver observer);

    SimStats run();

    const SimConfig& config() const;
    Broker& broker();
    const std::vector<std::vector<OpRecord>>& records() const;
    const std::vector<std::vector<SegmentTimes>>& segments() const;
    const std::vector<AllocationRecord>& allocation_log() const;
    const BankedMemory& fam_pool(std::size_t i) const;
    const BankedMemory& local_memory(NodeId node) const;
    const Stu& stu(NodeId node) const;
    const FamTranslator* translator(NodeId node) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace deact
