#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deact/acm.hpp"
#include "deact/address.hpp"
#include "deact/broker.hpp"
#include "deact/workload.hpp"

namespace deact {

enum class Scheme : std::uint8_t { EFam, IFam, DeactW, DeactN };

inline constexpr Scheme kAllSchemes[] = {Scheme::EFam, Scheme::IFam, Scheme::DeactW, Scheme::DeactN};

std::string_view to_string(Scheme s);
/// Accepts efam, ifam, deact-w, deact-n.
Scheme parse_scheme(std::string_view name);

constexpr bool is_deact(Scheme s) { return s == Scheme::DeactW || s == Scheme::DeactN; }

struct SharedRegionSpec {
    std::vector<NodeId> members;
    Perm perm = Perm::R;
    /// Virtual base of the window, in every core's address space.
    std::uint64_t va_base = 0;
};

/// Every tunable of a run. Defaults reproduce the reference system: 4 cores
/// at 2GHz per node, 32/256-entry TLBs, 1GB local DRAM, 16GB NVM FAM with 32
/// banks at 60/150ns, 500ns fabric, 1024-entry 8-way STU, 1MB translation cache.
struct SimConfig {
    Scheme scheme = Scheme::DeactN;
    std::uint64_t seed = 1;

    unsigned nodes = 1;
    unsigned cores_per_node = 4;
    double cpu_ghz = 2.0;
    unsigned max_outstanding = 32;

    std::size_t tlb_l1_entries = 32;
    std::size_t tlb_l2_entries = 256;
    std::size_t tlb_l2_ways = 4;
    unsigned tlb_l1_cycles = 1;
    unsigned tlb_l2_cycles = 7;
    std::size_t ptw_cache_entries = 32;
    double minor_fault_ns = 2000.0;

    std::uint64_t local_size = 1 * GiB;
    std::uint64_t fam_view_size = 16 * GiB;
    unsigned local_banks = 8;
    double local_read_ns = 50.0;
    double local_write_ns = 50.0;
    unsigned local_max_outstanding = 128;

    std::uint64_t fam_capacity = 16 * GiB;
    unsigned fam_banks = 32;
    double fam_read_ns = 60.0;
    double fam_write_ns = 150.0;
    unsigned fam_max_outstanding = 128;

    double fabric_latency_ns = 500.0;
    double fabric_serialization_ns = 0.0;

    std::size_t stu_entries = 1024;
    std::size_t stu_ways = 8;
    unsigned acm_bits = 16;
    /// 0 picks the widest legal value for acm_bits (2, or 1 for 32-bit).
    unsigned pairs_per_way = 0;
    std::size_t stu_max_walks = 8;
    double stu_lookup_ns = 2.0;
    /// Node to STU hop; the STU sits at the node's first router.
    double stu_hop_ns = 0.0;

    std::uint64_t translation_cache_bytes = 1 * MiB;
    unsigned translator_compare_cycles = 1;
    std::size_t oml_capacity = 128;

    double local_fraction = 0.2;
    Placement placement = Placement::Random;
    bool tables_follow_split = false;
    std::uint64_t shared_region_bytes = 1 * GiB;
    std::vector<SharedRegionSpec> shared_regions;

    /// Events per core excluded from the reported counters and time.
    std::uint64_t warmup_events = 0;

    WorkloadSpec workload;

    unsigned total_cores() const { return nodes * cores_per_node; }
    unsigned effective_pairs() const;
    double cycle_ns() const { return 1.0 / cpu_ghz; }
    NodeView view() const { return NodeView{local_size, fam_view_size}; }
};

/// One message per invalid field, prefixed with the field name.
std::vector<std::string> validate(const SimConfig& config);

/// Parses YAML text. Omitted keys keep their defaults; unknown keys, type
/// errors and range errors are all collected into one ConfigError.
SimConfig parse_config(std::string_view text);
SimConfig load_config(const std::filesystem::path& path);

/// Keys accepted by sweep().
const std::vector<std::string>& sweep_axes();

/// Sets one scalar key from its text form (YAML scalar syntax). Throws
/// ConfigError for unknown keys or bad values; does not validate the result.
void set_config_value(SimConfig& config, std::string_view key, std::string_view value);

/// Byte counts accept plain integers, 0x-prefixed hex, or K/KB/KiB, M/MB/MiB,
/// G/GB/GiB suffixes (all binary).
std::uint64_t parse_bytes(std::string_view text);

} // namespace deact
