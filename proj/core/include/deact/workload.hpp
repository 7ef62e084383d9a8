#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "deact/acm.hpp"
#include "deact/address.hpp"
#include "deact/common.hpp"

namespace deact {

/// One last-level-cache miss of a core, preceded by `gap_cycles` cycles of
/// non-memory work.
struct TraceEvent {
    std::uint64_t seq = 0;
    AccessKind kind = AccessKind::Read;
    VirtAddr vaddr;
    std::uint64_t gap_cycles = 0;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

enum class GeneratorKind { Uniform, Zipf, Stream, PointerChase };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator(std::string_view name);

struct WorkloadSpec {
    GeneratorKind generator = GeneratorKind::Uniform;
    std::uint64_t footprint = 64 * MiB;
    /// Fraction of accesses that are writes.
    double rw_ratio = 0.3;
    /// Memory accesses per thousand instructions.
    double mpki_target = 20.0;
    std::uint64_t length = 100000;
    std::uint64_t seed = 1;

    double zipf_skew = 0.99;
    std::uint64_t stream_stride = 64;
    /// Pages in the pointer-chase cycle; 0 means every page of the footprint.
    std::uint64_t chain_length = 0;

    /// Returns one message per invalid field; empty when the spec is usable.
    std::vector<std::string> validate() const;
};

/// Deterministic, pull-style event source for one core.
class TraceGenerator {
public:
    explicit TraceGenerator(const WorkloadSpec& spec);

    bool done() const { return emitted_ == spec_.length; }
    TraceEvent next();

private:
    std::uint64_t next_page();
    std::uint64_t gap_for(std::uint64_t index) const;

    WorkloadSpec spec_;
    Rng rng_;
    std::uint64_t pages_;
    std::uint64_t emitted_ = 0;
    std::uint64_t stream_pos_ = 0;
    std::uint64_t chase_pos_ = 0;
    std::vector<double> zipf_cdf_;
    std::vector<std::uint64_t> rank_to_page_;
    std::vector<std::uint64_t> chase_next_;
};

/// Whole trace for `spec`. Throws ConfigError on an invalid spec.
std::vector<TraceEvent> generate(const WorkloadSpec& spec);

/// Text format, one event per line: `<seq> <R|W|X> <hex vaddr> <gap_cycles>`.
/// Blank lines and lines starting with '#' are ignored.
class TraceParseError : public std::runtime_error {
public:
    TraceParseError(std::string source, std::size_t line, const std::string& what);

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

std::vector<TraceEvent> parse_trace(std::istream& in, const std::string& source = "<trace>");
std::vector<TraceEvent> load_trace(const std::filesystem::path& path);
void write_trace(std::ostream& out, const std::vector<TraceEvent>& events);

} // namespace deact
