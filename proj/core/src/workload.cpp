#include "deact/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace deact {

std::string_view to_string(GeneratorKind kind)
{
    switch (kind) {
    case GeneratorKind::Uniform: return "uniform";
    case GeneratorKind::Zipf: return "zipf";
    case GeneratorKind::Stream: return "stream";
    case GeneratorKind::PointerChase: return "pointer_chase";
    }
    return "?";
}

GeneratorKind parse_generator(std::string_view name)
{
    if (name == "uniform")
        return GeneratorKind::Uniform;
    if (name == "zipf")
        return GeneratorKind::Zipf;
    if (name == "stream")
        return GeneratorKind::Stream;
    if (name == "pointer_chase" || name == "pointer-chase")
        return GeneratorKind::PointerChase;
    throw ConfigError(fmt::format("workload.generator: unknown generator '{}'", name));
}

std::vector<std::string> WorkloadSpec::validate() const
{
    std::vector<std::string> issues;
    if (length == 0)
        issues.emplace_back("workload.length: must be > 0");
    // A stream only needs room for one block; the others draw whole pages.
    const std::uint64_t min_footprint = generator == GeneratorKind::Stream ? kBlockSize : kPageSize;
    if (footprint < min_footprint)
        issues.emplace_back(
            fmt::format("workload.footprint: {} is below the minimum of {}", footprint, min_footprint));
    if (!(rw_ratio >= 0.0 && rw_ratio <= 1.0))
        issues.emplace_back(fmt::format("workload.rw_ratio: {} not in [0, 1]", rw_ratio));
    if (!(mpki_target > 0.0))
        issues.emplace_back("workload.mpki_target: must be > 0");
    if (generator == GeneratorKind::Zipf && !(zipf_skew >= 0.0))
        issues.emplace_back("workload.zipf_skew: must be >= 0");
    if (generator == GeneratorKind::Stream && stream_stride == 0)
        issues.emplace_back("workload.stream_stride: must be > 0");
    if (generator == GeneratorKind::PointerChase && chain_length > ceil_div(footprint, kPageSize))
        issues.emplace_back("workload.chain_length: exceeds pages in footprint");
    return issues;
}

namespace {

// Fisher-Yates with the deterministic bounded draw.
void shuffle(std::vector<std::uint64_t>& v, Rng& rng)
{
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.below(i)]);
}

} // namespace

TraceGenerator::TraceGenerator(const WorkloadSpec& spec)
    : spec_(spec), rng_(spec.seed), pages_(ceil_div(spec.footprint, kPageSize))
{
    if (auto issues = spec_.validate(); !issues.empty())
        throw ConfigError(std::move(issues));

    switch (spec_.generator) {
    case GeneratorKind::Zipf: {
        zipf_cdf_.resize(pages_);
        double sum = 0.0;
        for (std::uint64_t k = 0; k < pages_; ++k) {
            sum += 1.0 / std::pow(static_cast<double>(k + 1), spec_.zipf_skew);
            zipf_cdf_[k] = sum;
        }
        for (auto& c : zipf_cdf_)
            c /= sum;
        // Popular ranks land on scattered pages.
        rank_to_page_.resize(pages_);
        for (std::uint64_t i = 0; i < pages_; ++i)
            rank_to_page_[i] = i;
        shuffle(rank_to_page_, rng_);
        break;
    }
    case GeneratorKind::PointerChase: {
        std::vector<std::uint64_t> order(pages_);
        for (std::uint64_t i = 0; i < pages_; ++i)
            order[i] = i;
        shuffle(order, rng_);
        const std::uint64_t len = spec_.chain_length == 0 ? pages_ : spec_.chain_length;
        order.resize(len);
        chase_next_ = std::move(order);
        break;
    }
    default: break;
    }
}

std::uint64_t TraceGenerator::next_page()
{
    switch (spec_.generator) {
    case GeneratorKind::Uniform: return rng_.below(pages_);
    case GeneratorKind::Zipf: {
        const double u = rng_.unit();
        auto it = std::upper_bound(zipf_cdf_.begin(), zipf_cdf_.end(), u);
        const auto rank = std::min<std::size_t>(it - zipf_cdf_.begin(), pages_ - 1);
        return rank_to_page_[rank];
    }
    case GeneratorKind::PointerChase: {
        const std::uint64_t page = chase_next_[chase_pos_];
        chase_pos_ = (chase_pos_ + 1) % chase_next_.size();
        return page;
    }
    case GeneratorKind::Stream: break;
    }
    return 0;
}

std::uint64_t TraceGenerator::gap_for(std::uint64_t index) const
{
    // Integer gaps whose running mean is exactly 1000 / mpki.
    const double per_access = 1000.0 / spec_.mpki_target;
    const auto upto = [&](std::uint64_t n) {
        return static_cast<std::uint64_t>(std::floor(static_cast<double>(n) * per_access));
    };
    return upto(index + 1) - upto(index);
}

TraceEvent TraceGenerator::next()
{
    TraceEvent ev;
    ev.seq = emitted_;
    ev.gap_cycles = gap_for(emitted_);

    std::uint64_t addr = 0;
    if (spec_.generator == GeneratorKind::Stream) {
        addr = stream_pos_;
        stream_pos_ = (stream_pos_ + spec_.stream_stride) % spec_.footprint;
    } else {
        const std::uint64_t page = next_page();
        const std::uint64_t line = rng_.below(kPageSize / kBlockSize) * kBlockSize;
        addr = std::min(page * kPageSize + line, spec_.footprint - 1) & ~(kBlockSize - 1);
    }
    ev.vaddr = VirtAddr{addr};
    ev.kind = rng_.unit() < spec_.rw_ratio ? AccessKind::Write : AccessKind::Read;
    ++emitted_;
    return ev;
}

std::vector<TraceEvent> generate(const WorkloadSpec& spec)
{
    TraceGenerator gen(spec);
    std::vector<TraceEvent> out;
    out.reserve(spec.length);
    while (!gen.done())
        out.push_back(gen.next());
    return out;
}

TraceParseError::TraceParseError(std::string source, std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("{}:{}: {}", source, line, what)), line_(line)
{
}

namespace {

template <class T>
bool parse_number(std::string_view tok, T& out, int base = 10)
{
    if (base == 16 && (tok.starts_with("0x") || tok.starts_with("0X")))
        tok.remove_prefix(2);
    if (tok.empty())
        return false;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out, base);
    return ec == std::errc{} && ptr == tok.data() + tok.size();
}

} // namespace

std::vector<TraceEvent> parse_trace(std::istream& in, const std::string& source)
{
    std::vector<TraceEvent> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream fields(line);
        std::string seq_s, kind_s, addr_s, gap_s, extra;
        if (!(fields >> seq_s))
            continue;
        if (seq_s.starts_with('#'))
            continue;
        if (!(fields >> kind_s >> addr_s >> gap_s))
            throw TraceParseError(source, lineno, "expected '<seq> <R|W|X> <hex vaddr> <gap>'");
        if (fields >> extra)
            throw TraceParseError(source, lineno, "trailing field '" + extra + "'");

        TraceEvent ev;
        std::uint64_t addr = 0;
        if (!parse_number(seq_s, ev.seq))
            throw TraceParseError(source, lineno, "bad sequence number '" + seq_s + "'");
        if (kind_s == "R")
            ev.kind = AccessKind::Read;
        else if (kind_s == "W")
            ev.kind = AccessKind::Write;
        else if (kind_s == "X")
            ev.kind = AccessKind::Execute;
        else
            throw TraceParseError(source, lineno, "bad access kind '" + kind_s + "'");
        if (!parse_number(addr_s, addr, 16))
            throw TraceParseError(source, lineno, "bad address '" + addr_s + "'");
        if (!parse_number(gap_s, ev.gap_cycles))
            throw TraceParseError(source, lineno, "bad gap '" + gap_s + "'");
        ev.vaddr = VirtAddr{addr};

        if (!events.empty() && ev.seq <= events.back().seq)
            throw TraceParseError(source, lineno, "non-monotone sequence");
        events.push_back(ev);
    }
    if (events.empty())
        throw ConfigError(source + ": trace is empty");
    return events;
}

std::vector<TraceEvent> load_trace(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path.string() + ": cannot open trace");
    return parse_trace(in, path.string());
}

void write_trace(std::ostream& out, const std::vector<TraceEvent>& events)
{
    for (const auto& ev : events)
        out << fmt::format("{} {} {:#x} {}\n", ev.seq, to_char(ev.kind), ev.vaddr.value,
                           ev.gap_cycles);
}

} // namespace deact
