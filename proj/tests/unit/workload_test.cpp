#include <gtest/gtest.h>

#include <sstream>

#include "deact/workload.hpp"

using namespace deact;

namespace {

WorkloadSpec spec_of(GeneratorKind g, std::uint64_t footprint, std::uint64_t length, std::uint64_t seed = 1)
{
    WorkloadSpec s;
    s.generator = g;
    s.footprint = footprint;
    s.length = length;
    s.seed = seed;
    return s;
}

} // namespace

TEST(Workload, StreamWrapsAroundFootprint)
{
    auto s = spec_of(GeneratorKind::Stream, 256, 5);
    s.stream_stride = 64;
    const auto t = generate(s);
    std::vector<std::uint64_t> addrs;
    for (const auto& e : t)
        addrs.push_back(e.vaddr.value);
    EXPECT_EQ(addrs, (std::vector<std::uint64_t>{0, 64, 128, 192, 0}));
}

TEST(Workload, UniformIsDeterministic)
{
    const auto s = spec_of(GeneratorKind::Uniform, 64 * MiB, 5000, 42);
    EXPECT_EQ(generate(s), generate(s));
    EXPECT_NE(generate(s), generate(spec_of(GeneratorKind::Uniform, 64 * MiB, 5000, 43)));
}

TEST(Workload, MeanGapFollowsMpki)
{
    auto s = spec_of(GeneratorKind::Uniform, 512 * MiB, 100000);
    s.mpki_target = 57;
    double sum = 0;
    for (const auto& e : generate(s))
        sum += static_cast<double>(e.gap_cycles);
    EXPECT_NEAR(sum / 100000.0, 1000.0 / 57.0, 0.01);
}

TEST(Workload, SequenceAndFootprintInvariants)
{
    for (auto g : {GeneratorKind::Uniform, GeneratorKind::Zipf, GeneratorKind::Stream, GeneratorKind::PointerChase}) {
        const auto s = spec_of(g, 3 * MiB + 100, 20000, 9);
        const auto t = generate(s);
        ASSERT_EQ(t.size(), 20000u);
        for (std::size_t i = 0; i < t.size(); ++i) {
            ASSERT_EQ(t[i].seq, i);
            ASSERT_LT(t[i].vaddr.value, s.footprint);
        }
    }
}

TEST(Workload, WriteFractionFollowsRwRatio)
{
    auto s = spec_of(GeneratorKind::Uniform, 1 * MiB, 50000);
    s.rw_ratio = 0.25;
    std::size_t writes = 0;
    for (const auto& e : generate(s))
        writes += e.kind == AccessKind::Write;
    EXPECT_NEAR(static_cast<double>(writes) / 50000.0, 0.25, 0.01);
}

TEST(Workload, PointerChaseVisitsEveryPageOncePerCycle)
{
    auto s = spec_of(GeneratorKind::PointerChase, 100 * kPageSize, 200);
    const auto t = generate(s);
    std::vector<int> seen(100, 0);
    for (std::size_t i = 0; i < 100; ++i)
        ++seen[t[i].vaddr.value / kPageSize];
    for (int c : seen)
        ASSERT_EQ(c, 1);
    for (std::size_t i = 0; i < 100; ++i)
        ASSERT_EQ(t[i].vaddr.page(), t[i + 100].vaddr.page());
}

TEST(Workload, ZipfWithZeroSkewMatchesUniform)
{
    // Chi-square distance of page counts against the uniform expectation.
    const std::uint64_t pages = 64;
    auto chi2 = [&](GeneratorKind g, double skew) {
        auto s = spec_of(g, pages * kPageSize, 100000, 3);
        s.zipf_skew = skew;
        std::vector<double> n(pages, 0.0);
        for (const auto& e : generate(s))
            n[e.vaddr.page().value] += 1;
        const double expect = 100000.0 / pages;
        double x = 0;
        for (double c : n)
            x += (c - expect) * (c - expect) / expect;
        return x;
    };
    // 63 degrees of freedom: the 99.9th percentile is about 103.4.
    EXPECT_LT(chi2(GeneratorKind::Zipf, 0.0), 103.4);
    EXPECT_LT(chi2(GeneratorKind::Uniform, 0.0), 103.4);
    EXPECT_GT(chi2(GeneratorKind::Zipf, 1.0), 1000.0);
}

TEST(Workload, InvalidSpecsAreRejected)
{
    EXPECT_THROW(generate(spec_of(GeneratorKind::Uniform, 64 * MiB, 0)), ConfigError);
    EXPECT_THROW(generate(spec_of(GeneratorKind::Uniform, 0, 10)), ConfigError);
    auto s = spec_of(GeneratorKind::Uniform, 1 * MiB, 10);
    s.rw_ratio = 1.5;
    EXPECT_THROW(generate(s), ConfigError);
}

TEST(TraceFile, ParsesTwoEvents)
{
    std::istringstream in("0 R 0x1000 3\n1 W 0x2000 0");
    const auto t = parse_trace(in);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0], (TraceEvent{0, AccessKind::Read, VirtAddr{0x1000}, 3}));
    EXPECT_EQ(t[1], (TraceEvent{1, AccessKind::Write, VirtAddr{0x2000}, 0}));
}

TEST(TraceFile, RejectsNonMonotoneSequence)
{
    std::istringstream in("0 R 0x1000 3\n0 W 0x2000 0\n");
    try {
        parse_trace(in, "t");
        FAIL() << "expected a parse error";
    } catch (const TraceParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("non-monotone sequence"), std::string::npos);
    }
}

TEST(TraceFile, EmptyFileIsAConfigurationError)
{
    std::istringstream in("");
    EXPECT_THROW(parse_trace(in), ConfigError);
    std::istringstream comments("# nothing\n\n");
    EXPECT_THROW(parse_trace(comments), ConfigError);
}

TEST(TraceFile, MalformedLinesNameTheLine)
{
    std::istringstream in("0 R 0x1000 3\n1 Q 0x2000 0\n");
    try {
        parse_trace(in);
        FAIL();
    } catch (const TraceParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(TraceFile, WriteThenParseRoundTrips)
{
    auto s = spec_of(GeneratorKind::Zipf, 8 * MiB, 1000, 5);
    const auto t = generate(s);
    std::stringstream io;
    write_trace(io, t);
    EXPECT_EQ(parse_trace(io), t);
}
