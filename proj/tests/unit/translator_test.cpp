#include <gtest/gtest.h>

#include <algorithm>
#include <array>

#include "deact/translator.hpp"

using namespace deact;

namespace {

constexpr std::uint64_t kBase = 0x3FF0'0000;

} // namespace

TEST(TranslationCache, Geometry)
{
    TranslationCache c(kBase, 1 * MiB, 1);
    EXPECT_EQ(c.sets(), 16384u);
    EXPECT_EQ(c.set_index(NodePage{0x4005}), 5u);
    EXPECT_EQ(c.set_address(NodePage{0x4005}), NodePhysAddr{kBase + 5 * 64});
}

TEST(FamTranslator, HitRewritesAddressAndSetsV)
{
    FamTranslator t(kBase, 1 * MiB, 1);
    t.cache().install(NodePage{0x4005}, FamPage{0x00ABC});
    const auto out = t.translate(NodePhysAddr{(0x4005u << 12) | 0x123});
    EXPECT_TRUE(out.v);
    EXPECT_EQ(out.fam, FamAddr{0x00ABC000 + 0x123});
    EXPECT_EQ(t.counters().hits, 1u);
    EXPECT_EQ(t.counters().dram_reads, 1u);
}

TEST(FamTranslator, MissClearsVAndKeepsNodeAddress)
{
    FamTranslator t(kBase, 1 * MiB, 1);
    const NodePhysAddr a{(0x4005u << 12) | 0x40};
    const auto out = t.translate(a);
    EXPECT_FALSE(out.v);
    EXPECT_EQ(out.node, a);
    EXPECT_EQ(out.fam, FamAddr{0});
    EXPECT_EQ(t.counters().misses, 1u);
}

TEST(FamTranslator, EmptySetInstallsWithoutEviction)
{
    FamTranslator t(kBase, 1 * MiB, 1);
    t.handle_mapping_response(NodePage{0x4005}, FamPage{0x77});
    EXPECT_EQ(t.counters().evictions, 0u);
    EXPECT_EQ(t.counters().dram_reads, 1u);
    EXPECT_EQ(t.counters().dram_writes, 1u);
    EXPECT_TRUE(t.translate(NodePhysAddr{0x4005u << 12}).v);
}

TEST(FamTranslator, FullSetEvictsExactlyOne)
{
    FamTranslator t(kBase, 64, 7); // one set
    for (std::uint64_t p = 1; p <= 4; ++p)
        t.handle_mapping_response(NodePage{p}, FamPage{p + 100});
    EXPECT_EQ(t.cache().occupancy(), 4u);
    const auto evicted = t.cache().install(NodePage{5}, FamPage{105});
    ASSERT_TRUE(evicted);
    EXPECT_GE(evicted->value, 1u);
    EXPECT_LE(evicted->value, 4u);
    EXPECT_FALSE(t.cache().probe(*evicted));
    EXPECT_TRUE(t.cache().probe(NodePage{5}));
    int present = 0;
    for (std::uint64_t p = 1; p <= 4; ++p)
        present += t.cache().probe(NodePage{p}).has_value();
    EXPECT_EQ(present, 3);
}

TEST(FamTranslator, VictimChoiceIsSeeded)
{
    auto victims = [](std::uint64_t seed) {
        TranslationCache c(kBase, 64, seed);
        std::vector<std::uint64_t> out;
        for (std::uint64_t p = 1; p < 200; ++p)
            if (auto e = c.install(NodePage{p}, FamPage{p}))
                out.push_back(e->value);
        return out;
    };
    EXPECT_EQ(victims(3), victims(3));
    EXPECT_NE(victims(3), victims(4));
}

TEST(TranslationCache, ReplacementIsUniform)
{
    TranslationCache c(kBase, 64, 11);
    for (std::uint64_t p = 1; p <= 4; ++p)
        c.install(NodePage{p}, FamPage{p});
    // Track which way each eviction hit by keeping the way -> page map.
    std::array<int, 4> count{};
    std::vector<std::uint64_t> way_page = {1, 2, 3, 4};
    for (std::uint64_t p = 5; p < 40005; ++p) {
        const auto e = c.install(NodePage{p}, FamPage{p});
        ASSERT_TRUE(e);
        const auto w = std::find(way_page.begin(), way_page.end(), e->value) - way_page.begin();
        ASSERT_LT(w, 4);
        ++count[w];
        way_page[w] = p;
    }
    for (int n : count)
        EXPECT_NEAR(n, 10000, 400);
}

TEST(TranslationCache, PageZeroIsNeverAValue)
{
    TranslationCache c(kBase, 1 * MiB, 1);
    EXPECT_THROW(c.install(NodePage{9}, FamPage{0}), std::invalid_argument);
}

TEST(TranslationCache, AtMostOneWayMatchesATag)
{
    TranslationCache c(kBase, 64, 1);
    c.install(NodePage{9}, FamPage{1});
    c.install(NodePage{9}, FamPage{2});
    EXPECT_EQ(c.occupancy(), 1u);
    EXPECT_EQ(c.probe(NodePage{9}), FamPage{2});
}

TEST(OutstandingMappingList, ReaddressesResponse)
{
    OutstandingMappingList oml;
    ASSERT_TRUE(oml.reserve());
    oml.bind(FamPage{0x00ABC}, NodePage{0x4005});
    EXPECT_EQ(oml.map_response(FamAddr{0x00ABC040}), NodePhysAddr{(0x4005u << 12) | 0x040});
    EXPECT_EQ(oml.in_use(), 0u);
}

TEST(OutstandingMappingList, DuplicateResponseIsAViolation)
{
    OutstandingMappingList oml;
    oml.reserve();
    oml.bind(FamPage{0x00ABC}, NodePage{0x4005});
    oml.map_response(FamAddr{0x00ABC040});
    EXPECT_THROW(oml.map_response(FamAddr{0x00ABC040}), ProtocolViolation);
}

TEST(OutstandingMappingList, CapacityBoundsReservations)
{
    OutstandingMappingList oml(128);
    for (int i = 0; i < 128; ++i)
        ASSERT_TRUE(oml.reserve());
    EXPECT_FALSE(oml.reserve());
    oml.release_reserved();
    EXPECT_TRUE(oml.reserve());
}

TEST(OutstandingMappingList, SharedPageBindingsAreCounted)
{
    OutstandingMappingList oml;
    oml.reserve();
    oml.reserve();
    oml.bind(FamPage{5}, NodePage{9});
    oml.bind(FamPage{5}, NodePage{9});
    oml.map_response(FamAddr{5u << 12});
    EXPECT_EQ(oml.map_response(FamAddr{(5u << 12) | 8}), NodePhysAddr{(9u << 12) | 8});
    EXPECT_THROW(oml.bind(FamPage{5}, NodePage{9}), ProtocolViolation); // nothing reserved
}

TEST(PendingMissQueue, DrainsExactlyOnce)
{
    PendingMissQueue q;
    auto& e = q.open(NodePage{7});
    e.waiters = {1, 2, 3};
    EXPECT_THROW(q.open(NodePage{7}), ProtocolViolation);
    EXPECT_EQ(q.resolve(NodePage{7}, FamPage{99}), (std::vector<std::uint32_t>{1, 2, 3}));
    EXPECT_THROW(q.resolve(NodePage{7}, FamPage{99}), ProtocolViolation);
    EXPECT_EQ(q.find(NodePage{7})->resolved, FamPage{99});
    q.erase(NodePage{7});
    EXPECT_EQ(q.find(NodePage{7}), nullptr);
}
