#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace xflow;

TEST(Preaggregate, FewerPointsThanGroupsKeepsEachPoint) {
    const std::vector<PointFlow> recs{{0, 0, 1, 0, 2}, {1, 0, 0, 1, 3}, {0, 0, 0, 1, 1}};
    const auto p = preaggregate(recs, 10, 1);
    EXPECT_EQ(p.dataset.location_count(), 3u);
    EXPECT_EQ(p.dataset.total_flow(), 6);
    EXPECT_EQ(p.dropped_self_volume, 0);
}

TEST(Preaggregate, TwoBlobsBecomeTwoLocations) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> jitter(0.0, 0.01);
    std::vector<PointFlow> recs;
    Volume sent = 0;
    for (int i = 0; i < 200; ++i) {
        const bool east = i % 3 != 0;
        const double ox = (east ? 0.0 : 5.0) + jitter(gen), oy = jitter(gen);
        const double dx = (east ? 5.0 : 0.0) + jitter(gen), dy = jitter(gen);
        recs.push_back({ox, oy, dx, dy, 1 + i % 4});
        sent += 1 + i % 4;
    }
    const auto p = preaggregate(recs, 2, 7);
    ASSERT_EQ(p.dataset.location_count(), 2u);
    EXPECT_EQ(p.dataset.flow_count(), 2u);
    EXPECT_EQ(p.dataset.total_flow(), sent);
    EXPECT_EQ(p.group_sizes[0] + p.group_sizes[1], 400u);
    for (LocIndex i = 0; i < 2; ++i) {
        const double x = p.dataset.location(i).x;
        EXPECT_TRUE(std::abs(x) < 0.05 || std::abs(x - 5.0) < 0.05);
    }
}

TEST(Preaggregate, VolumeIsConservedOrReportedDropped) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<PointFlow> recs;
        Volume sent = 0;
        for (int i = 0; i < 150; ++i) {
            recs.push_back({u(gen), u(gen), u(gen), u(gen), 1 + i % 3});
            sent += 1 + i % 3;
        }
        const auto a = preaggregate(recs, 12, static_cast<std::uint64_t>(rep));
        EXPECT_EQ(a.dataset.total_flow() + a.dropped_self_volume, sent);
        EXPECT_LE(a.dataset.location_count(), 12u);
        const auto b = preaggregate(recs, 12, static_cast<std::uint64_t>(rep));
        EXPECT_EQ(a.dataset.flows(), b.dataset.flows());
    }
}

TEST(Preaggregate, Errors) {
    EXPECT_THROW(preaggregate({}, 3, 1), std::invalid_argument);
    EXPECT_THROW(preaggregate({{0, 0, 1, 1, 1}}, 1, 1), std::invalid_argument);
    EXPECT_THROW(preaggregate({{0, 0, 1, 1, 0}}, 2, 1), std::invalid_argument);
    // two points close together, one far away with k = 2: the near pair collapses
    EXPECT_THROW(preaggregate({{0, 0, 0.001, 0, 1}, {9, 9, 9, 9.001, 1}}, 2, 1), std::invalid_argument);
}
