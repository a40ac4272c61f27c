#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "dfrag/retrieval.hpp"
#include "expect_error.hpp"
#include "oracles.hpp"

using namespace dfrag;

namespace {

Chunk chunk(std::size_t id, std::vector<double> v) {
    Chunk c;
    c.chunkId = id;
    c.text = "c" + std::to_string(id);
    c.wordCount = 1;
    c.embedding = Embedding::normalize(v);
    return c;
}

Embedding unit(std::vector<double> v) { return Embedding::normalize(v); }

}  // namespace

TEST(LambdaGrid, Defaults) {
    const auto sweep = LambdaGrid::sweepDefault();
    const auto dfrag = LambdaGrid::dfragDefault();
    ASSERT_EQ(sweep.size(), 11u);
    ASSERT_EQ(dfrag.size(), 10u);
    EXPECT_TRUE(sweep.includesZero());
    EXPECT_FALSE(dfrag.includesZero());
    EXPECT_EQ(dfrag[5], 0.6);
    EXPECT_EQ(sweep[3], 0.3);
    EXPECT_EQ(dfrag[9], 1.0);
}

TEST(LambdaGrid, RejectsBadValues) {
    EXPECT_EQ(kindOf([] { LambdaGrid::fromValues({}); }), ErrorKind::InvalidGrid);
    EXPECT_EQ(kindOf([] { LambdaGrid::fromValues({0.2, 0.1}); }), ErrorKind::InvalidGrid);
    EXPECT_EQ(kindOf([] { LambdaGrid::fromValues({0.1, 0.1}); }), ErrorKind::InvalidGrid);
    EXPECT_EQ(kindOf([] { LambdaGrid::fromValues({0.5, 1.5}); }), ErrorKind::InvalidGrid);
}

TEST(GmmrScore, HandComputed) {
    const auto q = unit({1, 0});
    const std::vector<Chunk> selected{chunk(0, {1, 0})};
    const auto c = chunk(1, {0, 1});
    EXPECT_NEAR(gmmrScore(q, c, selected, 0.5), 0.5 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(gmmrScore(q, c, selected, 1.0), 0.0, 1e-12);
    EXPECT_NEAR(gmmrScore(q, c, selected, 0.0), std::sqrt(2.0), 1e-12);
}

TEST(GmmrScore, UsesCentroidOfAllSelected) {
    const auto q = unit({1, 0, 0});
    const std::vector<Chunk> selected{chunk(0, {1, 0, 0}), chunk(1, {0, 1, 0})};
    const auto c = chunk(2, {0, 0, 1});
    // Centroid (0.5, 0.5, 0) is orthogonal to c: distance sqrt(2).
    EXPECT_NEAR(gmmrScore(q, c, selected, 0.3), 0.7 * std::sqrt(2.0), 1e-12);
}

TEST(ClassicMmrScore, HandComputed) {
    const auto q = unit({1, 0});
    const std::vector<Chunk> selected{chunk(0, {1, 0}), chunk(1, {0, 1})};
    const auto c = chunk(2, {1, 1});
    const double cq = std::sqrt(0.5);
    EXPECT_NEAR(classicMmrScore(q, c, selected, 0.4), 0.4 * cq - 0.6 * cq, 1e-12);
}

TEST(Scores, EmptySelectionThrows) {
    const auto q = unit({1, 0});
    const auto c = chunk(0, {1, 0});
    EXPECT_EQ(kindOf([&] { gmmrScore(q, c, {}, 0.5); }), ErrorKind::EmptySet);
    EXPECT_EQ(kindOf([&] { classicMmrScore(q, c, {}, 0.5); }), ErrorKind::EmptySet);
}

TEST(SelectGmmr, DiversityPicksTheOutlierAtLowLambda) {
    const auto q = unit({1, 0, 0.05});
    const std::vector<Chunk> pool{chunk(0, {1, 0, 0}), chunk(1, {1, 0.05, 0}), chunk(2, {0, 0, 1})};
    EXPECT_EQ(selectGmmr(q, pool, 2, 0.0).chunkIds(), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(selectGmmr(q, pool, 2, 1.0).chunkIds(), (std::vector<std::size_t>{0, 1}));
}

TEST(SelectGmmr, TiesGoToLowerChunkId) {
    const auto q = unit({1, 0});
    const std::vector<Chunk> pool{chunk(4, {0, 1}), chunk(2, {0, 1}), chunk(9, {1, 0})};
    EXPECT_EQ(selectGmmr(q, pool, 3, 0.5).chunkIds(), (std::vector<std::size_t>{9, 2, 4}));
    EXPECT_EQ(selectTopKCosine(q, pool, 3).chunkIds(), (std::vector<std::size_t>{9, 2, 4}));
}

TEST(SelectGmmr, ReturnsWholePoolWhenKExceedsIt) {
    const std::vector<Chunk> pool{chunk(0, {1, 0}), chunk(1, {0, 1})};
    const auto set = selectGmmr(unit({1, 1}), pool, 5, 0.4);
    EXPECT_EQ(set.chunks.size(), 2u);
    EXPECT_EQ(set.lambda, 0.4);
}

TEST(SelectGmmr, Errors) {
    const auto q = unit({1, 0});
    const std::vector<Chunk> pool{chunk(0, {1, 0})};
    std::vector<Chunk> raw{pool[0]};
    raw[0].embedding.reset();
    EXPECT_EQ(kindOf([&] { selectGmmr(q, {}, 5, 0.5); }), ErrorKind::EmptyPool);
    EXPECT_EQ(kindOf([&] { selectGmmr(q, pool, 0, 0.5); }), ErrorKind::InvalidArgument);
    EXPECT_EQ(kindOf([&] { selectGmmr(q, raw, 1, 0.5); }), ErrorKind::NotEmbedded);
    EXPECT_EQ(kindOf([&] { selectGmmr(q, pool, 1, 1.2); }), ErrorKind::LambdaOutOfRange);
    EXPECT_EQ(kindOf([&] { selectGmmr(q, pool, 1, std::numeric_limits<double>::quiet_NaN()); }),
              ErrorKind::LambdaOutOfRange);
    EXPECT_EQ(kindOf([&] { selectGmmr(unit({1, 0, 0}), pool, 1, 0.5); }), ErrorKind::DimMismatch);
}

TEST(SelectGmmr, MatchesNaiveOracleOnLargerPools) {
    std::mt19937_64 rng(77);
    const auto grid = LambdaGrid::sweepDefault();
    for (int trial = 0; trial < 60; ++trial) {
        const auto pool = oracle::randomPool(rng, 12, 20 + rng() % 40);
        const auto q = oracle::randomUnit(rng, 12);
        for (double lambda : grid.values()) {
            ASSERT_EQ(selectGmmr(q, pool, 5, lambda).chunkIds(), oracle::naiveGmmr(oracle::toVec(q), pool, 5, lambda));
        }
    }
}

TEST(SelectClassicMmr, MatchesNaiveOracle) {
    std::mt19937_64 rng(78);
    for (int trial = 0; trial < 60; ++trial) {
        const auto pool = oracle::randomPool(rng, 8, 5 + rng() % 30);
        const auto q = oracle::randomUnit(rng, 8);
        for (double lambda : {0.0, 0.2, 0.5, 0.9}) {
            ASSERT_EQ(selectClassicMmr(q, pool, 5, lambda).chunkIds(),
                      oracle::naiveClassicMmr(oracle::toVec(q), pool, 5, lambda));
        }
    }
}

TEST(SelectChunks, DispatchesOnSelector) {
    std::mt19937_64 rng(79);
    const auto pool = oracle::randomPool(rng, 6, 15);
    const auto q = oracle::randomUnit(rng, 6);
    EXPECT_EQ(selectChunks(Selector::Gmmr, q, pool, 5, 0.3).chunkIds(), selectGmmr(q, pool, 5, 0.3).chunkIds());
    EXPECT_EQ(selectChunks(Selector::ClassicMmr, q, pool, 5, 0.3).chunkIds(),
              selectClassicMmr(q, pool, 5, 0.3).chunkIds());
}

TEST(SampleUniform, OneSetPerGridValueInOrder) {
    std::mt19937_64 rng(80);
    const auto pool = oracle::randomPool(rng, 10, 25);
    const auto q = oracle::randomUnit(rng, 10);
    const auto grid = LambdaGrid::dfragDefault();
    const auto serial = sampleUniform(q, pool, 5, grid);
    const auto parallel = sampleUniform(q, pool, 5, grid, Selector::Gmmr, 4);
    ASSERT_EQ(serial.size(), grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_EQ(serial[i].lambda, grid[i]);
        EXPECT_EQ(serial[i].chunkIds(), parallel[i].chunkIds());
        EXPECT_EQ(serial[i].chunkIds(), selectGmmr(q, pool, 5, grid[i]).chunkIds());
    }
}

TEST(SampleBinarySearch, FindsPeakOfUnimodalProfile) {
    std::mt19937_64 rng(81);
    const auto pool = oracle::randomPool(rng, 10, 25);
    const auto q = oracle::randomUnit(rng, 10);
    const auto grid = LambdaGrid::dfragDefault();
    for (std::size_t peak = 0; peak < grid.size(); ++peak) {
        std::size_t calls = 0;
        const auto r = sampleBinarySearch(q, pool, 5, grid, [&](const CandidateSet& s) {
            ++calls;
            return -static_cast<int>(std::lround(std::abs(s.lambda - grid[peak]) * 10));
        });
        EXPECT_EQ(r.bestIndex, peak);
        EXPECT_EQ(r.bestSet.lambda, grid[peak]);
        EXPECT_LE(calls, 8u);
        EXPECT_EQ(calls, r.probedSets.size());
        for (const auto& s : r.probedSets) EXPECT_TRUE(s.supportScore.has_value());
    }
}

TEST(SampleBinarySearch, RejectsSingletonGrid) {
    std::mt19937_64 rng(82);
    const auto pool = oracle::randomPool(rng, 4, 6);
    const auto q = oracle::randomUnit(rng, 4);
    EXPECT_EQ(kindOf([&] {
                  sampleBinarySearch(q, pool, 5, LambdaGrid::fromValues({0.5}),
                                     [](const CandidateSet&) { return 0; });
              }),
              ErrorKind::GridTooSmall);
}
