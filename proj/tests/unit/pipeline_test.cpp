#include <gtest/gtest.h>

#include <mutex>
#include <random>
#include <set>

#include "dfrag/embedding_cache.hpp"
#include "dfrag/mock_backend.hpp"
#include "dfrag/pipeline.hpp"
#include "expect_error.hpp"
#include "oracles.hpp"

using namespace dfrag;

namespace {

const PromptSet& prompts() {
    static const PromptSet set = PromptSet::load(DFRAG_TEST_PROMPT_DIR);
    return set;
}

QARecord record(std::string gold = "gold") {
    return QARecord{"r1", "Where was the founder born?", "unused", {std::move(gold)}, "test"};
}

PreparedQuery randomPrepared(std::uint64_t seed, std::size_t dim = 12, std::size_t size = 30) {
    std::mt19937_64 rng(seed);
    auto pool = oracle::randomPool(rng, dim, size);
    auto q = oracle::randomUnit(rng, dim);
    return PreparedQuery{std::move(q), std::move(pool)};
}

std::string scoreLines(std::size_t steps, int each) {
    std::string out;
    for (std::size_t i = 0; i < steps; ++i) {
        out += std::to_string(i + 1) + ". Score: " + std::to_string(each) + ". Short Explanation: e" +
               std::to_string(i + 1) + "\n";
    }
    return out + "Total Score: " + std::to_string(each * static_cast<int>(steps));
}

struct Harness {
    MockBackend mock{16};
    EmbeddingCache cache;
    PipelineConfig config;
    Services services{mock, mock, &cache, prompts()};

    Harness() {
        config.retry.initialBackoff = std::chrono::milliseconds(1);
        mock.setRule("planner", mock::constant("1) Identify the founder\n2) Identify the birthplace"));
        mock.setRule("generator", mock::constant("scripted answer"));
    }
};

}  // namespace

TEST(ParsePlan, NumberedLinesBecomeSteps) {
    const auto plan = parsePlan("PLAN:\n1) Find A\n2. Find B\nnote\n  3)   Find C  \n");
    EXPECT_EQ(plan.steps, (std::vector<std::string>{"Find A", "Find B", "Find C"}));
    EXPECT_EQ(renderPlan(plan), "1) Find A\n2) Find B\n3) Find C");
}

TEST(ParsePlan, TruncatesAtMaxSteps) {
    EXPECT_EQ(parsePlan("1) a\n2) b\n3) c", 2).steps.size(), 2u);
}

TEST(ParsePlan, NoStepsIsAnError) {
    try {
        parsePlan("I cannot help with that.");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::PlanParseError);
        EXPECT_EQ(e.detail(), "I cannot help with that.");
    }
}

TEST(ParseEvaluator, WellFormed) {
    const auto s = parseEvaluatorOutput(
        "1. Score: 5. Short Explanation: named.\n2. Score: 2. Short Explanation: partial.\nTotal Score: 7", 2);
    EXPECT_EQ(s.perStep, (std::vector<int>{5, 2}));
    EXPECT_EQ(s.total, 7);
    EXPECT_EQ(s.explanations[0], "named.");
    EXPECT_TRUE(s.warnings.empty());
}

TEST(ParseEvaluator, StepSumWinsOverStatedTotal) {
    const auto s = parseEvaluatorOutput("1. Score: 4. Short Explanation: x\n2. Score: 4. Short Explanation: y\n"
                                        "Total Score: 10",
                                        2);
    EXPECT_EQ(s.total, 8);
    EXPECT_EQ(s.warnings.size(), 1u);
}

TEST(ParseEvaluator, ClampsOutOfRangeScores) {
    const auto s = parseEvaluatorOutput("1. Score: 9. Short Explanation: x\nTotal Score: 9", 1);
    EXPECT_EQ(s.perStep, std::vector<int>{5});
    EXPECT_EQ(s.total, 5);
}

TEST(ParseEvaluator, BareTotalIsSpreadAcrossSteps) {
    const auto s = parseEvaluatorOutput("Overall fine.\nTotal Score: 12", 3);
    EXPECT_EQ(s.perStep, (std::vector<int>{5, 5, 2}));
    EXPECT_EQ(s.total, 12);
    EXPECT_FALSE(s.warnings.empty());
}

TEST(ParseEvaluator, MissingStepsArePaddedWithZero) {
    const auto s = parseEvaluatorOutput("1. Score: 3. Short Explanation: x\nTotal Score: 3", 3);
    EXPECT_EQ(s.perStep, (std::vector<int>{3, 0, 0}));
    EXPECT_EQ(s.total, 3);
}

TEST(ParseEvaluator, UnparseableThrows) {
    EXPECT_EQ(kindOf([] { parseEvaluatorOutput("no numbers at all", 2); }), ErrorKind::EvalParseError);
}

TEST(SelectLambda, TieRules) {
    EXPECT_EQ(selectLambda({{0.2, 1}, {0.3, 4}, {0.9, 2}}), 0.3);
    EXPECT_EQ(selectLambda({{0.2, 4}, {0.3, 4}, {0.9, 4}}), 0.3);
    EXPECT_EQ(selectLambda({{0.4, 6}, {0.6, 6}}), 0.6);
    EXPECT_EQ(selectLambda({{0.1, 3}, {0.2, 3}, {0.7, 3}, {1.0, 3}}), 0.7);
    EXPECT_EQ(kindOf([] { selectLambda({}); }), ErrorKind::InvalidArgument);
}

TEST(GeneratorContext, LayoutWithAndWithoutNotes) {
    CandidateSet set;
    set.chunks = {Chunk{0, "first", 1, std::nullopt}, Chunk{1, "second", 1, std::nullopt}};
    EXPECT_EQ(buildGeneratorContext(set), "first\n\nsecond");
    EXPECT_EQ(buildGeneratorContext(set, "n"), "Reasoning notes:\nn\n\nfirst\n\nsecond");
    EXPECT_EQ(renderChunks(set), "\"first\"\n\"second\"");

    Plan plan{{"a", "b"}, ""};
    StepScores scores{{5, 0}, {"found a", ""}, 5, {}};
    EXPECT_EQ(buildIncrementalContext(plan, scores), "Plan:\n1) a\n2) b\nEvidence:\n1. found a");
}

TEST(PrepareQuery, DropsShortTailOnlyWhenKFullWindowsExist) {
    Harness h;
    h.config.chunkWords = 2;
    auto rec = record();
    rec.context = "a b c d e f g h i j k";
    EXPECT_EQ(prepareQuery(rec, h.config, h.services).pool.size(), 5u);
    rec.context = "a b c d e";
    EXPECT_EQ(prepareQuery(rec, h.config, h.services).pool.size(), 3u);
    h.config.dropShortTail = false;
    rec.context = "a b c d e f g h i j k";
    EXPECT_EQ(prepareQuery(rec, h.config, h.services).pool.size(), 6u);
}

TEST(RunDfrag, UniqueBestLambdaIsChosen) {
    // Find a pool where the λ = 0.7 set differs from every other grid set.
    const auto grid = LambdaGrid::dfragDefault();
    PreparedQuery prepared = randomPrepared(0);
    std::vector<CandidateSet> sets;
    for (std::uint64_t seed = 1;; ++seed) {
        ASSERT_LT(seed, 500u);
        prepared = randomPrepared(seed);
        sets = sampleUniform(prepared.query, prepared.pool, 5, grid);
        std::size_t same = 0;
        for (const auto& s : sets) same += s.chunkIds() == sets[6].chunkIds();
        if (same == 1) break;
    }
    const std::string target = renderChunks(sets[6]);

    Harness h;
    h.mock.setRule("evaluator", [&](const ChatRequest&, const std::string& prompt) {
        return scoreLines(2, prompt.ends_with(target) ? 5 : 2);
    });
    const auto r = runDfrag(record(), prepared, h.config, h.services);
    EXPECT_EQ(r.chosenLambda, 0.7);
    EXPECT_EQ(r.answer, "scripted answer");
    EXPECT_EQ(r.chosenSet.chunkIds(), sets[6].chunkIds());
    EXPECT_EQ(r.allScores.size(), 10u);
    EXPECT_EQ(r.allScores.at(0.7).total, 10);
    EXPECT_EQ(r.plan.steps.size(), 2u);
    EXPECT_EQ(h.mock.stageCalls("evaluator"), 10u);
    EXPECT_EQ(h.mock.stageCalls("planner"), 1u);
    EXPECT_EQ(h.mock.stageCalls("generator"), 1u);
}

TEST(RunDfrag, ConstantEvaluatorFallsToUpperMedian) {
    Harness h;
    h.mock.setRule("evaluator", mock::evaluatorConstant(3));
    const auto r = runDfrag(record(), randomPrepared(3), h.config, h.services);
    EXPECT_EQ(r.chosenLambda, 0.6);
}

TEST(RunDfrag, UnparseableEvaluationsScoreZero) {
    Harness h;
    h.mock.setRule("evaluator", mock::constant("I refuse."));
    const auto r = runDfrag(record(), randomPrepared(4), h.config, h.services);
    EXPECT_EQ(r.chosenLambda, 0.6);
    EXPECT_EQ(r.allScores.at(0.1).total, 0);
    EXPECT_EQ(r.warnings.size(), 10u);
}

TEST(RunDfrag, IncrementalContextReachesGenerator) {
    Harness h;
    h.mock.setRule("evaluator", mock::evaluatorConstant(4));
    std::string seen;
    std::mutex m;
    h.mock.setRule("generator", [&](const ChatRequest&, const std::string& prompt) {
        std::lock_guard lock(m);
        seen = prompt;
        return std::string("ok");
    });
    runDfrag(record(), randomPrepared(5), h.config, h.services, DfragMode::DfragIc);
    EXPECT_NE(seen.find("Reasoning notes:\nPlan:\n1) Identify the founder"), std::string::npos);
    EXPECT_NE(seen.find("1. Fixed."), std::string::npos);
}

TEST(RunDfrag, BinarySamplerProbesFewerSets) {
    Harness h;
    h.config.sampler = SamplerKind::BinarySearch;
    h.mock.setRule("evaluator", mock::evaluatorConstant(2));
    const auto r = runDfrag(record(), randomPrepared(6), h.config, h.services);
    EXPECT_LE(h.mock.stageCalls("evaluator"), 8u);
    EXPECT_EQ(r.candidateSets.size(), h.mock.stageCalls("evaluator"));
    EXPECT_TRUE(std::is_sorted(r.candidateSets.begin(), r.candidateSets.end(),
                               [](const auto& a, const auto& b) { return a.lambda < b.lambda; }));
}

TEST(RunDfrag, BinarySamplerAgreesWithUniformOnUnimodalScores) {
    const auto grid = LambdaGrid::dfragDefault();
    PreparedQuery prepared = randomPrepared(0);
    std::vector<CandidateSet> sets;
    for (std::uint64_t seed = 100;; ++seed) {
        ASSERT_LT(seed, 5000u);
        prepared = randomPrepared(seed, 24, 60);
        sets = sampleUniform(prepared.query, prepared.pool, 5, grid);
        std::set<std::vector<std::size_t>> distinct;
        for (const auto& s : sets) distinct.insert(s.chunkIds());
        if (distinct.size() == sets.size()) break;
    }
    // Strictly unimodal support peaking at the λ = 0.4 set.
    std::map<std::string, int> exact;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        exact[renderChunks(sets[i])] = 10 - static_cast<int>(i > 3 ? i - 3 : 3 - i);
    }
    auto strict = [&](const ChatRequest&, const std::string& prompt) {
        for (const auto& [chunks, score] : exact) {
            if (prompt.ends_with(chunks)) {
                return "Total Score: " + std::to_string(score);
            }
        }
        return std::string("Total Score: 0");
    };
    Harness uniform;
    uniform.mock.setRule("evaluator", strict);
    Harness binary;
    binary.config.sampler = SamplerKind::BinarySearch;
    binary.mock.setRule("evaluator", strict);
    const auto u = runDfrag(record(), prepared, uniform.config, uniform.services);
    const auto b = runDfrag(record(), prepared, binary.config, binary.services);
    EXPECT_EQ(u.chosenLambda, 0.4);
    EXPECT_EQ(b.chosenLambda, u.chosenLambda);
    EXPECT_LT(binary.mock.stageCalls("evaluator"), uniform.mock.stageCalls("evaluator"));
}

TEST(RunOracle, FindsTheOnlyLambdaCarryingTheGold) {
    // Plant the gold marker in a chunk that only the λ = 0.3 set contains.
    const auto grid = LambdaGrid::sweepDefault();
    for (std::uint64_t seed = 1;; ++seed) {
        ASSERT_LT(seed, 2000u);
        auto prepared = randomPrepared(seed);
        const auto sets = sampleUniform(prepared.query, prepared.pool, 5, grid);
        std::optional<std::size_t> planted;
        for (auto id : sets[3].chunkIds()) {
            std::size_t holders = 0;
            for (const auto& s : sets) {
                const auto ids = s.chunkIds();
                holders += std::count(ids.begin(), ids.end(), id);
            }
            if (holders == 1) planted = id;
        }
        if (!planted) continue;
        for (auto& c : prepared.pool) {
            if (c.chunkId == *planted) c.text = "born in [[gold]]";
        }
        Harness h;
        h.mock.setRule("generator", mock::generatorMarker());
        const auto r = runOracle(record(), prepared, h.config, h.services);
        EXPECT_EQ(r.bestLambda, 0.3);
        EXPECT_EQ(r.bestF1, 1.0);
        EXPECT_EQ(r.answerAtBest, "gold");
        EXPECT_EQ(r.perLambdaF1.size(), 11u);
        EXPECT_EQ(r.perLambdaF1.at(0.5), 0.0);
        return;
    }
}

TEST(RunOracle, TiesKeepTheLowestLambdaAndFailuresScoreZero) {
    Harness h;
    h.mock.setRule("generator", mock::constant("gold"));
    const auto r = runOracle(record(), randomPrepared(8), h.config, h.services);
    EXPECT_EQ(r.bestLambda, 0.0);
    EXPECT_EQ(r.bestF1, 1.0);

    Harness broken;
    broken.mock.setRule("generator", mock::constant(" "));
    const auto z = runOracle(record(), randomPrepared(8), broken.config, broken.services);
    EXPECT_EQ(z.bestF1, 0.0);
    EXPECT_EQ(z.bestLambda, 0.0);
}

TEST(RunFixedAndVanilla, UseTheExpectedSelections) {
    Harness h;
    const auto prepared = randomPrepared(9);
    const auto fixed = runFixedLambda(record(), prepared, 0.5, h.config, h.services);
    EXPECT_EQ(fixed.set.chunkIds(), selectGmmr(prepared.query, prepared.pool, 5, 0.5).chunkIds());
    EXPECT_EQ(fixed.answer, "scripted answer");
    const auto vanilla = runVanilla(record(), prepared, h.config, h.services);
    EXPECT_EQ(vanilla.set.chunkIds(), selectTopKCosine(prepared.query, prepared.pool, 5).chunkIds());
    EXPECT_EQ(kindOf([&] { runFixedLambda(record(), 1.5, h.config, h.services); }), ErrorKind::LambdaOutOfRange);
}

TEST(Statistics, HistogramAndPlanSteps) {
    std::vector<DfragResult> rs(4);
    rs[0].chosenLambda = 0.6;
    rs[1].chosenLambda = 0.6;
    rs[2].chosenLambda = 0.1;
    rs[3].chosenLambda = 0.1 + 0.2;
    rs[0].plan.steps = {"a", "b"};
    rs[1].plan.steps = {"a", "b", "c"};
    rs[2].plan.steps = {"a"};
    rs[3].plan.steps = {"a", "b"};
    const auto hist = lambdaHistogram(std::span<const DfragResult>(rs));
    EXPECT_EQ(hist.at(0.6), 2u);
    EXPECT_EQ(hist.at(0.1), 1u);
    EXPECT_EQ(hist.at(0.3), 1u);
    EXPECT_DOUBLE_EQ(meanPlanSteps(rs), 2.0);
    EXPECT_EQ(meanPlanSteps({}), 0.0);
}
