#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfrag/fixtures.hpp"
#include "dfrag/harness.hpp"
#include "dfrag/mock_backend.hpp"
#include "expect_error.hpp"

using namespace dfrag;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "dfrag-harness-test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct FixtureRun {
    FixturePaths paths;
    ExperimentConfig config;
    PlantedFixture fixture;

    FixtureRun(const std::string& name, std::size_t queries) {
        FixtureOptions opts;
        opts.queries = queries;
        opts.seed = 99;
        fixture = makePlantedFixture(opts);
        paths = writePlantedFixture(fixture, scratch(name));
        config.datasetPath = paths.dataset;
        config.mockFixtures = paths.mock;
        config.chunkWords = opts.chunkWords;
        config.promptDir = DFRAG_TEST_PROMPT_DIR;
        config.recordTimings = false;
    }
};

}  // namespace

TEST(RunMode, NamesRoundTrip) {
    for (auto m : {RunMode::Vanilla, RunMode::Fixed, RunMode::Dfrag, RunMode::DfragIc, RunMode::Oracle,
                   RunMode::ClassicMmr}) {
        EXPECT_EQ(parseRunMode(toString(m)), m);
    }
    EXPECT_FALSE(parseRunMode("best"));
}

TEST(ExperimentConfig, LambdaRules) {
    ExperimentConfig c;
    c.datasetPath = "x.jsonl";
    c.modes = {RunMode::Fixed};
    EXPECT_EQ(kindOf([&] { c.validate(); }), ErrorKind::ConfigError);
    c.lambda = 0.5;
    EXPECT_NO_THROW(c.validate());
    c.modes = {RunMode::Dfrag};
    EXPECT_EQ(kindOf([&] { c.validate(); }), ErrorKind::ConfigError);
    c.lambda.reset();
    c.k = 0;
    EXPECT_EQ(kindOf([&] { c.validate(); }), ErrorKind::ConfigError);
}

TEST(RunExperiment, VanillaRowsAndMean) {
    FixtureRun s("vanilla", 3);
    s.config.modes = {RunMode::Vanilla};
    const auto report = runExperiment(s.config);
    ASSERT_EQ(report.perQuery.size(), 3u);
    const double hand = (report.perQuery[0].f1 + report.perQuery[1].f1 + report.perQuery[2].f1) / 3.0;
    EXPECT_NEAR(*report.meanF1(RunMode::Vanilla), hand, 1e-9);
    EXPECT_EQ(report.perQuery[1].id, "planted-1");

    const auto files = emitReport(report, scratch("vanilla-out"));
    std::istringstream csv(slurp(files[0]));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, kPerQueryHeader);
    double sum = 0.0;
    int rows = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> cols;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
        sum += std::stod(cols[3]);
        ++rows;
    }
    EXPECT_EQ(rows, 3);
    EXPECT_EQ(sum / 3.0, *report.meanF1(RunMode::Vanilla));
}

TEST(RunExperiment, GapClosureJoinsOnIds) {
    FixtureRun s("gap", 6);
    s.config.modes = {RunMode::Oracle, RunMode::Dfrag, RunMode::Vanilla};
    const auto report = runExperiment(s.config);
    EXPECT_EQ(report.perQuery.size(), 18u);
    const auto g = joinedGapClosure(report.perQuery);
    ASSERT_TRUE(g.has_value());
    const double v = *report.meanF1(RunMode::Vanilla), o = *report.meanF1(RunMode::Oracle),
                 d = *report.meanF1(RunMode::Dfrag);
    EXPECT_NEAR(*g, (d - v) / (o - v), 1e-12);
    const auto files = emitReport(report, scratch("gap-out"));
    EXPECT_NE(slurp(files[1]).find("## Gap closure"), std::string::npos);

    std::vector<QueryRow> noVanilla;
    for (const auto& r : report.perQuery) {
        if (r.mode != RunMode::Vanilla) noVanilla.push_back(r);
    }
    EXPECT_FALSE(joinedGapClosure(noVanilla));
}

TEST(RunExperiment, RecordFailuresAreIsolated) {
    FixtureRun s("faults", 4);
    s.config.modes = {RunMode::Vanilla};
    auto mock = MockBackend::fromFixtureFile(*s.config.mockFixtures);
    const std::string badQuestion = s.fixture.records[2].question;
    mock->setRule("generator", [&](const ChatRequest&, const std::string& prompt) -> std::string {
        if (prompt.find(badQuestion) != std::string::npos) throw Error(ErrorKind::BadStatus, "nope", "", 400);
        return "fine";
    });
    const auto report = runExperiment(s.config, *mock, *mock);
    EXPECT_EQ(report.perQuery.size(), 3u);
    EXPECT_EQ(report.failures.at(RunMode::Vanilla), 1u);
    ASSERT_EQ(report.failureNotes.size(), 1u);
    EXPECT_NE(report.failureNotes[0].find("planted-2"), std::string::npos);

    mock->setRule("generator", mock::constant(""));
    EXPECT_EQ(kindOf([&] { runExperiment(s.config, *mock, *mock); }), ErrorKind::ServiceError);
}

TEST(RunExperiment, WarmCacheMakesNoEmbeddingCalls) {
    FixtureRun s("cache", 3);
    s.config.modes = {RunMode::Vanilla};
    s.config.cachePath = scratch("cache-file") / "emb.jsonl";
    auto mock = MockBackend::fromFixtureFile(*s.config.mockFixtures);
    runExperiment(s.config, *mock, *mock);
    EXPECT_GT(mock->embedCalls(), 0u);
    mock->resetCounters();
    runExperiment(s.config, *mock, *mock);
    EXPECT_EQ(mock->embedCalls(), 0u);
}

TEST(RunExperiment, MissingDatasetIsADatasetError) {
    ExperimentConfig c;
    c.datasetPath = "/nonexistent/data.jsonl";
    MockBackend mock;
    EXPECT_EQ(kindOf([&] { runExperiment(c, mock, mock); }), ErrorKind::DatasetError);
}

TEST(EmitReport, EmptyReportStillWritesFiles) {
    const auto files = emitReport(RunReport{}, scratch("empty"));
    EXPECT_EQ(slurp(files[0]), std::string(kPerQueryHeader) + "\n");
    EXPECT_NE(slurp(files[1]).find("No successful samples."), std::string::npos);
}

TEST(EmitReport, ByteStableAcrossRuns) {
    FixtureRun s("stable", 4);
    s.config.modes = {RunMode::Dfrag, RunMode::Oracle, RunMode::Vanilla};
    s.config.recordWorkers = 3;
    const auto a = emitReport(runExperiment(s.config), scratch("stable-a"));
    const auto b = emitReport(runExperiment(s.config), scratch("stable-b"));
    EXPECT_EQ(slurp(a[0]), slurp(b[0]));
    EXPECT_EQ(slurp(a[1]), slurp(b[1]));
}

TEST(MeasureLatency, MoreWorkersIsNotSlower) {
    FixtureRun s("latency", 1);
    auto mock = MockBackend::fromFixtureFile(*s.config.mockFixtures);
    mock->setChatDelay(std::chrono::milliseconds(20));
    const std::vector<std::size_t> ws{1, 2, 5};
    const auto t = measureLatency(s.config, ws, *mock, *mock);
    EXPECT_GE(t.at(1) * 1.15, t.at(2));
    EXPECT_GE(t.at(2) * 1.15, t.at(5));
    EXPECT_NEAR(t.at(1), 200.0, 30.0);
}
