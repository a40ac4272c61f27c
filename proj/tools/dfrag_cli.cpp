#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfrag/error.hpp"
#include "dfrag/fixtures.hpp"
#include "dfrag/harness.hpp"

namespace {

struct CommonFlags {
    std::string dataset;
    std::string format = "longbench-jsonl";
    std::size_t chunkWords = 200;
    std::size_t k = dfrag::kDefaultK;
    std::string sampler = "uniform";
    std::size_t workers = 4;
    std::string endpoint;
    std::string model;
    std::string embedModel;
    std::string cache;
    std::string mockFixtures;
    std::string prompts;
    std::size_t limit = 0;
};

void addCommon(CLI::App& app, CommonFlags& f) {
    app.add_option("--dataset", f.dataset, "JSONL dataset file")->required()->check(CLI::ExistingFile);
    app.add_option("--format", f.format, "longbench-jsonl or infbench-jsonl")->capture_default_str();
    app.add_option("--chunk-words", f.chunkWords, "Words per chunk")->capture_default_str();
    app.add_option("--k", f.k, "Chunks retrieved per query")->capture_default_str();
    app.add_option("--sampler", f.sampler, "uniform or binary")->capture_default_str();
    app.add_option("--workers", f.workers, "Concurrent Evaluator calls")->capture_default_str();
    app.add_option("--endpoint", f.endpoint, "Base URL of an OpenAI-compatible service");
    app.add_option("--model", f.model, "Chat model id");
    app.add_option("--embed-model", f.embedModel, "Embedding model id");
    app.add_option("--cache", f.cache, "Embedding cache file (JSONL)");
    app.add_option("--mock-fixtures", f.mockFixtures, "Use the mock backend with this fixture file")
        ->check(CLI::ExistingFile);
    app.add_option("--prompts", f.prompts, "Directory holding the prompt templates")->check(CLI::ExistingDirectory);
    app.add_option("--limit", f.limit, "Only the first N records");
}

dfrag::ExperimentConfig toConfig(const CommonFlags& f) {
    dfrag::ExperimentConfig c;
    c.datasetPath = f.dataset;
    const auto format = dfrag::parseDatasetFormat(f.format);
    if (!format) throw dfrag::Error(dfrag::ErrorKind::ConfigError, "unknown dataset format", f.format);
    c.datasetFormat = *format;
    c.chunkWords = f.chunkWords;
    c.k = f.k;
    if (f.sampler == "uniform") {
        c.sampler = dfrag::SamplerKind::Uniform;
    } else if (f.sampler == "binary") {
        c.sampler = dfrag::SamplerKind::BinarySearch;
    } else {
        throw dfrag::Error(dfrag::ErrorKind::ConfigError, "unknown sampler", f.sampler);
    }
    c.workers = f.workers;
    if (!f.endpoint.empty()) c.endpoint = f.endpoint;
    if (!f.model.empty()) c.chatModel = f.model;
    if (!f.embedModel.empty()) c.embedModel = f.embedModel;
    if (!f.cache.empty()) c.cachePath = f.cache;
    if (!f.mockFixtures.empty()) c.mockFixtures = f.mockFixtures;
    if (!f.prompts.empty()) c.promptDir = f.prompts;
    if (f.limit > 0) c.limit = f.limit;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diversity-focused retrieval experiments"};
    app.require_subcommand(1);

    CommonFlags runFlags;
    std::vector<std::string> modes{"dfrag"};
    std::optional<double> lambda;
    std::string out = "results";
    std::size_t recordWorkers = 1;
    bool noTimings = false;
    auto* run = app.add_subcommand("run", "Run one or more retrieval modes and write a report");
    addCommon(*run, runFlags);
    run->add_option("--mode", modes, "vanilla, fixed, dfrag, dfrag_ic, oracle, classic_mmr (repeatable)")
        ->capture_default_str();
    run->add_option("--lambda", lambda, "λ for fixed mode");
    run->add_option("--out", out, "Output directory")->capture_default_str();
    run->add_option("--record-workers", recordWorkers, "Records processed concurrently")->capture_default_str();
    run->add_flag("--no-timings", noTimings, "Write latency as 0 for byte-stable reports");

    CommonFlags latFlags;
    std::vector<std::size_t> workerCounts{1, 2, 5, 10};
    auto* latency = app.add_subcommand("latency", "Time the Evaluator stage across worker counts");
    addCommon(*latency, latFlags);
    latency->add_option("--worker-counts", workerCounts, "Worker counts to time")->capture_default_str();

    dfrag::FixtureOptions fx;
    std::string fixtureDir = "fixture";
    auto* make = app.add_subcommand("make-fixture", "Write a planted-evidence dataset and mock fixture");
    make->add_option("--seed", fx.seed, "Generator seed")->capture_default_str();
    make->add_option("--queries", fx.queries, "Number of records")->capture_default_str();
    make->add_option("--chunk-words", fx.chunkWords, "Words per generated chunk")->capture_default_str();
    make->add_option("--out", fixtureDir, "Output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto config = toConfig(runFlags);
            config.modes.clear();
            for (const auto& m : modes) {
                const auto mode = dfrag::parseRunMode(m);
                if (!mode) throw dfrag::Error(dfrag::ErrorKind::ConfigError, "unknown mode", m);
                config.modes.push_back(*mode);
            }
            config.lambda = lambda;
            config.outputDir = out;
            config.recordWorkers = recordWorkers;
            config.recordTimings = !noTimings;
            const auto report = dfrag::runExperiment(config);
            for (const auto& p : dfrag::emitReport(report, config.outputDir)) std::cout << p.string() << '\n';
        } else if (*latency) {
            const auto config = toConfig(latFlags);
            const auto timings = dfrag::measureLatency(config, workerCounts);
            std::cout << "workers,mean_ms\n";
            for (const auto& [w, ms] : timings) std::printf("%zu,%.1f\n", w, ms);
        } else if (*make) {
            const auto paths = dfrag::writePlantedFixture(dfrag::makePlantedFixture(fx), fixtureDir);
            std::cout << paths.dataset.string() << '\n' << paths.mock.string() << '\n';
        }
    } catch (const dfrag::Error& e) {
        std::cerr << "error [" << dfrag::toString(e.kind()) << "]: " << e.what();
        if (!e.detail().empty()) std::cerr << " (" << e.detail() << ')';
        std::cerr << '\n';
        return e.kind() == dfrag::ErrorKind::ConfigError ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
