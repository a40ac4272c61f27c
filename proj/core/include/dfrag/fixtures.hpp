#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dfrag/corpus.hpp"

namespace dfrag {

struct FixtureOptions {
    std::uint64_t seed = 7;
    std::size_t queries = 10;
    // Every generated chunk has exactly this many words.
    std::size_t chunkWords = 40;
    // Near-duplicate chunks about the question's subject.
    std::size_t redundantChunks = 6;
    std::size_t fillerChunks = 6;
    std::size_t embeddingDim = 64;
};

/// Synthetic two-hop QA records plus a matching mock-backend fixture.
///
/// Each question asks where the founder of a made-up company was born. The
/// document holds redundant chunks about the company (one naming the
/// founder), a distractor carrying a wrong [[place]], one evidence chunk
/// carrying the gold [[place]], and filler. Chunk order is shuffled.
struct PlantedFixture {
    std::vector<QARecord> records;
    // JSON accepted by MockBackend::fromFixtureFile: scripted plans,
    // keyword-overlap evaluator, marker generator.
    std::string mockJson;
};

/// Same options and seed give byte-identical output.
PlantedFixture makePlantedFixture(const FixtureOptions& options);

/// Writes records as LongBench-style JSONL (_id, input, context, answers,
/// dataset). Throws IoError.
void writeLongBenchJsonl(const std::vector<QARecord>& records, const std::filesystem::path& path);

struct FixturePaths {
    std::filesystem::path dataset;
    std::filesystem::path mock;
};

/// Writes dataset.jsonl and mock.json into `dir`, creating it if needed.
FixturePaths writePlantedFixture(const PlantedFixture& fixture, const std::filesystem::path& dir);

}  // namespace dfrag
