#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfrag/backend.hpp"
#include "dfrag/vecspace.hpp"

namespace dfrag {

class EmbeddingCache;

/// One benchmark item.
struct QARecord {
    std::string id;
    std::string question;
    std::string context;
    std::vector<std::string> goldAnswers;
    std::string datasetName;
};

/// Contiguous word window of a document. `chunkId` is the window's position.
struct Chunk {
    std::size_t chunkId = 0;
    std::string text;
    std::size_t wordCount = 0;
    std::optional<Embedding> embedding;
};

enum class DatasetFormat { LongBenchJsonl, InfBenchJsonl };

std::optional<DatasetFormat> parseDatasetFormat(std::string_view name);
std::string_view toString(DatasetFormat format);

/// JSON keys a loader reads. The defaults per format match the published
/// LongBench and InfiniteBench En.QA releases.
struct FieldMapping {
    std::string id;
    std::string question;
    std::string context;
    std::string answers;
    std::string dataset = "dataset";

    static FieldMapping forFormat(DatasetFormat format);
};

/// Reads one record per non-blank JSONL line, preserving file order.
///
/// A missing id is synthesized as "row<N>" (N = 0-based record index);
/// numeric ids are stringified; a scalar answer is wrapped into a list.
/// `datasetName` comes from the mapping's dataset key when present, else
/// the file stem. Throws ParseError (detail = line number) and MissingField
/// (detail = key).
std::vector<QARecord> loadDataset(const std::filesystem::path& path, DatasetFormat format,
                                  const std::optional<FieldMapping>& mapping = std::nullopt);

/// Splits on any Unicode whitespace; tokens are kept byte-for-byte.
std::vector<std::string_view> splitWords(std::string_view text);

/// Non-overlapping windows of exactly `w` words; the last may be shorter.
std::vector<Chunk> chunkDocument(std::string_view context, std::size_t w);

struct EmbedOptions {
    std::string modelId = "multi-qa-mpnet-base-cos-v1";
    // Texts per service request.
    std::size_t batchSize = 1;
    // Concurrent requests issued by one embedChunks call.
    std::size_t maxInFlight = 8;
};

/// Attaches a unit-norm embedding to every chunk. Cached vectors skip the
/// service; fresh ones are normalized and appended to the cache in chunk
/// order. `cache` may be null.
std::vector<Chunk> embedChunks(std::vector<Chunk> chunks, EmbeddingBackend& client,
                               EmbeddingCache* cache, const EmbedOptions& options = {});

/// Embeds a single text through the same cache path (used for queries).
Embedding embedText(const std::string& text, EmbeddingBackend& client, EmbeddingCache* cache,
                    const EmbedOptions& options = {});

}  // namespace dfrag
