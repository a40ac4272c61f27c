#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dfrag/vecspace.hpp"

namespace dfrag {

struct EmbeddingCacheEntry {
    std::string key;
    std::size_t dim = 0;
    std::vector<double> values;
};

/// Lowercase hex SHA-256 digest.
std::string sha256Hex(std::string_view data);

/// Hex SHA-256 of modelId, a NUL separator, then the text.
std::string embeddingCacheKey(std::string_view modelId, std::string_view text);

/// Append-only JSONL store of embeddings keyed by content hash.
///
/// Each line is {"key":..., "dim":..., "values":[...]}. Loading a file with
/// a malformed line throws CacheCorrupt (detail = 1-based line number).
/// Lookups are concurrent; writes are serialized and flushed per entry.
/// A cache constructed without a path is memory-only.
class EmbeddingCache {
public:
    EmbeddingCache() = default;
    explicit EmbeddingCache(std::filesystem::path path);

    EmbeddingCache(const EmbeddingCache&) = delete;
    EmbeddingCache& operator=(const EmbeddingCache&) = delete;

    std::optional<Embedding> lookup(const std::string& key) const;

    /// No-op if the key is already present.
    void put(const std::string& key, const Embedding& embedding);

    std::size_t size() const;
    const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

private:
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Embedding> entries_;
    std::ofstream out_;
};

}  // namespace dfrag
