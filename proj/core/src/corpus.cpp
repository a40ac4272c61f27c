#include "dfrag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "dfrag/embedding_cache.hpp"
#include "dfrag/error.hpp"
#include "dfrag/llm.hpp"
#include "dfrag/parallel.hpp"

namespace dfrag {

using json = nlohmann::json;

std::optional<DatasetFormat> parseDatasetFormat(std::string_view name) {
    if (name == "longbench-jsonl") return DatasetFormat::LongBenchJsonl;
    if (name == "infbench-jsonl") return DatasetFormat::InfBenchJsonl;
    return std::nullopt;
}

std::string_view toString(DatasetFormat format) {
    switch (format) {
        case DatasetFormat::LongBenchJsonl: return "longbench-jsonl";
        case DatasetFormat::InfBenchJsonl: return "infbench-jsonl";
    }
    return "unknown";
}

FieldMapping FieldMapping::forFormat(DatasetFormat format) {
    switch (format) {
        case DatasetFormat::LongBenchJsonl:
            return {.id = "_id", .question = "input", .context = "context", .answers = "answers"};
        case DatasetFormat::InfBenchJsonl:
            return {.id = "id", .question = "input", .context = "context", .answers = "answer"};
    }
    return {};
}

namespace {

bool isBlank(std::string_view s) {
    return splitWords(s).empty();
}

std::string requireString(const json& obj, const std::string& key, std::size_t lineNo) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(ErrorKind::MissingField,
                    "line " + std::to_string(lineNo) + " lacks \"" + key + "\"", key);
    }
    if (!it->is_string()) {
        throw Error(ErrorKind::ParseError,
                    "line " + std::to_string(lineNo) + ": \"" + key + "\" is not a string",
                    std::to_string(lineNo));
    }
    return it->get<std::string>();
}

std::string scalarToString(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    return v.dump();
}

}  // namespace

std::vector<QARecord> loadDataset(const std::filesystem::path& path, DatasetFormat format,
                                  const std::optional<FieldMapping>& mapping) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::DatasetError, "cannot open " + path.string(), path.string());
    }
    const FieldMapping fields = mapping.value_or(FieldMapping::forFormat(format));

    std::vector<QARecord> records;
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (isBlank(line)) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(lineNo) + ": " + e.what(), std::to_string(lineNo));
        }
        if (!obj.is_object()) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(lineNo) + " is not an object",
                        std::to_string(lineNo));
        }

        QARecord rec;
        auto idIt = obj.find(fields.id);
        rec.id = (idIt != obj.end() && !idIt->is_null()) ? scalarToString(*idIt)
                                                         : "row" + std::to_string(records.size());
        rec.question = requireString(obj, fields.question, lineNo);
        rec.context = requireString(obj, fields.context, lineNo);

        auto ansIt = obj.find(fields.answers);
        if (ansIt == obj.end()) {
            throw Error(ErrorKind::MissingField,
                        "line " + std::to_string(lineNo) + " lacks \"" + fields.answers + "\"",
                        fields.answers);
        }
        if (ansIt->is_array()) {
            for (const auto& a : *ansIt) {
                rec.goldAnswers.push_back(scalarToString(a));
            }
        } else {
            rec.goldAnswers.push_back(scalarToString(*ansIt));
        }

        auto dsIt = obj.find(fields.dataset);
        rec.datasetName = (dsIt != obj.end() && dsIt->is_string()) ? dsIt->get<std::string>()
                                                                   : path.stem().string();

        if (isBlank(rec.question) || isBlank(rec.context)) {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(lineNo) + ": empty question or context",
                        std::to_string(lineNo));
        }
        if (rec.goldAnswers.empty()) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(lineNo) + ": no gold answers",
                        std::to_string(lineNo));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

namespace {

// Length in bytes of the whitespace code point starting at s[i], or 0.
std::size_t whitespaceAt(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 == ' ' || (b0 >= 0x09 && b0 <= 0x0D) || (b0 >= 0x1C && b0 <= 0x1F)) {
        return 1;
    }
    if (b0 < 0xC2 || i + 1 >= s.size()) {
        return 0;
    }
    const auto b1 = static_cast<unsigned char>(s[i + 1]);
    if (b0 == 0xC2) {
        // U+0085 NEL, U+00A0 NBSP
        return (b1 == 0x85 || b1 == 0xA0) ? 2 : 0;
    }
    if (i + 2 >= s.size()) {
        return 0;
    }
    const auto b2 = static_cast<unsigned char>(s[i + 2]);
    if (b0 == 0xE1 && b1 == 0x9A && b2 == 0x80) return 3;  // U+1680
    if (b0 == 0xE2 && b1 == 0x80) {
        // U+2000..U+200A, U+2028, U+2029, U+202F
        if ((b2 >= 0x80 && b2 <= 0x8A) || b2 == 0xA8 || b2 == 0xA9 || b2 == 0xAF) return 3;
        return 0;
    }
    if (b0 == 0xE2 && b1 == 0x81 && b2 == 0x9F) return 3;  // U+205F
    if (b0 == 0xE3 && b1 == 0x80 && b2 == 0x80) return 3;  // U+3000
    return 0;
}

}  // namespace

std::vector<std::string_view> splitWords(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    std::size_t start = std::string_view::npos;
    while (i < text.size()) {
        const std::size_t ws = whitespaceAt(text, i);
        if (ws > 0) {
            if (start != std::string_view::npos) {
                words.push_back(text.substr(start, i - start));
                start = std::string_view::npos;
            }
            i += ws;
        } else {
            if (start == std::string_view::npos) {
                start = i;
            }
            ++i;
        }
    }
    if (start != std::string_view::npos) {
        words.push_back(text.substr(start));
    }
    return words;
}

std::vector<Chunk> chunkDocument(std::string_view context, std::size_t w) {
    if (w == 0) {
        fail(ErrorKind::InvalidArgument, "chunk window must be at least one word");
    }
    const auto words = splitWords(context);
    if (words.empty()) {
        fail(ErrorKind::EmptyContext, "context has no words");
    }
    std::vector<Chunk> chunks;
    chunks.reserve((words.size() + w - 1) / w);
    for (std::size_t begin = 0; begin < words.size(); begin += w) {
        const std::size_t end = std::min(begin + w, words.size());
        Chunk c;
        c.chunkId = chunks.size();
        c.wordCount = end - begin;
        for (std::size_t j = begin; j < end; ++j) {
            if (j > begin) c.text += ' ';
            c.text += words[j];
        }
        chunks.push_back(std::move(c));
    }
    return chunks;
}

std::vector<Chunk> embedChunks(std::vector<Chunk> chunks, EmbeddingBackend& client,
                               EmbeddingCache* cache, const EmbedOptions& options) {
    std::vector<std::string> keys(chunks.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        keys[i] = embeddingCacheKey(options.modelId, chunks[i].text);
        if (cache) {
            if (auto hit = cache->lookup(keys[i])) {
                chunks[i].embedding = std::move(*hit);
                continue;
            }
        }
        missing.push_back(i);
    }
    if (missing.empty()) {
        return chunks;
    }

    const std::size_t batch = std::max<std::size_t>(options.batchSize, 1);
    const std::size_t batches = (missing.size() + batch - 1) / batch;
    parallelFor(batches, options.maxInFlight, [&](std::size_t b) {
        const std::size_t begin = b * batch;
        const std::size_t end = std::min(begin + batch, missing.size());
        std::vector<std::string> texts;
        for (std::size_t j = begin; j < end; ++j) {
            texts.push_back(chunks[missing[j]].text);
        }
        try {
            auto vectors = embed(texts, options.modelId, client);
            for (std::size_t j = begin; j < end; ++j) {
                chunks[missing[j]].embedding = std::move(vectors[j - begin]);
            }
        } catch (const Error& e) {
            const auto index = std::to_string(chunks[missing[begin]].chunkId);
            throw Error(ErrorKind::ServiceError, "embedding chunk " + index + " failed: " + e.what(),
                        index);
        }
    });

    if (cache) {
        for (std::size_t i : missing) {
            cache->put(keys[i], *chunks[i].embedding);
        }
    }
    return chunks;
}

Embedding embedText(const std::string& text, EmbeddingBackend& client, EmbeddingCache* cache,
                    const EmbedOptions& options) {
    const std::string key = embeddingCacheKey(options.modelId, text);
    if (cache) {
        if (auto hit = cache->lookup(key)) {
            return *hit;
        }
    }
    auto vectors = embed({text}, options.modelId, client);
    if (cache) {
        cache->put(key, vectors.front());
    }
    return std::move(vectors.front());
}

}  // namespace dfrag
