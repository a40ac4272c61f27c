#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "dfrag/corpus.hpp"
#include "dfrag/embedding_cache.hpp"
#include "dfrag/mock_backend.hpp"
#include "expect_error.hpp"

using namespace dfrag;
namespace fs = std::filesystem;

namespace {

fs::path writeTemp(const std::string& name, const std::string& body) {
    const auto dir = fs::temp_directory_path() / "dfrag-corpus-test";
    fs::create_directories(dir);
    const auto p = dir / name;
    std::ofstream(p, std::ios::binary) << body;
    return p;
}

std::string words(std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += "w" + std::to_string(i);
    }
    return out;
}

}  // namespace

TEST(LoadDataset, LongBenchFields) {
    const auto p = writeTemp("lb.jsonl",
                             R"({"_id":"a1","input":"Who?","context":"Some text.","answers":["Bob","Robert"],"dataset":"hotpotqa"})"
                             "\n\n"
                             R"({"_id":7,"input":"Where?","context":"More text.","answers":["Paris"]})"
                             "\n");
    const auto recs = loadDataset(p, DatasetFormat::LongBenchJsonl);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0].id, "a1");
    EXPECT_EQ(recs[0].question, "Who?");
    EXPECT_EQ(recs[0].goldAnswers, (std::vector<std::string>{"Bob", "Robert"}));
    EXPECT_EQ(recs[0].datasetName, "hotpotqa");
    EXPECT_EQ(recs[1].id, "7");
    EXPECT_EQ(recs[1].datasetName, "lb");
}

TEST(LoadDataset, InfBenchScalarAnswerIsWrapped) {
    const auto p = writeTemp("inf.jsonl", R"({"id":3,"input":"Q","context":"C","answer":"only"})" "\n");
    const auto recs = loadDataset(p, DatasetFormat::InfBenchJsonl);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].goldAnswers, std::vector<std::string>{"only"});
}

TEST(LoadDataset, MissingIdIsSynthesized) {
    const auto p = writeTemp("noid.jsonl", R"({"input":"Q","context":"C","answers":["x"]})" "\n");
    EXPECT_EQ(loadDataset(p, DatasetFormat::LongBenchJsonl)[0].id, "row0");
}

TEST(LoadDataset, Errors) {
    const auto bad = writeTemp("bad.jsonl", R"({"_id":"a","input":"Q","context":"C","answers":["x"]})" "\n{oops\n");
    try {
        loadDataset(bad, DatasetFormat::LongBenchJsonl);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
        EXPECT_EQ(e.detail(), "2");
    }
    const auto missing = writeTemp("missing.jsonl", R"({"_id":"a","context":"C","answers":["x"]})" "\n");
    try {
        loadDataset(missing, DatasetFormat::LongBenchJsonl);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingField);
        EXPECT_EQ(e.detail(), "input");
    }
    EXPECT_EQ(kindOf([] { loadDataset("/nonexistent/x.jsonl", DatasetFormat::LongBenchJsonl); }),
              ErrorKind::DatasetError);
}

TEST(DatasetFormat, RoundTripsNames) {
    EXPECT_EQ(parseDatasetFormat("longbench-jsonl"), DatasetFormat::LongBenchJsonl);
    EXPECT_EQ(parseDatasetFormat("infbench-jsonl"), DatasetFormat::InfBenchJsonl);
    EXPECT_FALSE(parseDatasetFormat("csv"));
    EXPECT_EQ(toString(DatasetFormat::InfBenchJsonl), "infbench-jsonl");
}

TEST(SplitWords, HandlesUnicodeWhitespace) {
    const auto w = splitWords("a\tb c　d  \n e");
    ASSERT_EQ(w.size(), 5u);
    EXPECT_EQ(w[2], "c");
    EXPECT_EQ(w[4], "e");
}

TEST(ChunkDocument, WindowCountsAndSizes) {
    struct Case {
        std::size_t tokens, w, chunks, last;
    };
    for (const auto& c : {Case{450, 200, 3, 50}, Case{400, 200, 2, 200}, Case{1, 200, 1, 1}, Case{10, 3, 4, 1}}) {
        const auto chunks = chunkDocument(words(c.tokens), c.w);
        ASSERT_EQ(chunks.size(), c.chunks) << c.tokens << "/" << c.w;
        EXPECT_EQ(chunks.back().wordCount, c.last);
        for (std::size_t i = 0; i < chunks.size(); ++i) EXPECT_EQ(chunks[i].chunkId, i);
    }
}

TEST(ChunkDocument, RejoinsWithSingleSpaces) {
    const auto chunks = chunkDocument("  one\t two\n\nthree   four five ", 2);
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[0].text, "one two");
    EXPECT_EQ(chunks[1].text, "three four");
    EXPECT_EQ(chunks[2].text, "five");
}

TEST(ChunkDocument, CoversEveryTokenOnce) {
    const std::string doc = words(1234);
    std::string rejoined;
    for (const auto& c : chunkDocument(doc, 97)) rejoined += (rejoined.empty() ? "" : " ") + c.text;
    EXPECT_EQ(rejoined, doc);
}

TEST(ChunkDocument, Errors) {
    EXPECT_EQ(kindOf([] { chunkDocument(" \n\t", 10); }), ErrorKind::EmptyContext);
    EXPECT_EQ(kindOf([] { chunkDocument("a b", 0); }), ErrorKind::InvalidArgument);
}

TEST(EmbedChunks, CachedChunksSkipTheService) {
    MockBackend mock(16);
    EmbeddingCache cache;
    auto chunks = chunkDocument("alpha beta gamma", 1);
    const EmbedOptions opts;
    cache.put(embeddingCacheKey(opts.modelId, "beta"), Embedding::normalize(std::vector<double>(16, 1.0)));
    const auto out = embedChunks(chunks, mock, &cache, opts);
    EXPECT_EQ(mock.embedCalls(), 2u);
    for (const auto& c : out) ASSERT_TRUE(c.embedding.has_value());
    EXPECT_EQ(out[1].embedding->values()[0], 0.25);
    EXPECT_EQ(cache.size(), 3u);
}

TEST(EmbedChunks, WarmCacheMakesNoCalls) {
    MockBackend mock(16);
    EmbeddingCache cache;
    const auto chunks = chunkDocument(words(50), 10);
    embedChunks(chunks, mock, &cache);
    mock.resetCounters();
    embedChunks(chunks, mock, &cache);
    EXPECT_EQ(mock.embedCalls(), 0u);
}

TEST(EmbedChunks, ServiceFailureNamesTheChunk) {
    MockBackend mock(16);
    mock.failNextEmbeds({400});
    EmbedOptions opts;
    opts.maxInFlight = 1;
    try {
        embedChunks(chunkDocument("a b c", 1), mock, nullptr, opts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ServiceError);
        EXPECT_EQ(e.detail(), "0");
    }
}

TEST(EmbedText, UsesTheCache) {
    MockBackend mock(16);
    EmbeddingCache cache;
    const auto a = embedText("where is it", mock, &cache);
    const auto b = embedText("where is it", mock, &cache);
    EXPECT_EQ(a, b);
    EXPECT_EQ(mock.embedCalls(), 1u);
}
