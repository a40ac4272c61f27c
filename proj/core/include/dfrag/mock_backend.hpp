#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dfrag/backend.hpp"

namespace dfrag {

/// Produces a completion for one request. `prompt` is the concatenated
/// content of the request's messages.
using MockRule = std::function<std::string(const ChatRequest& request, const std::string& prompt)>;

/// Deterministic in-process stand-in for both services.
///
/// Chat lookup order: queued failures, exact-prompt script, prompt-hash
/// script, then the rule registered for request.stage. A request nothing
/// answers fails with BadStatus 404.
///
/// Embeddings are explicit vectors when scripted, otherwise a hashed
/// bag-of-words over lowercase alphanumeric tokens.
class MockBackend : public ChatBackend, public EmbeddingBackend {
public:
    explicit MockBackend(std::size_t embeddingDim = 64);

    /// Loads scripts and rule choices from a JSON fixture file:
    /// {"embedding_dim", "chat_delay_ms", "embed_delay_ms", "responses",
    ///  "response_hashes", "planner", "evaluator", "generator", "embeddings"}.
    /// Throws ConfigError on unknown rule names or a malformed file.
    static std::unique_ptr<MockBackend> fromFixtureFile(const std::filesystem::path& path);

    std::string chat(const ChatRequest& request) override;
    std::vector<std::vector<double>> embedBatch(const std::vector<std::string>& texts,
                                                const std::string& modelId) override;

    void scriptPrompt(std::string prompt, std::string response);
    void scriptPromptHash(std::string sha256Hex, std::string response);
    void setRule(std::string stage, MockRule rule);
    void setEmbedding(std::string text, std::vector<double> values);

    void setChatDelay(std::chrono::milliseconds d) { chatDelayMs_ = d.count(); }
    void setEmbedDelay(std::chrono::milliseconds d) { embedDelayMs_ = d.count(); }

    /// Queues chat failures consumed one per call: 0 raises Transport, any
    /// other value BadStatus with that status.
    void failNextChats(std::vector<int> statuses);
    /// Same for embedding calls.
    void failNextEmbeds(std::vector<int> statuses);

    std::size_t chatCalls() const noexcept { return chatCalls_; }
    std::size_t embedCalls() const noexcept { return embedCalls_; }
    std::size_t embeddedTexts() const noexcept { return embeddedTexts_; }
    std::size_t stageCalls(const std::string& stage) const;
    /// Highest number of chat calls observed running at once.
    std::size_t peakConcurrentChats() const noexcept { return peakChats_; }
    void resetCounters();

    std::size_t embeddingDim() const noexcept { return dim_; }

private:
    std::size_t dim_;
    std::atomic<long long> chatDelayMs_{0};
    std::atomic<long long> embedDelayMs_{0};

    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::string> byPrompt_;
    std::unordered_map<std::string, std::string> byHash_;
    std::map<std::string, MockRule, std::less<>> rules_;
    std::unordered_map<std::string, std::vector<double>> embeddings_;
    std::deque<int> chatFailures_;
    std::deque<int> embedFailures_;
    std::map<std::string, std::size_t, std::less<>> stageCalls_;

    std::atomic<std::size_t> chatCalls_{0};
    std::atomic<std::size_t> embedCalls_{0};
    std::atomic<std::size_t> embeddedTexts_{0};
    std::atomic<std::size_t> activeChats_{0};
    std::atomic<std::size_t> peakChats_{0};
};

/// FNV-1a 64 of each lowercase alphanumeric token, +1 at hash % dim.
/// Text with no tokens maps to the first basis vector.
std::vector<double> hashedBagOfWords(std::string_view text, std::size_t dim);

namespace mock {

/// Always answers `text`.
MockRule constant(std::string text);

/// "1) <question>", taking the text after the last "Question: ".
MockRule plannerEcho();

/// Plan text keyed by question; unknown questions fall back to plannerEcho.
MockRule plannerScripted(std::map<std::string, std::string> plans);

/// Scores each plan step min(5, distinct content words of the step found in
/// the chunks), in the evaluator's "i. Score: d. Short Explanation: ..."
/// format with a closing "Total Score: n".
MockRule evaluatorKeywordOverlap();

/// Every step scores `perStep`.
MockRule evaluatorConstant(int perStep);

/// Emits the contents of every [[...]] marker in the passages, joined by
/// spaces; "unknown" when there is none.
MockRule generatorMarker();

/// Echoes the first passage of the context.
MockRule generatorFirstChunk();

}  // namespace mock

}  // namespace dfrag
