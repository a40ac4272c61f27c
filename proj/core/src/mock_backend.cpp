#include "dfrag/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dfrag/embedding_cache.hpp"
#include "dfrag/error.hpp"

namespace dfrag {

namespace {

std::vector<std::string> tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> kWords = {
        "about", "after", "also", "been", "before", "being", "both", "could", "does", "each", "find",
        "from", "have", "identify", "into", "more", "most", "other", "over", "some", "such", "than",
        "that", "their", "them", "then", "there", "these", "they", "this", "those", "through", "under",
        "very", "were", "what", "when", "where", "which", "while", "whom", "whose", "will", "with",
        "would", "your", "determine", "question", "answer"};
    return kWords;
}

std::set<std::string> contentWords(std::string_view text) {
    std::set<std::string> out;
    for (auto& t : tokens(text)) {
        if (t.size() >= 4 && !stopwords().count(t)) out.insert(std::move(t));
    }
    return out;
}

std::string promptOf(const ChatRequest& request) {
    std::string out;
    for (const auto& m : request.messages) out += m.content;
    return out;
}

// Text between the last occurrence of `open` and the next `close` (or end).
std::string_view sectionAfterLast(std::string_view text, std::string_view open, std::string_view close) {
    const auto at = text.rfind(open);
    if (at == std::string_view::npos) return {};
    auto rest = text.substr(at + open.size());
    if (!close.empty()) {
        const auto end = rest.find(close);
        if (end != std::string_view::npos) rest = rest.substr(0, end);
    }
    return rest;
}

std::string_view generatorContext(std::string_view prompt) {
    constexpr std::string_view kOpen = "The following are given passages.\n";
    constexpr std::string_view kClose = "\n\nAnswer the question based on the given passages.";
    const auto begin = prompt.find(kOpen);
    if (begin == std::string_view::npos) return prompt;
    auto rest = prompt.substr(begin + kOpen.size());
    const auto end = rest.rfind(kClose);
    return end == std::string_view::npos ? rest : rest.substr(0, end);
}

[[noreturn]] void raiseInjected(int status, std::string_view what) {
    if (status == 0) {
        throw Error(ErrorKind::Transport, std::string("injected transport failure on ") + std::string(what));
    }
    throw Error(ErrorKind::BadStatus, "injected HTTP " + std::to_string(status), "mock", status);
}

MockRule ruleFromJson(const nlohmann::json& j, std::string_view stage) {
    const std::string name = j.value("rule", "");
    if (stage == "planner") {
        if (name == "echo") return mock::plannerEcho();
        if (name == "scripted") {
            return mock::plannerScripted(j.value("plans", std::map<std::string, std::string>{}));
        }
    } else if (stage == "evaluator") {
        if (name == "keyword_overlap") return mock::evaluatorKeywordOverlap();
        if (name == "constant") return mock::evaluatorConstant(j.value("per_step", 0));
    } else if (stage == "generator") {
        if (name == "marker") return mock::generatorMarker();
        if (name == "first_chunk") return mock::generatorFirstChunk();
    }
    if (name == "text") return mock::constant(j.value("text", ""));
    throw Error(ErrorKind::ConfigError, "unknown mock rule for " + std::string(stage), name);
}

}  // namespace

std::vector<double> hashedBagOfWords(std::string_view text, std::size_t dim) {
    if (dim == 0) {
        fail(ErrorKind::InvalidArgument, "embedding dimension must be positive");
    }
    std::vector<double> v(dim, 0.0);
    const auto toks = tokens(text);
    if (toks.empty()) {
        v[0] = 1.0;
        return v;
    }
    for (const auto& t : toks) {
        std::uint64_t h = 14695981039346656037ULL;
        for (char c : t) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        v[h % dim] += 1.0;
    }
    return v;
}

MockBackend::MockBackend(std::size_t embeddingDim) : dim_(embeddingDim) {
    if (dim_ == 0) {
        fail(ErrorKind::InvalidArgument, "embedding dimension must be positive");
    }
}

std::unique_ptr<MockBackend> MockBackend::fromFixtureFile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::ConfigError, "cannot open mock fixture file", path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, "malformed mock fixture file: " + std::string(e.what()), path.string());
    }
    try {
        auto mock = std::make_unique<MockBackend>(j.value("embedding_dim", std::size_t{64}));
        mock->setChatDelay(std::chrono::milliseconds(j.value("chat_delay_ms", 0)));
        mock->setEmbedDelay(std::chrono::milliseconds(j.value("embed_delay_ms", 0)));
        const auto responses = j.value("responses", nlohmann::json::object());
        for (const auto& [prompt, resp] : responses.items()) {
            mock->scriptPrompt(prompt, resp.get<std::string>());
        }
        const auto hashes = j.value("response_hashes", nlohmann::json::object());
        for (const auto& [hash, resp] : hashes.items()) {
            mock->scriptPromptHash(hash, resp.get<std::string>());
        }
        for (const char* stage : {"planner", "evaluator", "generator"}) {
            if (j.contains(stage)) mock->setRule(stage, ruleFromJson(j.at(stage), stage));
        }
        const auto embeddings = j.value("embeddings", nlohmann::json::object());
        for (const auto& [text, values] : embeddings.items()) {
            mock->setEmbedding(text, values.get<std::vector<double>>());
        }
        return mock;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, "bad mock fixture field: " + std::string(e.what()), path.string());
    }
}

std::string MockBackend::chat(const ChatRequest& request) {
    ++chatCalls_;
    const std::size_t active = ++activeChats_;
    std::size_t peak = peakChats_.load();
    while (active > peak && !peakChats_.compare_exchange_weak(peak, active)) {
    }
    struct Leave {
        std::atomic<std::size_t>& n;
        ~Leave() { --n; }
    } leave{activeChats_};

    if (const auto d = chatDelayMs_.load(); d > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(d));
    }

    const std::string prompt = promptOf(request);
    MockRule rule;
    {
        std::lock_guard lock(mutex_);
        ++stageCalls_[request.stage];
        if (!chatFailures_.empty()) {
            const int status = chatFailures_.front();
            chatFailures_.pop_front();
            raiseInjected(status, "chat");
        }
        if (auto it = byPrompt_.find(prompt); it != byPrompt_.end()) return it->second;
        if (!byHash_.empty()) {
            if (auto it = byHash_.find(sha256Hex(prompt)); it != byHash_.end()) return it->second;
        }
        if (auto it = rules_.find(request.stage); it != rules_.end()) rule = it->second;
    }
    if (!rule) {
        throw Error(ErrorKind::BadStatus, "mock has no response for stage '" + request.stage + "'", "mock", 404);
    }
    return rule(request, prompt);
}

std::vector<std::vector<double>> MockBackend::embedBatch(const std::vector<std::string>& texts,
                                                         const std::string& /*modelId*/) {
    ++embedCalls_;
    embeddedTexts_ += texts.size();
    if (const auto d = embedDelayMs_.load(); d > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(d));
    }
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    std::lock_guard lock(mutex_);
    if (!embedFailures_.empty()) {
        const int status = embedFailures_.front();
        embedFailures_.pop_front();
        raiseInjected(status, "embeddings");
    }
    for (const auto& t : texts) {
        if (auto it = embeddings_.find(t); it != embeddings_.end()) {
            out.push_back(it->second);
        } else {
            out.push_back(hashedBagOfWords(t, dim_));
        }
    }
    return out;
}

void MockBackend::scriptPrompt(std::string prompt, std::string response) {
    std::lock_guard lock(mutex_);
    byPrompt_[std::move(prompt)] = std::move(response);
}

void MockBackend::scriptPromptHash(std::string hash, std::string response) {
    std::lock_guard lock(mutex_);
    byHash_[std::move(hash)] = std::move(response);
}

void MockBackend::setRule(std::string stage, MockRule rule) {
    std::lock_guard lock(mutex_);
    rules_[std::move(stage)] = std::move(rule);
}

void MockBackend::setEmbedding(std::string text, std::vector<double> values) {
    std::lock_guard lock(mutex_);
    embeddings_[std::move(text)] = std::move(values);
}

void MockBackend::failNextChats(std::vector<int> statuses) {
    std::lock_guard lock(mutex_);
    chatFailures_.insert(chatFailures_.end(), statuses.begin(), statuses.end());
}

void MockBackend::failNextEmbeds(std::vector<int> statuses) {
    std::lock_guard lock(mutex_);
    embedFailures_.insert(embedFailures_.end(), statuses.begin(), statuses.end());
}

std::size_t MockBackend::stageCalls(const std::string& stage) const {
    std::lock_guard lock(mutex_);
    const auto it = stageCalls_.find(stage);
    return it == stageCalls_.end() ? 0 : it->second;
}

void MockBackend::resetCounters() {
    std::lock_guard lock(mutex_);
    stageCalls_.clear();
    chatCalls_ = 0;
    embedCalls_ = 0;
    embeddedTexts_ = 0;
    peakChats_ = 0;
}

namespace mock {

MockRule constant(std::string text) {
    return [text = std::move(text)](const ChatRequest&, const std::string&) { return text; };
}

MockRule plannerEcho() {
    return [](const ChatRequest&, const std::string& prompt) {
        std::string q(sectionAfterLast(prompt, "Question: ", {}));
        while (!q.empty() && std::isspace(static_cast<unsigned char>(q.back()))) q.pop_back();
        return "1) " + q;
    };
}

MockRule plannerScripted(std::map<std::string, std::string> plans) {
    return [plans = std::move(plans), echo = plannerEcho()](const ChatRequest& req, const std::string& prompt) {
        std::string q(sectionAfterLast(prompt, "Question: ", {}));
        while (!q.empty() && std::isspace(static_cast<unsigned char>(q.back()))) q.pop_back();
        if (auto it = plans.find(q); it != plans.end()) return it->second;
        return echo(req, prompt);
    };
}

MockRule evaluatorKeywordOverlap() {
    return [](const ChatRequest&, const std::string& prompt) {
        const auto planText = sectionAfterLast(prompt, "Plan: ", "\n\nChunks:");
        const auto chunkText = sectionAfterLast(prompt, "Chunks:\n", {});
        std::set<std::string> chunkWords;
        for (auto& t : tokens(chunkText)) chunkWords.insert(std::move(t));

        std::vector<std::string> steps;
        std::istringstream lines{std::string(planText)};
        for (std::string line; std::getline(lines, line);) {
            const auto paren = line.find(") ");
            if (paren == std::string::npos) continue;
            steps.push_back(line.substr(paren + 2));
        }

        std::ostringstream out;
        int total = 0;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            std::vector<std::string> hits;
            for (const auto& w : contentWords(steps[i])) {
                if (chunkWords.count(w)) hits.push_back(w);
            }
            const int score = static_cast<int>(std::min<std::size_t>(5, hits.size()));
            total += score;
            out << i + 1 << ". Score: " << score << ". Short Explanation: ";
            if (hits.empty()) {
                out << "No matching content.";
            } else {
                out << "Matched";
                for (const auto& h : hits) out << ' ' << h;
                out << '.';
            }
            out << '\n';
        }
        out << "Total Score: " << total;
        return out.str();
    };
}

MockRule evaluatorConstant(int perStep) {
    return [perStep](const ChatRequest&, const std::string& prompt) {
        const auto planText = sectionAfterLast(prompt, "Plan: ", "\n\nChunks:");
        std::size_t steps = 0;
        std::istringstream lines{std::string(planText)};
        for (std::string line; std::getline(lines, line);) {
            if (line.find(") ") != std::string::npos) ++steps;
        }
        std::ostringstream out;
        for (std::size_t i = 0; i < steps; ++i) {
            out << i + 1 << ". Score: " << perStep << ". Short Explanation: Fixed.\n";
        }
        out << "Total Score: " << perStep * static_cast<int>(steps);
        return out.str();
    };
}

MockRule generatorMarker() {
    return [](const ChatRequest&, const std::string& prompt) {
        const auto ctx = generatorContext(prompt);
        std::string out;
        std::size_t pos = 0;
        while ((pos = ctx.find("[[", pos)) != std::string_view::npos) {
            const auto end = ctx.find("]]", pos + 2);
            if (end == std::string_view::npos) break;
            if (!out.empty()) out += ' ';
            out.append(ctx.substr(pos + 2, end - pos - 2));
            pos = end + 2;
        }
        return out.empty() ? std::string("unknown") : out;
    };
}

MockRule generatorFirstChunk() {
    return [](const ChatRequest&, const std::string& prompt) {
        auto ctx = generatorContext(prompt);
        if (ctx.starts_with("Reasoning notes:\n")) {
            const auto end = ctx.find("\n\n");
            ctx = end == std::string_view::npos ? std::string_view{} : ctx.substr(end + 2);
        }
        const auto end = ctx.find("\n\n");
        std::string first(end == std::string_view::npos ? ctx : ctx.substr(0, end));
        return first.empty() ? std::string("unknown") : first;
    };
}

}  // namespace mock

}  // namespace dfrag
