#include "dfrag/llm.hpp"

#include <thread>

#include "dfrag/error.hpp"

namespace dfrag {

void InflightLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
}

void InflightLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --active_;
    }
    cv_.notify_one();
}

void InflightLimiter::setLimit(std::size_t limit) {
    {
        std::lock_guard lock(mutex_);
        limit_ = limit == 0 ? 1 : limit;
    }
    cv_.notify_all();
}

std::size_t InflightLimiter::limit() const {
    std::lock_guard lock(mutex_);
    return limit_;
}

InflightLimiter& globalInflightLimiter() {
    static InflightLimiter limiter(8);
    return limiter;
}

bool isTransient(const Error& e) {
    if (e.kind() == ErrorKind::Transport) {
        return true;
    }
    if (e.kind() == ErrorKind::BadStatus && e.status()) {
        const int code = *e.status();
        return code >= 500 || code == 429;
    }
    return false;
}

namespace {

template <typename Call>
auto withRetry(const RetryPolicy& retry, Call&& call) {
    auto backoff = retry.initialBackoff;
    for (int attempt = 0;; ++attempt) {
        try {
            InflightLimiter::Slot slot(globalInflightLimiter());
            return call();
        } catch (const Error& e) {
            if (!isTransient(e)) {
                throw;
            }
            if (attempt >= retry.maxRetries) {
                throw Error(ErrorKind::Transport,
                            "gave up after " + std::to_string(attempt + 1) + " attempts: " + e.what(),
                            e.detail());
            }
        }
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(backoff.count()) * retry.backoffMultiplier));
    }
}

bool isBlank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

std::string complete(const ChatRequest& request, ChatBackend& backend, const RetryPolicy& retry) {
    std::string content = withRetry(retry, [&] { return backend.chat(request); });
    if (isBlank(content)) {
        fail(ErrorKind::EmptyCompletion, "model " + request.modelId + " returned no content");
    }
    return content;
}

std::vector<Embedding> embed(const std::vector<std::string>& texts, const std::string& modelId,
                             EmbeddingBackend& backend, const RetryPolicy& retry) {
    if (texts.empty()) {
        fail(ErrorKind::InvalidArgument, "embed called with no texts");
    }
    auto raw = withRetry(retry, [&] { return backend.embedBatch(texts, modelId); });
    if (raw.size() != texts.size()) {
        fail(ErrorKind::LengthMismatch, std::to_string(raw.size()) + " vectors for " +
                                            std::to_string(texts.size()) + " inputs");
    }
    std::vector<Embedding> out;
    out.reserve(raw.size());
    for (const auto& v : raw) {
        out.push_back(Embedding::normalize(std::span<const double>(v)));
    }
    return out;
}

}  // namespace dfrag
