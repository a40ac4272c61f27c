#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>
#include <vector>

#include "dfrag/backend.hpp"
#include "dfrag/error.hpp"
#include "dfrag/vecspace.hpp"

namespace dfrag {

struct RetryPolicy {
    // Retries after the first attempt; total attempts = maxRetries + 1.
    int maxRetries = 3;
    std::chrono::milliseconds initialBackoff{500};
    double backoffMultiplier = 2.0;
};

/// Counting gate shared by every complete()/embed() call in the process.
class InflightLimiter {
public:
    explicit InflightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

    void acquire();
    void release();
    void setLimit(std::size_t limit);
    std::size_t limit() const;

    class Slot {
    public:
        explicit Slot(InflightLimiter& l) : limiter_(l) { limiter_.acquire(); }
        ~Slot() { limiter_.release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        InflightLimiter& limiter_;
    };

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t limit_;
    std::size_t active_ = 0;
};

/// Process-wide limiter, default 8 requests in flight.
InflightLimiter& globalInflightLimiter();

/// True for failures worth retrying: transport errors, 5xx and 429.
bool isTransient(const Error& e);

/// Sends `request`, retrying transient failures with exponential backoff.
///
/// Throws Transport once retries are exhausted, BadStatus immediately on a
/// non-retryable status, and EmptyCompletion when the reply is blank.
std::string complete(const ChatRequest& request, ChatBackend& backend, const RetryPolicy& retry = {});

/// One normalized embedding per text, in input order. Throws LengthMismatch
/// when the service returns a different number of vectors.
std::vector<Embedding> embed(const std::vector<std::string>& texts, const std::string& modelId,
                             EmbeddingBackend& backend, const RetryPolicy& retry = {});

}  // namespace dfrag
