#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "dfrag/backend.hpp"

namespace dfrag {

struct ServiceConfig {
    // scheme://host[:port][/prefix]; requests go to <prefix>/v1/...
    std::string baseUrl = "http://127.0.0.1:8000";
    std::string apiKey;
    // "Authorization" values are sent as "Bearer <key>"; other headers raw.
    std::string apiKeyHeader = "Authorization";
    std::chrono::seconds timeout{120};

    /// Overrides baseUrl / apiKey from DFRAG_BASE_URL and DFRAG_API_KEY
    /// (falling back to OPENAI_BASE_URL / OPENAI_API_KEY) when set.
    void applyEnvironment();
};

// Wire helpers, exposed for tests.
std::string encodeChatRequest(const ChatRequest& request);
std::string decodeChatResponse(const std::string& body);
std::string encodeEmbeddingsRequest(const std::vector<std::string>& texts, const std::string& modelId);
std::vector<std::vector<double>> decodeEmbeddingsResponse(const std::string& body);

/// Client for `/v1/chat/completions` and `/v1/embeddings`. Safe to share
/// across threads; each call opens its own connection.
class OpenAiCompatibleBackend final : public ChatBackend, public EmbeddingBackend {
public:
    explicit OpenAiCompatibleBackend(ServiceConfig config);

    std::string chat(const ChatRequest& request) override;
    std::vector<std::vector<double>> embedBatch(const std::vector<std::string>& texts,
                                                const std::string& modelId) override;

private:
    std::string post(const std::string& path, const std::string& body);

    ServiceConfig config_;
    std::string origin_;
    std::string prefix_;
};

}  // namespace dfrag
