#pragma once

#include <string>
#include <vector>

namespace dfrag {

enum class Role { System, User };

struct ChatMessage {
    Role role = Role::User;
    std::string content;
};

struct ChatRequest {
    std::string modelId;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int maxTokens = 256;
    // Pipeline stage that issued the request ("planner", "evaluator",
    // "generator"). Never sent over the wire; mocks dispatch on it.
    std::string stage;
};

/// One round-trip to a chat-completion service.
///
/// Implementations throw dfrag::Error with kind Transport for network-level
/// failures and BadStatus (with status()) for non-2xx replies. Retry policy
/// lives in `complete()`, not here.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string chat(const ChatRequest& request) = 0;
};

/// One round-trip to an embeddings service. Returns raw (unnormalized)
/// vectors, positionally aligned with `texts` when the service behaves.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<std::vector<double>> embedBatch(const std::vector<std::string>& texts,
                                                        const std::string& modelId) = 0;
};

}  // namespace dfrag
