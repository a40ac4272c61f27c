#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "dfrag/openai_backend.hpp"

#include <httplib.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

#include "dfrag/error.hpp"

namespace dfrag {

using json = nlohmann::json;

void ServiceConfig::applyEnvironment() {
    auto env = [](const char* primary, const char* fallback) -> const char* {
        if (const char* v = std::getenv(primary); v && *v) return v;
        if (const char* v = std::getenv(fallback); v && *v) return v;
        return nullptr;
    };
    if (const char* url = env("DFRAG_BASE_URL", "OPENAI_BASE_URL")) baseUrl = url;
    if (const char* key = env("DFRAG_API_KEY", "OPENAI_API_KEY")) apiKey = key;
}

std::string encodeChatRequest(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role == Role::System ? "system" : "user"}, {"content", m.content}});
    }
    json body = {{"model", request.modelId},
                 {"messages", std::move(messages)},
                 {"temperature", request.temperature},
                 {"max_tokens", request.maxTokens}};
    return body.dump();
}

std::string decodeChatResponse(const std::string& body) {
    try {
        const auto obj = json::parse(body);
        const auto& content = obj.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string{} : content.get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("malformed chat response: ") + e.what(),
                    body.substr(0, 200));
    }
}

std::string encodeEmbeddingsRequest(const std::vector<std::string>& texts, const std::string& modelId) {
    return json{{"model", modelId}, {"input", texts}}.dump();
}

std::vector<std::vector<double>> decodeEmbeddingsResponse(const std::string& body) {
    try {
        const auto obj = json::parse(body);
        std::vector<std::vector<double>> out;
        for (const auto& item : obj.at("data")) {
            out.push_back(item.at("embedding").get<std::vector<double>>());
        }
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("malformed embeddings response: ") + e.what(),
                    body.substr(0, 200));
    }
}

OpenAiCompatibleBackend::OpenAiCompatibleBackend(ServiceConfig config) : config_(std::move(config)) {
    const auto schemeEnd = config_.baseUrl.find("://");
    const auto hostStart = schemeEnd == std::string::npos ? 0 : schemeEnd + 3;
    const auto pathStart = config_.baseUrl.find('/', hostStart);
    origin_ = config_.baseUrl.substr(0, pathStart);
    if (pathStart != std::string::npos) {
        prefix_ = config_.baseUrl.substr(pathStart);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
}

std::string OpenAiCompatibleBackend::post(const std::string& path, const std::string& body) {
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);

    httplib::Headers headers;
    if (!config_.apiKey.empty()) {
        headers.emplace(config_.apiKeyHeader, config_.apiKeyHeader == "Authorization"
                                                  ? "Bearer " + config_.apiKey
                                                  : config_.apiKey);
    }
    auto res = client.Post(prefix_ + path, headers, body, "application/json");
    if (!res) {
        throw Error(ErrorKind::Transport, origin_ + prefix_ + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorKind::BadStatus, "HTTP " + std::to_string(res->status) + " from " + path,
                    res->body.substr(0, 200), res->status);
    }
    return res->body;
}

std::string OpenAiCompatibleBackend::chat(const ChatRequest& request) {
    return decodeChatResponse(post("/v1/chat/completions", encodeChatRequest(request)));
}

std::vector<std::vector<double>> OpenAiCompatibleBackend::embedBatch(const std::vector<std::string>& texts,
                                                                     const std::string& modelId) {
    return decodeEmbeddingsResponse(post("/v1/embeddings", encodeEmbeddingsRequest(texts, modelId)));
}

}  // namespace dfrag
