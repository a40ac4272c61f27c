#include "dfrag/embedding_cache.hpp"

#include <openssl/evp.h>

#include <array>
#include <nlohmann/json.hpp>

#include "dfrag/error.hpp"

namespace dfrag {

std::string sha256Hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx, data.data(), data.size());
    EVP_DigestFinal_ex(ctx, digest.data(), &len);
    EVP_MD_CTX_free(ctx);

    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0x0F];
    }
    return out;
}

std::string embeddingCacheKey(std::string_view modelId, std::string_view text) {
    std::string material;
    material.reserve(modelId.size() + 1 + text.size());
    material.append(modelId);
    material += '\0';
    material.append(text);
    return sha256Hex(material);
}

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(*path_)) {
        std::ifstream in(*path_);
        std::string line;
        std::size_t lineNo = 0;
        while (std::getline(in, line)) {
            ++lineNo;
            if (line.empty()) {
                continue;
            }
            auto corrupt = [&](const std::string& why) {
                throw Error(ErrorKind::CacheCorrupt,
                            path_->string() + ":" + std::to_string(lineNo) + ": " + why,
                            std::to_string(lineNo));
            };
            EmbeddingCacheEntry entry;
            try {
                const auto obj = nlohmann::json::parse(line);
                entry.key = obj.at("key").get<std::string>();
                entry.dim = obj.at("dim").get<std::size_t>();
                entry.values = obj.at("values").get<std::vector<double>>();
            } catch (const nlohmann::json::exception& e) {
                corrupt(e.what());
            }
            if (entry.dim == 0 || entry.dim != entry.values.size()) {
                corrupt("dim does not match values");
            }
            try {
                entries_.insert_or_assign(entry.key, Embedding::fromUnit(entry.values));
            } catch (const Error& e) {
                corrupt(e.what());
            }
        }
    } else if (path_->has_parent_path()) {
        std::filesystem::create_directories(path_->parent_path());
    }
    out_.open(*path_, std::ios::app | std::ios::binary);
    if (!out_) {
        throw Error(ErrorKind::IoError, "cannot open cache file " + path_->string(), path_->string());
    }
}

std::optional<Embedding> EmbeddingCache::lookup(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void EmbeddingCache::put(const std::string& key, const Embedding& embedding) {
    std::lock_guard lock(mutex_);
    if (!entries_.emplace(key, embedding).second) {
        return;
    }
    if (!path_) {
        return;
    }
    nlohmann::ordered_json obj;
    obj["key"] = key;
    obj["dim"] = embedding.dim();
    obj["values"] = std::vector<double>(embedding.values().begin(), embedding.values().end());
    out_ << obj.dump() << '\n';
    out_.flush();
    if (!out_) {
        throw Error(ErrorKind::IoError, "write failed on " + path_->string(), path_->string());
    }
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

}  // namespace dfrag
