#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "timexl/data/sample.hpp"

namespace timexl::data {

// Frozen text embedder. Implementations must be deterministic per
// (id(), text).
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<double> embed(std::string_view text) = 0;
};

// Deterministic offline embedder. Each token (lower-cased, outer punctuation
// stripped) maps to a fixed Gaussian direction seeded by its hash; a segment
// embeds to the normalized sum over its token multiset, so segments sharing
// tokens land near each other.
class HashingEmbedder final : public EmbeddingProvider {
public:
    explicit HashingEmbedder(std::size_t dimension = 64) : dimension_(dimension) {}

    std::string id() const override { return "hashing-v1-" + std::to_string(dimension_); }
    std::size_t dimension() const override { return dimension_; }
    std::vector<double> embed(std::string_view text) override;

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::size_t dimension_;
    std::atomic<std::size_t> calls_{0};
};

std::vector<std::string> tokenize(std::string_view text);

// Embedding cache keyed by (provider id, content hash). With a backing file it
// is persisted as an append-only log:
//   timexl-embedding-cache 1
//   <key>\t<dimension>\t<v1> <v2> ...
// Readers may run concurrently; writes are serialized.
class EmbeddingCache {
public:
    static constexpr int kFormatVersion = 1;

    EmbeddingCache() = default;
    explicit EmbeddingCache(std::filesystem::path file);

    static std::string key(const std::string& providerId, std::string_view text);

    std::optional<std::vector<double>> find(const std::string& key) const;
    void insert(const std::string& key, const std::vector<double>& vector);
    std::size_t size() const;

private:
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, std::vector<double>> entries_;
    std::optional<std::filesystem::path> file_;
    std::ofstream log_;
};

// Embeds one sample's segments, consulting the cache first. Provider failures
// are retried `retries` times before the error propagates.
void embedSample(EmbeddingProvider& provider, EmbeddingCache& cache, MultiModalSample& sample,
                 int retries = 2);

void embedSegments(EmbeddingProvider& provider, std::span<MultiModalSample> samples,
                   EmbeddingCache& cache, int retries = 2);

}  // namespace timexl::data
