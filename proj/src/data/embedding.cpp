#include "timexl/data/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "timexl/error.hpp"
#include "timexl/numerics/rng.hpp"

namespace timexl::data {

namespace {

constexpr const char* kCacheMagic = "timexl-embedding-cache";

bool isOuterPunct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0 && c != '-' && c != '_';
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) {
        std::size_t b = 0, e = word.size();
        while (b < e && (isOuterPunct(word[b]) || word[b] == '-')) ++b;
        while (e > b && (isOuterPunct(word[e - 1]) || word[e - 1] == '-')) --e;
        if (b == e) continue;
        std::string token = word.substr(b, e - b);
        for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.push_back(std::move(token));
    }
    return out;
}

std::vector<double> HashingEmbedder::embed(std::string_view text) {
    calls_.fetch_add(1);
    std::vector<double> acc(dimension_, 0.0);
    const auto tokens = tokenize(text);
    for (const auto& token : tokens) {
        numerics::Rng rng(numerics::hashString(token));
        for (double& v : acc) v += rng.gaussian();
    }
    if (tokens.empty()) {
        numerics::Rng rng(numerics::hashString("<empty>"));
        for (double& v : acc) v = rng.gaussian();
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : acc) v /= norm;
    return acc;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path file) : file_(std::move(file)) {
    if (std::filesystem::exists(*file_)) {
        std::ifstream in(*file_);
        std::string magic;
        int version = 0;
        if (!(in >> magic >> version) || magic != kCacheMagic) {
            throw IntegrityError(file_->string() + ": not an embedding cache");
        }
        if (version != kFormatVersion) {
            throw VersionError(file_->string() + ": cache format version " + std::to_string(version) +
                               ", this build reads version " + std::to_string(kFormatVersion));
        }
        std::string line;
        std::getline(in, line);
        std::size_t lineNo = 1;
        while (std::getline(in, line)) {
            ++lineNo;
            if (line.empty()) continue;
            std::istringstream rec(line);
            std::string key;
            std::size_t dim = 0;
            if (!std::getline(rec, key, '\t') || !(rec >> dim)) {
                throw IntegrityError(file_->string() + ": malformed record on line " + std::to_string(lineNo));
            }
            std::vector<double> v(dim);
            for (double& x : v) {
                if (!(rec >> x)) {
                    throw IntegrityError(file_->string() + ": truncated vector on line " + std::to_string(lineNo));
                }
            }
            entries_[key] = std::move(v);
        }
        log_.open(*file_, std::ios::app);
    } else {
        if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
        log_.open(*file_, std::ios::out);
        log_ << kCacheMagic << ' ' << kFormatVersion << '\n';
        log_.flush();
    }
    if (!log_) throw IoError("cannot open embedding cache " + file_->string() + " for writing");
}

std::string EmbeddingCache::key(const std::string& providerId, std::string_view text) {
    return providerId + ":" + hex64(numerics::hashString(text));
}

std::optional<std::vector<double>> EmbeddingCache::find(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::insert(const std::string& key, const std::vector<double>& vector) {
    std::unique_lock lock(mutex_);
    if (!entries_.emplace(key, vector).second) return;
    if (log_.is_open()) {
        log_ << key << '\t' << vector.size();
        char buf[32];
        for (double v : vector) {
            std::snprintf(buf, sizeof buf, " %.17g", v);
            log_ << buf;
        }
        log_ << '\n';
        log_.flush();
    }
}

std::size_t EmbeddingCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

void embedSample(EmbeddingProvider& provider, EmbeddingCache& cache, MultiModalSample& sample,
                 int retries) {
    const std::size_t dim = provider.dimension();
    const std::string pid = provider.id();
    numerics::Tensor out({dim, sample.segments.size()});
    for (std::size_t j = 0; j < sample.segments.size(); ++j) {
        const std::string key = EmbeddingCache::key(pid, sample.segments[j]);
        auto hit = cache.find(key);
        std::vector<double> v;
        if (hit) {
            v = std::move(*hit);
        } else {
            for (int attempt = 0;; ++attempt) {
                try {
                    v = provider.embed(sample.segments[j]);
                    break;
                } catch (const ExternalServiceError& e) {
                    if (!e.retryable() || attempt >= retries) throw;
                }
            }
            cache.insert(key, v);
        }
        if (v.size() != dim) {
            throw ShapeError("embedding for sample " + sample.id + " has dimension " +
                             std::to_string(v.size()) + ", provider declares " + std::to_string(dim));
        }
        for (std::size_t r = 0; r < dim; ++r) out.at(r, j) = v[r];
    }
    sample.embeddings = std::move(out);
}

void embedSegments(EmbeddingProvider& provider, std::span<MultiModalSample> samples,
                   EmbeddingCache& cache, int retries) {
    for (auto& s : samples) embedSample(provider, cache, s, retries);
}

}  // namespace timexl::data
