#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace timexl::numerics {

// Counter-based generator: draw n is splitmix64(seed + n * golden gamma).
// The output is identical on every platform and compiler, unlike the
// distributions in <random>, whose algorithms are implementation-defined.
// Gaussian draws use the Box-Muller transform and consume two uniforms each
// (the sine branch is discarded to keep draws stateless apart from the counter).
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : seed_(seed) {}

    std::uint64_t nextU64() noexcept;
    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    // Uniform on (0, 1], safe as a log() argument.
    double uniformOpenLow() noexcept;
    double gaussian() noexcept;
    double gaussian(double mean, double stddev) noexcept { return mean + stddev * gaussian(); }
    // Uniform integer in [0, n). Rejection sampling avoids modulo bias.
    std::size_t below(std::size_t n);
    bool bernoulli(double p) noexcept { return uniform() < p; }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    std::uint64_t counter() const noexcept { return counter_; }

    // Independent stream derived from this generator's seed.
    Rng fork(std::uint64_t stream) const noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// FNV-1a over bytes; stable content hash used for cache keys and scripted draws.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;
std::uint64_t hashString(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

}  // namespace timexl::numerics
