#include "timexl/numerics/rng.hpp"

#include <cmath>
#include <numbers>
#include <string_view>

#include "timexl/error.hpp"

namespace timexl::numerics {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += kGoldenGamma;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t Rng::nextU64() noexcept {
    const std::uint64_t n = counter_++;
    return splitmix64(seed_ + n * kGoldenGamma);
}

double Rng::uniform() noexcept {
    return static_cast<double>(nextU64() >> 11) * 0x1.0p-53;
}

double Rng::uniformOpenLow() noexcept {
    return (static_cast<double>(nextU64() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::gaussian() noexcept {
    const double u1 = uniformOpenLow();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw ContractError("Rng::below(0)");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = nextU64();
    while (x >= limit) x = nextU64();
    return static_cast<std::size_t>(x % bound);
}

Rng Rng::fork(std::uint64_t stream) const noexcept {
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x5851F42D4C957F2DULL)));
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t hashString(std::string_view text, std::uint64_t basis) noexcept {
    return fnv1a64(std::span<const unsigned char>(
                       reinterpret_cast<const unsigned char*>(text.data()), text.size()),
                   basis);
}

}  // namespace timexl::numerics
