#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace wsindy {

/// splitmix64 finalizer; a strong 64-bit bijective mixer.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Order-dependent hash of a seed and a list of indices.
template <typename... Ts>
[[nodiscard]] constexpr std::uint64_t hash_combine(std::uint64_t seed, Ts... values) noexcept {
    std::uint64_t h = mix64(seed);
    ((h = mix64(h ^ (static_cast<std::uint64_t>(values) + 0x632be59bd9b4e019ULL))), ...);
    return h;
}

/// Counter-based generator: draw i depends only on (seed, i), so any
/// sample can be regenerated independently of evaluation order.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

    [[nodiscard]] constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix64(key_ ^ mix64(counter));
    }

    /// Uniform on the open interval (0, 1).
    [[nodiscard]] double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on counters 2i and 2i+1.
    [[nodiscard]] double normal(std::uint64_t i) const noexcept {
        const double u1 = uniform(2 * i);
        const double u2 = uniform(2 * i + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
};

}  // namespace wsindy
