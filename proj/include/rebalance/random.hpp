#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace rebalance {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t basis = 0xCBF29CE484222325ULL) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Sub-seed derivation used everywhere a master seed fans out:
///   sub = mix64(master ^ mix64(fnv1a64(tag) ^ mix64(index)))
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) noexcept;

/// Maps a 64-bit word to [0, 1) using its top 53 bits.
constexpr double unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Stateless uniform draw keyed by (seed, a, b). Same key, same value, on
/// every platform and thread count.
double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept;

/// Stateless uniform integer in [0, bound) keyed by (seed, a, b).
std::uint64_t counter_index(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                            std::uint64_t bound) noexcept;

/// Seeded sequential generator. The engine is mt19937_64 (its output sequence
/// is fixed by the standard); the distributions are implemented here because
/// the standard library's are not portable across implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform() { return unit_interval(engine_()); }
    /// Unbiased integer in [0, bound); bound must be positive.
    std::uint64_t index(std::uint64_t bound);
    /// Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rebalance
