#include "rebalance/random.hpp"

#include <cmath>
#include <numbers>

namespace rebalance {

namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (auto b : bytes) {
        h ^= static_cast<std::uint64_t>(b);
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
    return fnv1a64(std::as_bytes(std::span(text.data(), text.size())));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) noexcept {
    return mix64(master ^ mix64(fnv1a64(tag) ^ mix64(index)));
}

double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
    return unit_interval(mix64(mix64(seed ^ mix64(a)) ^ b));
}

std::uint64_t counter_index(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                            std::uint64_t bound) noexcept {
    // Multiply-shift reduction; bias is below 2^-32 for the bounds used here.
    const auto word = mix64(mix64(seed ^ mix64(a)) ^ ~b);
    return static_cast<std::uint64_t>((static_cast<u128>(word) * bound) >> 64);
}

std::uint64_t Rng::index(std::uint64_t bound) {
    // Lemire's nearly-divisionless rejection method.
    std::uint64_t x = engine_();
    auto m = static_cast<u128>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            x = engine_();
            m = static_cast<u128>(x) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

}  // namespace rebalance
