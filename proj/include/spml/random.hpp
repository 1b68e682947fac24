#pragma once

#include <cstdint>
#include <random>

namespace spml {

/// SplitMix64 finalizer; used to derive independent per-task seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of the index-th task in the stream rooted at base.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Standard normal variates from a seeded mt19937_64.
///
/// The transform is fixed so streams are reproducible across platforms:
/// uniforms are (x >> 11 + 0.5) * 2^-53 from consecutive 64-bit outputs, and
/// each pair (u1, u2) yields sqrt(-2 ln u1) cos(2 pi u2) followed by
/// sqrt(-2 ln u1) sin(2 pi u2) (Box-Muller).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double uniform() noexcept {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next() noexcept;

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace spml
