#include "emberish/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace emberish {

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept
{
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) noexcept
{
    return splitmix64(seed ^ fnv1a64(stage));
}

std::size_t Rng::uniform_index(std::size_t n)
{
    // Rejection sampling keeps the draw unbiased for every n.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
        - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = engine_();
    while (r >= limit) {
        r = engine_();
    }
    return static_cast<std::size_t>(r % bound);
}

double Rng::uniform_real()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
    double u1 = uniform_real();
    while (u1 <= 0.0) {
        u1 = uniform_real();
    }
    const double u2 = uniform_real();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace emberish
