#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace emberish {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stable 64-bit FNV-1a hash; identical on every platform.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// Stage-local seed derived from the run seed and a stage name.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) noexcept;

/// Deterministic random source. Distribution code is written out by hand so
/// that sequences do not depend on the standard library implementation.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);

    /// Uniform real in [0, 1) with 53 bits of resolution.
    double uniform_real();

    /// Standard normal draw (Box-Muller, one value per call).
    double normal();

    template <typename T>
    void shuffle(std::span<T> items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace emberish
