#pragma once

#include <cstdint>
#include <limits>

namespace chargesim {

/// splitmix64 finalizer; bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Child seed for slot `index` of `master`. Used for per-env and per-episode seeds.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master ^ 0x6a09e667f3bcc909ULL) + (index + 1) * 0x9e3779b97f4a7c15ULL);
}

/// What a substream is used for. Part of the stream key, so two phases of the
/// same step never share draws.
enum class Phase : std::uint32_t {
    Reset = 1,
    Arrival = 2,
    Policy = 3,
    Synthetic = 4,
};

/// Counter-based random stream: output n is mix64(key + n * gamma).
///
/// A stream is fully described by (key, counter), so the draws of a given
/// (seed, episode, step, phase) tuple never depend on how many numbers other
/// substreams consumed. Satisfies UniformRandomBitGenerator.
class Stream {
public:
    using result_type = std::uint64_t;

    constexpr explicit Stream(std::uint64_t key) noexcept : key_(mix64(key)) {}

    static constexpr Stream keyed(std::uint64_t seed, std::uint64_t episode, std::uint64_t step,
                                  Phase phase) noexcept {
        std::uint64_t k = mix64(seed + 0x243f6a8885a308d3ULL);
        k = mix64(k ^ (episode * 0xd1b54a32d192ed03ULL + 1));
        k = mix64(k ^ (step * 0xaef17502108ef2d9ULL + 2));
        k = mix64(k ^ (static_cast<std::uint64_t>(phase) * 0x9e3779b97f4a7c15ULL + 3));
        return Stream(k);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return next_u64(); }

    constexpr std::uint64_t next_u64() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1).
    constexpr double uniform_open() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;

    /// Unbiased integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Standard normal via Box-Muller (one variate per two uniforms).
    double normal() noexcept;

    constexpr std::uint64_t key() const noexcept { return key_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

    friend constexpr bool operator==(const Stream&, const Stream&) = default;

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Poisson(lambda) draw. Inversion below lambda = 30, PTRS rejection above.
/// Throws std::invalid_argument for negative or non-finite lambda.
std::uint64_t sample_poisson(Stream& rng, double lambda);

} // namespace chargesim
