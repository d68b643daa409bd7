#include "chargesim/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace chargesim {

std::uint64_t Stream::below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next_u64()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

std::int64_t Stream::uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
    if (hi <= lo) return lo;
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(below(span));
}

double Stream::normal() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

std::uint64_t poisson_inversion(Stream& rng, double lambda) {
    const double u = rng.uniform();
    double p = std::exp(-lambda);
    double cdf = p;
    std::uint64_t k = 0;
    // The tail cutoff only matters when rounding stalls the cdf below u.
    const auto cutoff = static_cast<std::uint64_t>(lambda + 40.0 * std::sqrt(lambda) + 40.0);
    while (u > cdf && k < cutoff) {
        ++k;
        p *= lambda / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

// Hoermann's transformed rejection with squeeze (PTRS).
std::uint64_t poisson_ptrs(Stream& rng, double lambda) {
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
            -lambda + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::uint64_t>(k);
        }
    }
}

} // namespace

std::uint64_t sample_poisson(Stream& rng, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("poisson rate must be finite and non-negative");
    }
    if (lambda == 0.0) return 0;
    if (lambda < 30.0) return poisson_inversion(rng, lambda);
    return poisson_ptrs(rng, lambda);
}

} // namespace chargesim
