#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace grpolab {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
/// Bypasses std::uniform_real_distribution so the stream is identical on
/// every platform for a given seed.
inline double unit_double(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    if (n == 0) throw std::domain_error("uniform_index: n must be positive");
    std::size_t i = static_cast<std::size_t>(unit_double(rng) * static_cast<double>(n));
    return i < n ? i : n - 1;
}

/// Inverse-CDF draw from unnormalized non-negative weights.
inline std::size_t weighted_index(Rng& rng, std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::domain_error("weighted_index: negative weight");
        total += w;
    }
    if (total <= 0.0) throw std::domain_error("weighted_index: all weights zero");
    const double u = unit_double(rng) * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        cum += weights[i];
        if (u < cum) return i;
    }
    return weights.size() - 1;  // u landed in the rounding gap at the top
}

}  // namespace grpolab
