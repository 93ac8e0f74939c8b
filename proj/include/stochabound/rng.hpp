#pragma once

#include <cmath>
#include <cstdint>

namespace stochabound {

// Counter-based random numbers.
//
// Every draw is a pure function of (seed, stream, index): there is no
// generator state to advance, so any number of workers can produce any
// subset of the draws in any order and still agree bit-for-bit with a
// serial run. This property is relied on by the ensemble runner and by
// the reproducibility guarantees of the CLI.

namespace detail {

/// SplitMix64 finalizer; bijective on 64-bit words with full avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a,
                                  std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

/// Map 64 random bits to a uniform double in (0, 1].
inline double bits_to_unit_open(std::uint64_t h) {
    return 1.0 - static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Uniform draw in (0, 1] keyed by (seed, stream, index, sub).
inline double uniform_at(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t index, std::uint64_t sub = 0) {
    return detail::bits_to_unit_open(detail::counter_hash(seed, stream, index, sub));
}

/// Standard normal draw keyed by (seed, stream, index), via Box-Muller.
inline double normal_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    const double u1 = uniform_at(seed, stream, index, 0);
    const double u2 = uniform_at(seed, stream, index, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Sub-seed for one trajectory of an ensemble. Draws inside the path are
/// then keyed (path_seed, step, component), which realizes the
/// (master_seed, trajectory, step, component) addressing scheme.
inline std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index) {
    return detail::mix64(detail::mix64(master_seed) ^ (path_index + 0x632BE59BD9B4E019ull));
}

}  // namespace stochabound
