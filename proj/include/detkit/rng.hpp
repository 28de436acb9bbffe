#pragma once

#include <cstdint>
#include <random>

namespace detkit {

// Seeded uniform draws built directly on mt19937_64 output so that the same
// seed produces the same stream on every platform (uniform_real_distribution
// is implementation-defined and would break golden files).
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

inline bool coin_flip(std::mt19937_64& rng) {
    return (rng() & 1u) != 0;
}

}  // namespace detkit
