#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>

namespace ehrelay {

// splitmix64. Every random draw in the project funnels through this so that
// instances and training runs reproduce bit-for-bit; std:: distributions are
// implementation-defined and would break that contract.
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1), both endpoints excluded
    double uniform_open() {
        return (static_cast<double>(next() >> 12) + 0.5) * 0x1.0p-52;
    }

    // unit-mean exponential, strictly positive
    double exponential() { return -std::log(uniform_open()); }
};

// Order-dependent seed combiner for deriving per-cell / per-stream seeds.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    SplitMix64 s(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
    s.next();
    return s.next();
}

inline uint64_t mix_seed(uint64_t a, double b) {
    uint64_t bits;
    std::memcpy(&bits, &b, sizeof bits);
    return mix_seed(a, bits);
}

}  // namespace ehrelay
