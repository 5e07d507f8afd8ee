#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "qake/bits.hpp"

namespace qake {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic random source. Bounded draws avoid std::uniform_*
/// distributions so streams are identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    /// Derives an independent stream from a root seed and a path of stream
    /// ids (trial index, party index, subsystem tag, ...).
    static Rng derive(uint64_t root, std::initializer_list<uint64_t> path) {
        uint64_t s = splitmix64(root);
        for (uint64_t p : path) s = splitmix64(s ^ splitmix64(p));
        return Rng(s);
    }

    uint64_t next_u64() { return eng_(); }

    uint8_t bit() { return static_cast<uint8_t>((eng_() >> 33) & 1u); }

    /// Uniform in [0, n). Rejection sampling, n >= 1.
    uint64_t below(uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: empty range");
        if (n == 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double real01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    BitString bits(std::size_t n) {
        BitString out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = bit();
        return out;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace qake
