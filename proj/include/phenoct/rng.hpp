#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace phenoct {

// splitmix64 step; the basis of all randomness in the engine.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4a9a9c79d4759ULL ^ 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based substream: the stream for (seed, a, b) depends only on
// those values, never on how many draws other streams made. Bootstrap
// replicate r uses Substream(seed, r); macro-average finding f in
// replicate r uses Substream(seed, r, f).
class Substream {
public:
    explicit Substream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
        std::uint64_t s = seed;
        state_ = splitmix64(s);
        s = state_ ^ (a * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL);
        state_ = splitmix64(s);
        s = state_ ^ (b * 0xbf58476d1ce4e5b9ULL + 0x1ce4e5b9ULL);
        state_ = splitmix64(s);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, n) by rejection; exact and implementation-independent.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    double next_normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller, one value per call (second value discarded for
        // stream-position independence from call parity).
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_below(i)]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace phenoct
