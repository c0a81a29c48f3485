#pragma once

#include <cmath>
#include <cstdint>

namespace sbdlab {

/// splitmix64 step; used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256** with splitmix64-derived substreams.  Streams are addressed by
/// (master seed, stream index) so ensemble runs are reproducible regardless of
/// how they are scheduled across threads.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}

    RngStream(std::uint64_t master_seed, std::uint64_t stream_index) {
        std::uint64_t mix = master_seed;
        (void)splitmix64(mix);
        mix ^= 0xD1B54A32D192ED03ULL * (stream_index + 0x632BE59BD9B4E019ULL);
        for (auto& word : s_) word = splitmix64(mix);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1); used where log(u) must stay finite.
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Unbiased integer in [0, n) by rejection.
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t rem = (UINT64_MAX % n + 1) % n;  // 2^64 mod n
        if (rem == 0) return next_u64() % n;
        const std::uint64_t cutoff = UINT64_MAX - rem;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x > cutoff);
        return x % n;
    }

    double exponential(double rate) { return -std::log(uniform_open()) / rate; }

    /// Poisson count by uniform products; large means split in halves so the
    /// product never underflows.
    long poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        if (mean > 30.0) {
            const long half = poisson(0.5 * mean);
            return half + poisson(mean - 0.5 * mean);
        }
        const double floor_value = std::exp(-mean);
        long count = -1;
        double product = 1.0;
        do {
            product *= uniform_open();
            ++count;
        } while (product > floor_value);
        return count;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace sbdlab
