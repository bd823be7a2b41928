#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace diffdepth {

// Counter-based pseudo-random generator. A draw is a pure function of
// (key, counter), so streams can be split by name without any shared state
// and every run is reproducible from one 64-bit seed.
//
// Mixing function is splitmix64; substreams derive a new key by folding a
// name hash (FNV-1a) or an integer index into the parent key.
class Rng {
public:
    explicit Rng(uint64_t key) : key_(key), counter_(0) {}

    static uint64_t mix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static uint64_t hash_name(std::string_view name) {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : name) {
            h ^= (uint64_t)(unsigned char)c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    Rng stream(std::string_view name) const { return Rng(mix(key_ ^ hash_name(name))); }
    Rng stream(std::string_view name, uint64_t index) const {
        return Rng(mix(mix(key_ ^ hash_name(name)) + index));
    }
    Rng stream(uint64_t index) const { return Rng(mix(key_ + 0x9e3779b97f4a7c15ULL * (index + 1))); }

    uint64_t next_u64() { return mix(key_ + 0xd1b54a32d192ed03ULL * ++counter_); }

    // Uniform in (0, 1]; never returns 0 so it is safe under log().
    double uniform() { return (double)((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + (int64_t)(next_u64() % (uint64_t)(hi - lo + 1));
    }

    // Box-Muller; consumes exactly two draws per normal.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    uint64_t key() const { return key_; }

private:
    uint64_t key_;
    uint64_t counter_;
};

}  // namespace diffdepth
