#pragma once

#include <cstdint>
#include <vector>

#include "sst/numeric.hpp"

namespace sst {

// SplitMix64, used for seeding and for deriving independent per-realization
// streams from (seed, index).
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t s) : state(s) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// xoshiro256++ stream generator; output is platform-independent, which keeps
// simulation output byte-identical for a fixed seed.
class Xoshiro256 {
  public:
    explicit Xoshiro256(uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    // independent stream for realization `index` under a base seed
    static Xoshiro256 stream(uint64_t base_seed, uint64_t index) {
        SplitMix64 sm(base_seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
        return Xoshiro256(sm.next());
    }

    uint64_t next() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0,1) with 53 random bits
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // index sampled proportionally to nonnegative weights
    template <class S>
    size_t discrete(const std::vector<S>& weights) {
        double total = 0;
        for (const auto& w : weights) total += to_double(w);
        if (total <= 0) throw precondition_error("discrete: no probability mass");
        double u = uniform() * total;
        for (size_t i = 0; i + 1 < weights.size(); ++i) {
            u -= to_double(weights[i]);
            if (u < 0) return i;
        }
        return weights.size() - 1;
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

}  // namespace sst
