#pragma once

#include <array>
#include <cstdint>

namespace cwa {

// Stateless splitmix64 finalizer. Used both to expand seeds and to fold
// experiment coordinates into per-run seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// xoshiro256++ (Blackman/Vigna). Used instead of std::mt19937 so the
// stream is fully specified by this file and identical on every
// platform and standard library.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) {
            sm = splitmix64(sm);
            word = sm;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, 1), 24 random bits.
    float next_float() {
        return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
    }

    // Approximate standard normal via a sum of 12 uniforms. Exact bit
    // reproducibility matters more here than tail fidelity, so no
    // transcendental functions are involved.
    float next_gaussian(float mean, float stddev) {
        double acc = 0.0;
        for (int i = 0; i < 12; ++i) {
            acc += next_double();
        }
        return mean + stddev * static_cast<float>(acc - 6.0);
    }

    // Uniform integer in [0, bound) by rejection.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0ULL - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) {
                return r % bound;
            }
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

} // namespace cwa
