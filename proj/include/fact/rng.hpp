#ifndef FACT_RNG_HPP
#define FACT_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

namespace fact {

/// Derives an independent stream seed from a root seed and a salt.
/// Used everywhere a component needs its own reproducible stream
/// (per-tree, per-repetition, per-window) so that results do not
/// depend on scheduling or thread count.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t salt) {
    std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (salt + 0x632BE59BD9B4E019ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ generator with hand-rolled distributions.
/// The standard library distributions are implementation-defined, so the
/// reproducibility contract (same seed, same results, any platform or
/// thread count) requires owning the full sampling path.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // SplitMix64 expansion of the 64-bit seed into the full state.
        std::uint64_t z = seed;
        for (auto& word : state_) {
            z += 0x9E3779B97F4A7C15ULL;
            std::uint64_t s = z;
            s = (s ^ (s >> 30)) * 0xBF58476D1CE4E5B9ULL;
            s = (s ^ (s >> 27)) * 0x94D049BB133111EBULL;
            word = s ^ (s >> 31);
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

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Uniform integer in [0, n). Lemire multiply-shift; the bias is
    /// below 2^-32 for the bound sizes used here.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller; the partner draw is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4] = {};
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace fact

#endif  // FACT_RNG_HPP
