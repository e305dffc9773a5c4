#ifndef SEQFLOW_RANDOM_HPP
#define SEQFLOW_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace seqflow {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Order-sensitive combination of a key with one more counter word.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t word) noexcept {
    return splitmix64(key ^ splitmix64(word + 0x632BE59BD9B4E019ULL));
}

/// Counter-based random stream: every draw is a pure function of (key, index),
/// so any evaluation order or thread schedule yields identical values.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t key() const noexcept { return key_; }

    // Uniform in (0, 1].
    double uniform(std::uint64_t index, std::uint64_t lane = 0) const noexcept {
        const std::uint64_t h = derive_key(derive_key(key_, index), lane);
        return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform_in(std::uint64_t index, double lo, double hi, std::uint64_t lane = 0) const noexcept {
        const double u = 1.0 - uniform(index, lane);
        return lo + (hi - lo) * u;
    }

    // Standard normal via Box-Muller on lanes 0 and 1.
    double gaussian(std::uint64_t index) const noexcept {
        const double u1 = uniform(index, 0);
        const double u2 = uniform(index, 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
};

}  // namespace seqflow

#endif  // SEQFLOW_RANDOM_HPP
