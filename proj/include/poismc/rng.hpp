#pragma once

#include <cstdint>

namespace poismc {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer: a bijective 64-bit mix with good avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

}  // namespace detail

/// Counter-based uniform stream: U_i is a pure function of (seed, i), so draws
/// are random-access, reproducible, and independent of how many consumers
/// share the time axis. Values lie strictly inside (0,1).
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : seed_(seed) {}

    /// U_i without advancing the counter.
    double at(std::uint64_t i) const {
        const std::uint64_t z = detail::mix64(seed_ + (i + 1) * detail::kGolden);
        return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
    }

    double next() { return at(index_++); }

    /// Derives a statistically independent stream; used for parallel or
    /// per-replication substreams with deterministic merge order.
    UniformStream substream(std::uint64_t k) const {
        return UniformStream(detail::mix64(seed_ ^ detail::mix64(k + detail::kGolden)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t index() const { return index_; }
    void skip(std::uint64_t n) { index_ += n; }

private:
    std::uint64_t seed_;
    std::uint64_t index_ = 0;
};

}  // namespace poismc
