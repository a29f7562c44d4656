#pragma once

#include <cstdint>
#include <random>

namespace vfi {

/// Seeded generator with explicit double extraction, so seeded runs produce
/// identical streams regardless of library distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    /// Uniform in [0, 1).
    double unit() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(unit() * static_cast<double>(n));
    }

    /// Independent substream for instance `index`; the derivation depends
    /// only on (seed, index), not on how much of this stream was consumed.
    Rng substream(std::uint64_t index) const {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ull * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

}  // namespace vfi
