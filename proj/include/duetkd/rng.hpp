#pragma once

// Deterministic 64-bit RNG used everywhere reproducibility across
// implementations matters (dataset splits, exemplar confidence draws,
// synthetic data in tests). The generator is SplitMix64 (Steele,
// Lea & Flood): state += 0x9E3779B97F4A7C15, then two xor-shift
// multiplies. Bounded draws use Lemire's multiply-shift reduction:
// bounded(n) = (next() * n) >> 64.

#include <cstdint>
#include <vector>

namespace duetkd {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound). bound must be > 0.
    std::uint64_t bounded(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * bound) >> 64);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// One round of SplitMix64 output mixing over an arbitrary 64-bit input.
// Used for stateless keyed draws (see exemplar display confidence).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// FNV-1a 64-bit over a byte string.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xCBF29CE484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

// In-place Fisher-Yates shuffle driven by SplitMix64 bounded draws:
// for i = n-1 down to 1, swap(v[i], v[rng.bounded(i+1)]).
template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

}  // namespace duetkd
