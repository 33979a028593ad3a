#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nucsel {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seeded randomness
//
// All randomness goes through SplitMix64 streams with hand-rolled uniform
// draws, so results do not depend on the standard library's distribution
// implementations.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Unbiased (rejection sampling). n must be > 0.
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t state_;
};

/// One SplitMix64 finalization of `x`.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over the bytes of `s`.
std::uint64_t fnv1a(std::string_view s);

/// Named sub-seed: every stage draws from `derive_seed(root, "<stage>")`.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
    return mix64(root ^ fnv1a(name));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    return root ^ mix64(index);
}

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Worker count from NUCSEL_WORKERS, defaulting to hardware concurrency.
unsigned worker_count();

/// Runs body(i) for i in [0, n) across worker_count() threads. Each index is
/// processed exactly once; callers write only to slot i so results are
/// independent of the worker count. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace nucsel
