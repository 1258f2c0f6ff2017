#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "kga/errors.hpp"

namespace kga {

// Deterministic PRNG threaded explicitly through every stochastic op.
// All derived quantities (uniform doubles, index draws, shuffles) are
// defined here rather than via std::*_distribution, whose output is
// implementation-defined; this keeps artifacts byte-identical across
// standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // in [0, n), unbiased via rejection
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw InvalidArgument("uniform_index: n must be positive");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<std::size_t>(x % bound);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

    // Independent stream for a subcomponent; stable under unrelated changes
    // to the parent's draw order.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ull + stream * 0xd1342543de82ef95ull);
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return Rng(x);
    }

  private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

}  // namespace kga
