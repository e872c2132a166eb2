#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace attrsim {

// Deterministic random source. mt19937_64 produces the same stream on every
// conforming platform; the draws below avoid std::*_distribution, whose
// output is implementation defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    int below(int n);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
            std::swap(items[static_cast<std::size_t>(i)],
                      items[static_cast<std::size_t>(below(i + 1))]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Mixes (base, stream, index) into an independent seed, so per-image or
// per-epoch generators never share state with the master one.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

} // namespace attrsim
