#include "attrsim/rng.hpp"

#include "attrsim/errors.hpp"

namespace attrsim {

int Rng::below(int n) {
    if (n <= 0) {
        throw ContractError("Rng::below: n must be positive");
    }
    // Modulo bias is below 2^-32 for desk-scale n; determinism matters more
    // here than perfect uniformity.
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(base ^ (stream * 0x9e3779b97f4a7c15ULL)) ^ index);
}

} // namespace attrsim
