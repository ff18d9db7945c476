#include "cypherprune/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "cypherprune/hashing.hpp"

namespace cypherprune {

std::uint64_t SeededRng::below(std::uint64_t bound) {
    // reject the low (2^64 mod bound) values so every residue is equally likely
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t x = engine_();
    while (x < threshold) x = engine_();
    return x % bound;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept {
    return mix64(seed ^ mix64(fnv1a64(key)));
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    k = std::min(k, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (k == n) return idx;

    SeededRng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace cypherprune
