#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cypherprune {

/// Seeded generator with a platform-independent output sequence: the raw
/// std::mt19937_64 stream (fully specified by the standard) reduced to a range
/// with modulo-rejection rather than std::uniform_int_distribution, whose
/// algorithm varies between standard libraries.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

  private:
    std::mt19937_64 engine_;
};

/// Seed for an independent stream named `key`: mix64(seed ^ mix64(fnv1a64(key))).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;

/// Uniformly chooses min(k, n) distinct indices from [0, n) by a partial
/// Fisher-Yates shuffle and returns them in ascending order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

} // namespace cypherprune
