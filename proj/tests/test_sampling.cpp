#include <doctest.h>

#include <algorithm>
#include <set>

#include "cypherprune/hashing.hpp"
#include "cypherprune/sampling.hpp"

using namespace cypherprune;

TEST_CASE("below stays in range") {
    SeededRng rng(1);
    for (int i = 0; i < 10000; ++i) {
        CHECK(rng.below(1) == 0);
        CHECK(rng.below(7) < 7);
    }
    CHECK(rng.below(~0ULL) < ~0ULL);
}

TEST_CASE("derive_seed follows the documented formula and separates streams") {
    CHECK(derive_seed(42, "downsample") == mix64(42 ^ mix64(fnv1a64("downsample"))));
    CHECK(derive_seed(42, "cap:a") != derive_seed(42, "cap:b"));
    CHECK(derive_seed(42, "cap:a") != derive_seed(43, "cap:a"));
}

TEST_CASE("sample_indices returns sorted distinct indices") {
    for (std::size_t n : {0u, 1u, 5u, 100u}) {
        for (std::size_t k : {0u, 1u, 3u, 100u, 200u}) {
            auto idx = sample_indices(n, k, 99);
            CHECK(idx.size() == std::min(n, k));
            CHECK(std::is_sorted(idx.begin(), idx.end()));
            CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size());
            for (auto i : idx) CHECK(i < n);
        }
    }
}

TEST_CASE("sample_indices is deterministic and seed dependent") {
    CHECK(sample_indices(1000, 10, 5) == sample_indices(1000, 10, 5));
    CHECK(sample_indices(1000, 10, 5) != sample_indices(1000, 10, 6));
}

TEST_CASE("sample_indices is roughly uniform") {
    // 20,000 draws of 3 from 10 -> each index expected 6,000 times.
    std::vector<int> hits(10, 0);
    for (std::uint64_t seed = 0; seed < 20000; ++seed) {
        for (auto i : sample_indices(10, 3, mix64(seed))) ++hits[i];
    }
    for (int h : hits) {
        CHECK(h > 5600);
        CHECK(h < 6400);
    }
}
