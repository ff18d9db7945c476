#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cypherprune {

/// Incremental SHA-256 producing lowercase hex. Fields appended through
/// `add_field` are length-prefixed so ("ab","c") and ("a","bc") differ.
class Sha256 {
  public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::string_view bytes);
    Sha256& add_field(std::string_view field);
    std::string hex_digest();

  private:
    void* ctx_;
};

std::string sha256_hex(std::string_view bytes);

/// 64-bit FNV-1a. Stable across platforms; used for seed derivation only.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace cypherprune
