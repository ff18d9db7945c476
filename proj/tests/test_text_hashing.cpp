#include <doctest.h>

#include "cypherprune/hashing.hpp"
#include "cypherprune/text.hpp"

using namespace cypherprune;

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

    Sha256 incremental;
    incremental.update("a").update("bc");
    CHECK(incremental.hex_digest() == sha256_hex("abc"));
}

TEST_CASE("length-prefixed fields do not collide on concatenation") {
    Sha256 a, b;
    a.add_field("ab").add_field("c");
    b.add_field("a").add_field("bc");
    CHECK(a.hex_digest() != b.hex_digest());
}

TEST_CASE("fnv1a64 and mix64 reference values") {
    static_assert(fnv1a64("") == 0xcbf29ce484222325ULL);
    static_assert(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    // First output of SplitMix64 seeded with 0.
    static_assert(mix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("whitespace helpers") {
    CHECK(trim("  \t x y \n") == "x y");
    CHECK(trim("   ").empty());
    CHECK(normalize_whitespace("  MATCH\n\t(n)   RETURN n  ") == "MATCH (n) RETURN n");
    CHECK(normalize_whitespace("").empty());
    CHECK(normalize_whitespace(" \n ").empty());
}

TEST_CASE("utf8_length counts code points") {
    CHECK(utf8_length("") == 0);
    CHECK(utf8_length("abc") == 3);
    CHECK(utf8_length("caf\xc3\xa9") == 4);
    CHECK(utf8_length("\xe2\x82\xac\xf0\x9f\x98\x80") == 2);
}

TEST_CASE("case helpers are ASCII only") {
    CHECK(to_upper_ascii("order by x") == "ORDER BY X");
    CHECK(iequals_ascii("Match", "MATCH"));
    CHECK_FALSE(iequals_ascii("Match", "MATCHES"));
}

TEST_CASE("format_double round-trips") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.0) == "0");
    const double third = 1.0 / 3.0;
    CHECK(std::stod(format_double(third)) == third);
}
