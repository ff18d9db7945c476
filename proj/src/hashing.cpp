#include "cypherprune/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <stdexcept>

namespace cypherprune {

namespace {
EVP_MD_CTX* as_ctx(void* p) { return static_cast<EVP_MD_CTX*>(p); }
} // namespace

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(as_ctx(ctx_), EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: digest init failed");
    }
}

Sha256::~Sha256() { EVP_MD_CTX_free(as_ctx(ctx_)); }

Sha256& Sha256::update(std::string_view bytes) {
    EVP_DigestUpdate(as_ctx(ctx_), bytes.data(), bytes.size());
    return *this;
}

Sha256& Sha256::add_field(std::string_view field) {
    // 8-byte little-endian length prefix
    std::array<unsigned char, 8> len{};
    auto n = static_cast<std::uint64_t>(field.size());
    for (std::size_t i = 0; i < len.size(); ++i) {
        len[i] = static_cast<unsigned char>((n >> (8 * i)) & 0xffU);
    }
    EVP_DigestUpdate(as_ctx(ctx_), len.data(), len.size());
    return update(field);
}

std::string Sha256::hex_digest() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int md_len = 0;
    EVP_DigestFinal_ex(as_ctx(ctx_), md.data(), &md_len);
    std::string out;
    out.reserve(md_len * 2);
    char buf[3];
    for (unsigned int i = 0; i < md_len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out.append(buf, 2);
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes);
    return h.hex_digest();
}

} // namespace cypherprune
