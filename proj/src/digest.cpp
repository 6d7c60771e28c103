// SPDX-License-Identifier: Apache-2.0
#include "pot/digest.hpp"

#include "pot/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

namespace pot
{

namespace
{
    std::array<unsigned char, 32> sha256(std::string_view bytes)
    {
        auto ctx = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
        auto out = std::array<unsigned char, 32> {};
        auto len = 0u;
        if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1
            || EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1
            || EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1)
            throw Error(ErrorCode::InvalidArgument, "sha256 digest failed");
        return out;
    }
} // namespace

std::string sha256_hex(std::string_view bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    auto hex = std::string {};
    hex.reserve(64);
    for (auto b: sha256(bytes))
    {
        hex += digits[b >> 4];
        hex += digits[b & 0xf];
    }
    return hex;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> labels)
{
    // Length-prefix every label so ("ab","c") and ("a","bc") differ.
    auto material = std::to_string(base);
    for (auto label: labels)
    {
        material += '|';
        material += std::to_string(label.size());
        material += ':';
        material += label;
    }
    auto const digest = sha256(material);
    auto seed = std::uint64_t {0};
    for (auto i = 0; i < 8; ++i)
        seed = (seed << 8) | digest[static_cast<std::size_t>(i)];
    return seed;
}

} // namespace pot
