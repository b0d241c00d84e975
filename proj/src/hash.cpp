// SPDX-License-Identifier: Apache-2.0
#include <groundloop/hash.hpp>

#include <openssl/evp.h>

#include <array>
#include <cstdio>

namespace groundloop
{

namespace
{

std::string digest(const void* data, std::size_t size)
{
    auto md = std::array<unsigned char, EVP_MAX_MD_SIZE> {};
    unsigned int len = 0;
    EVP_Digest(data, size, md.data(), &len, EVP_sha256(), nullptr);

    auto out = std::string {};
    out.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i)
    {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

} // namespace

std::string sha256Hex(std::string_view bytes)
{
    return digest(bytes.data(), bytes.size());
}

std::string sha256Hex(std::span<const double> values)
{
    return digest(values.data(), values.size_bytes());
}

} // namespace groundloop
