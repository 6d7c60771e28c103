// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace pot::text
{

inline std::string_view trim(std::string_view s) noexcept
{
    auto const ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && ws(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && ws(s.back()))
        s.remove_suffix(1);
    return s;
}

inline std::string to_lower(std::string_view s)
{
    auto out = std::string(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// First run of decimal digits in s, if any (sign is ignored).
inline std::optional<long long> first_integer(std::string_view s)
{
    auto const begin = std::ranges::find_if(s, [](unsigned char c) { return std::isdigit(c) != 0; });
    if (begin == s.end())
        return std::nullopt;
    auto value = 0LL;
    auto const [end, ec] = std::from_chars(&*begin, s.data() + s.size(), value);
    if (ec != std::errc {})
        return std::nullopt;
    return value;
}

} // namespace pot::text
