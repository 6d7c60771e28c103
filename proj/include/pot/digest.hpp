// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace pot
{

/// Lower-case hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view bytes);

/// Deterministic 64-bit seed derived from a base seed and a list of labels,
/// e.g. derive_seed(config.seed, {question_id, "pathway", "3"}).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> labels);

} // namespace pot
