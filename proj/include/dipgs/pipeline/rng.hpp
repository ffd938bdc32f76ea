// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dipgs::pipeline {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the named substream `tag`/`index` of a master seed:
/// splitmix64(splitmix64(master ^ fnv1a(tag)) + index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

inline std::mt19937_64 substream(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(master, tag, index));
}

}  // namespace dipgs::pipeline
