// SPDX-License-Identifier: Apache-2.0
#pragma once

// Weight file: "DIPW", u32 version, then per tensor
//   u32 name length, name bytes, u32 rank, rank x u64 dims, f64 values,
// all little-endian, repeated until end of file.

#include "dipgs/diff/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace dipgs::dip {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NamedArray {
    std::string name;
    diff::Shape shape;
    std::vector<double> values;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

}  // namespace dipgs::dip
