// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dipgs/scene/gaussians.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace dipgs::io {

class ImageFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// round-half-up of clamp(v, 0, 1) * 255
std::uint8_t quantize(double v);

/// Binary P6 bytes: "P6\n<w> <h>\n255\n" followed by RGB triplets.
std::string encode_ppm(const scene::Image& image);
scene::Image decode_ppm(const std::string& bytes);

void write_image(const std::filesystem::path& path, const scene::Image& image);
scene::Image read_image(const std::filesystem::path& path);

}  // namespace dipgs::io
