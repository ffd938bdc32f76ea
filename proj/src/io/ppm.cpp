// SPDX-License-Identifier: Apache-2.0
#include "dipgs/io/atomic_file.hpp"
#include "dipgs/io/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace dipgs::io {

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

std::string encode_ppm(const scene::Image& image) {
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.reserve(out.size() + image.pixels.size());
    for (double v : image.pixels) out.push_back(static_cast<char>(quantize(v)));
    return out;
}

namespace {

// Reads one whitespace-delimited header integer, skipping '#' comments.
std::size_t header_number(const std::string& bytes, std::size_t& pos, const char* what) {
    while (pos < bytes.size()) {
        const auto c = static_cast<unsigned char>(bytes[pos]);
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(c)) {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t value = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
        value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
        if (++digits > 9) throw ImageFormatError(std::string("PPM ") + what + " too large");
        ++pos;
    }
    if (digits == 0) throw ImageFormatError(std::string("PPM header: missing ") + what);
    return value;
}

}  // namespace

scene::Image decode_ppm(const std::string& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ImageFormatError("not a binary PPM (P6) file");
    std::size_t pos = 2;
    const std::size_t w = header_number(bytes, pos, "width");
    const std::size_t h = header_number(bytes, pos, "height");
    const std::size_t maxval = header_number(bytes, pos, "maxval");
    if (maxval != 255) throw ImageFormatError("only 8-bit PPM (maxval 255) is supported");
    if (w == 0 || h == 0) throw ImageFormatError("PPM with zero size");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw ImageFormatError("PPM header not terminated by whitespace");
    }
    ++pos;
    if (bytes.size() - pos != w * h * 3) {
        throw ImageFormatError("PPM payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                               std::to_string(w * h * 3));
    }
    scene::Image img(w, h);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        img.pixels[i] = static_cast<double>(static_cast<unsigned char>(bytes[pos + i])) / 255.0;
    }
    return img;
}

void write_image(const std::filesystem::path& path, const scene::Image& image) {
    write_file_atomic(path, encode_ppm(image));
}

scene::Image read_image(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

}  // namespace dipgs::io
