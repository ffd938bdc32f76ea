// SPDX-License-Identifier: Apache-2.0
#include "dipgs/io/hexfloat.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace dipgs::io {

std::string to_hexfloat(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("cannot encode a non-finite value");
    char buf[64];
    const bool negative = std::signbit(value);
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), std::fabs(value), std::chars_format::hex);
    if (ec != std::errc{}) throw std::invalid_argument("hex-float encoding failed");
    std::string out = negative ? "-0x" : "0x";
    out.append(buf, end);
    return out;
}

double from_hexfloat(std::string_view text) {
    bool negative = false;
    if (!text.empty() && text.front() == '-') {
        negative = true;
        text.remove_prefix(1);
    }
    if (text.size() < 3 || text.substr(0, 2) != "0x") {
        throw std::invalid_argument("not a hex-float: \"" + std::string(text) + "\"");
    }
    text.remove_prefix(2);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, std::chars_format::hex);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument("not a hex-float: \"" + std::string(text) + "\"");
    }
    return negative ? -value : value;
}

}  // namespace dipgs::io
