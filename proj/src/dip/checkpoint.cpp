// SPDX-License-Identifier: Apache-2.0
#include "dipgs/dip/checkpoint.hpp"

#include "dipgs/io/atomic_file.hpp"

#include <bit>
#include <cstring>

namespace dipgs::dip {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'D', 'I', 'P', 'W'};

template <typename T>
void put(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& data) : data_(data) {}

    bool done() const { return pos_ == data_.size(); }

    template <typename T>
    T get(const char* what) {
        if (data_.size() - pos_ < sizeof(T)) {
            throw CheckpointError(std::string("checkpoint truncated reading ") + what + " at byte " + std::to_string(pos_));
        }
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string bytes(std::size_t n, const char* what) {
        if (data_.size() - pos_ < n) {
            throw CheckpointError(std::string("checkpoint truncated reading ") + what + " at byte " + std::to_string(pos_));
        }
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    const std::string& data_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
    std::string out(kMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    for (const auto& a : arrays) {
        if (diff::element_count(a.shape) != a.values.size()) throw CheckpointError("array " + a.name + " size mismatch");
        put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
        out += a.name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
        for (std::size_t d : a.shape) put<std::uint64_t>(out, d);
        for (double v : a.values) put<double>(out, v);
    }
    io::write_file_atomic(path, out);
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
    const std::string data = io::read_file(path);
    Reader in(data);
    if (in.bytes(4, "magic") != std::string(kMagic, 4)) throw CheckpointError(path.string() + " is not a weight checkpoint");
    const auto version = in.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    std::vector<NamedArray> arrays;
    while (!in.done()) {
        NamedArray a;
        a.name = in.bytes(in.get<std::uint32_t>("name length"), "name");
        const auto rank = in.get<std::uint32_t>("rank");
        if (rank > 8) throw CheckpointError("implausible rank for " + a.name);
        for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(static_cast<std::size_t>(in.get<std::uint64_t>("dim")));
        const std::size_t count = diff::element_count(a.shape);
        if (count > data.size() / sizeof(double)) throw CheckpointError("tensor " + a.name + " is larger than the file");
        a.values.resize(count);
        for (double& v : a.values) v = in.get<double>("value");
        arrays.push_back(std::move(a));
    }
    return arrays;
}

}  // namespace dipgs::dip
