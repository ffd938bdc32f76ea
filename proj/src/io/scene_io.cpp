// SPDX-License-Identifier: Apache-2.0
#include "dipgs/io/scene_io.hpp"

#include "dipgs/io/atomic_file.hpp"
#include "dipgs/io/hexfloat.hpp"

#include <json.hpp>

namespace dipgs::io {

using nlohmann::json;
using namespace dipgs::scene;

namespace {

constexpr const char* kSceneKind = "dipgs-scene";
constexpr const char* kGaussianKind = "dipgs-gaussians";

template <std::size_t N>
json hex_array(const std::array<double, N>& v) {
    json out = json::array();
    for (double x : v) out.push_back(to_hexfloat(x));
    return out;
}

double hex_value(const json& j, const std::string& where) {
    if (!j.is_string()) throw SceneFormatError(where + ": expected a hex-float string");
    try {
        return from_hexfloat(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw SceneFormatError(where + ": " + e.what());
    }
}

const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw SceneFormatError(where + ": missing key \"" + key + "\"");
    return j.at(key);
}

template <std::size_t N>
std::array<double, N> read_array(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != N) throw SceneFormatError(where + ": expected " + std::to_string(N) + " values");
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = hex_value(j[i], where);
    return out;
}

std::size_t read_size(const json& j, const std::string& where) {
    if (!j.is_number_unsigned()) throw SceneFormatError(where + ": expected a non-negative integer");
    return j.get<std::size_t>();
}

template <std::size_t N>
json rows(const std::vector<std::array<double, N>>& v) {
    json out = json::array();
    for (const auto& r : v) out.push_back(hex_array(r));
    return out;
}

template <std::size_t N>
std::vector<std::array<double, N>> read_rows(const json& j, std::size_t count, const std::string& where) {
    if (!j.is_array() || j.size() != count) {
        throw SceneFormatError(where + ": expected " + std::to_string(count) + " entries");
    }
    std::vector<std::array<double, N>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(read_array<N>(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

json gaussians_json(const GaussianSet& set) {
    json g;
    g["count"] = set.size();
    g["means"] = rows(set.means);
    g["scales"] = rows(set.scales);
    g["rotations"] = rows(set.rotations);
    json o = json::array();
    for (double v : set.opacities) o.push_back(to_hexfloat(v));
    g["opacities"] = o;
    g["sh"] = rows(set.sh);
    return g;
}

GaussianSet read_gaussians(const json& g) {
    const std::size_t n = read_size(field(g, "count", "gaussians"), "gaussians.count");
    GaussianSet set;
    set.means = read_rows<3>(field(g, "means", "gaussians"), n, "gaussians.means");
    set.scales = read_rows<3>(field(g, "scales", "gaussians"), n, "gaussians.scales");
    set.rotations = read_rows<4>(field(g, "rotations", "gaussians"), n, "gaussians.rotations");
    const json& o = field(g, "opacities", "gaussians");
    if (!o.is_array() || o.size() != n) throw SceneFormatError("gaussians.opacities: expected " + std::to_string(n) + " entries");
    for (std::size_t i = 0; i < n; ++i) set.opacities.push_back(hex_value(o[i], "gaussians.opacities"));
    set.sh = read_rows<3>(field(g, "sh", "gaussians"), n, "gaussians.sh");
    return set;
}

json camera_json(const Camera& c) {
    json j;
    j["w2c"] = hex_array(c.world_to_camera());
    j["fx"] = to_hexfloat(c.fx);
    j["fy"] = to_hexfloat(c.fy);
    j["cx"] = to_hexfloat(c.cx);
    j["cy"] = to_hexfloat(c.cy);
    j["width"] = c.width;
    j["height"] = c.height;
    j["near"] = to_hexfloat(c.near);
    return j;
}

Camera read_camera(const json& j, const std::string& where) {
    Camera c;
    const auto w2c = read_array<16>(field(j, "w2c", where), where + ".w2c");
    for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 3; ++k) c.rotation[r][k] = w2c[4 * r + k];
        c.translation[r] = w2c[4 * r + 3];
    }
    if (w2c[12] != 0 || w2c[13] != 0 || w2c[14] != 0 || w2c[15] != 1) {
        throw SceneFormatError(where + ".w2c: last row must be (0, 0, 0, 1)");
    }
    c.fx = hex_value(field(j, "fx", where), where + ".fx");
    c.fy = hex_value(field(j, "fy", where), where + ".fy");
    c.cx = hex_value(field(j, "cx", where), where + ".cx");
    c.cy = hex_value(field(j, "cy", where), where + ".cy");
    c.width = read_size(field(j, "width", where), where + ".width");
    c.height = read_size(field(j, "height", where), where + ".height");
    c.near = hex_value(field(j, "near", where), where + ".near");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw SceneFormatError(where + ": " + e.what());
    }
    return c;
}

json parse_document(const std::string& text, const char* kind) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SceneFormatError("parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    const json& k = field(doc, "format", "document");
    if (!k.is_string() || k.get<std::string>() != kind) throw SceneFormatError(std::string("document is not a ") + kind + " file");
    const json& v = field(doc, "version", "document");
    if (!v.is_number_integer() || v.get<long long>() != kSceneFormatVersion) {
        throw SceneFormatError("unsupported version " + v.dump() + " (this build reads version " +
                               std::to_string(kSceneFormatVersion) + ")");
    }
    return doc;
}

}  // namespace

std::string scene_to_text(const SyntheticScene& s) {
    json doc;
    doc["format"] = kSceneKind;
    doc["version"] = kSceneFormatVersion;
    doc["seed"] = s.seed;
    doc["background"] = hex_array(s.background);
    doc["bounds"] = {{"center", hex_array(s.bounds.center)}, {"half_extent", hex_array(s.bounds.half_extent)}};
    doc["gaussians"] = gaussians_json(s.truth);
    json train = json::array(), test = json::array();
    for (const auto& c : s.train_cameras) train.push_back(camera_json(c));
    for (const auto& c : s.test_cameras) test.push_back(camera_json(c));
    doc["cameras"] = {{"train", train}, {"test", test}};
    return doc.dump(1) + "\n";
}

SyntheticScene scene_from_text(const std::string& text) {
    const json doc = parse_document(text, kSceneKind);
    SyntheticScene s;
    const json& seed = field(doc, "seed", "document");
    if (!seed.is_number_unsigned()) throw SceneFormatError("seed: expected a non-negative integer");
    s.seed = seed.get<std::uint64_t>();
    s.background = read_array<3>(field(doc, "background", "document"), "background");
    const json& b = field(doc, "bounds", "document");
    s.bounds.center = read_array<3>(field(b, "center", "bounds"), "bounds.center");
    s.bounds.half_extent = read_array<3>(field(b, "half_extent", "bounds"), "bounds.half_extent");
    s.truth = read_gaussians(field(doc, "gaussians", "document"));
    const json& cams = field(doc, "cameras", "document");
    for (const char* which : {"train", "test"}) {
        const json& list = field(cams, which, "cameras");
        if (!list.is_array()) throw SceneFormatError(std::string("cameras.") + which + ": expected an array");
        auto& out = std::string(which) == "train" ? s.train_cameras : s.test_cameras;
        for (std::size_t i = 0; i < list.size(); ++i) {
            out.push_back(read_camera(list[i], std::string("cameras.") + which + "[" + std::to_string(i) + "]"));
        }
    }
    return s;
}

void save_scene(const std::filesystem::path& path, const SyntheticScene& scene) {
    write_file_atomic(path, scene_to_text(scene));
}

SyntheticScene load_scene(const std::filesystem::path& path) { return scene_from_text(read_file(path)); }

std::string gaussians_to_text(const GaussianSet& set) {
    json doc;
    doc["format"] = kGaussianKind;
    doc["version"] = kSceneFormatVersion;
    doc["gaussians"] = gaussians_json(set);
    return doc.dump(1) + "\n";
}

GaussianSet gaussians_from_text(const std::string& text) {
    return read_gaussians(field(parse_document(text, kGaussianKind), "gaussians", "document"));
}

void save_gaussians(const std::filesystem::path& path, const GaussianSet& set) {
    write_file_atomic(path, gaussians_to_text(set));
}

GaussianSet load_gaussians(const std::filesystem::path& path) { return gaussians_from_text(read_file(path)); }

}  // namespace dipgs::io
