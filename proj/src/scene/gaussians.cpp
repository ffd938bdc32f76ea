// SPDX-License-Identifier: Apache-2.0
#include "dipgs/scene/gaussians.hpp"

#include <string>

namespace dipgs::scene {

void GaussianSet::reserve(std::size_t n) {
    means.reserve(n);
    scales.reserve(n);
    rotations.reserve(n);
    opacities.reserve(n);
    sh.reserve(n);
}

void GaussianSet::push_back(const Vec3& mean, const Vec3& scale, const Quat& rotation, double opacity,
                            const Vec3& sh_dc) {
    means.push_back(mean);
    scales.push_back(scale);
    rotations.push_back(rotation);
    opacities.push_back(opacity);
    sh.push_back(sh_dc);
}

void GaussianSet::erase_if_opacity_below(double threshold) {
    GaussianSet kept;
    kept.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (opacities[i] < threshold) continue;
        kept.push_back(means[i], scales[i], rotations[i], opacities[i], sh[i]);
    }
    *this = std::move(kept);
}

void GaussianSet::validate() const {
    const std::size_t n = means.size();
    if (scales.size() != n || rotations.size() != n || opacities.size() != n || sh.size() != n) {
        throw std::invalid_argument("GaussianSet attribute arrays differ in length");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (double s : scales[i]) {
            if (!(s > 0.0)) throw std::invalid_argument("Gaussian " + std::to_string(i) + " has a non-positive scale");
        }
        if (!(opacities[i] > 0.0 && opacities[i] < 1.0)) {
            throw std::invalid_argument("Gaussian " + std::to_string(i) + " opacity outside (0, 1)");
        }
        const auto& q = rotations[i];
        if (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3] == 0.0) {
            throw std::invalid_argument("Gaussian " + std::to_string(i) + " has a zero quaternion");
        }
    }
}

void GaussianSet::normalize_rotations() {
    for (auto& q : rotations) {
        const double len = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (!(len > 0.0)) throw std::invalid_argument("zero quaternion cannot be normalised");
        for (auto& v : q) v /= len;
    }
}

namespace {

template <std::size_t K>
diff::Tensor pack(const std::vector<std::array<double, K>>& rows) {
    std::vector<double> flat;
    flat.reserve(rows.size() * K);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return diff::Tensor::constant({rows.size(), K}, std::move(flat));
}

template <std::size_t K>
std::vector<std::array<double, K>> unpack(const diff::Tensor& t) {
    if (t.rank() != 2 || t.dim(1) != K) throw diff::ShapeError("expected N x " + std::to_string(K) + " tensor");
    std::vector<std::array<double, K>> rows(t.dim(0));
    const auto v = t.values();
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < K; ++k) rows[i][k] = v[i * K + k];
    return rows;
}

}  // namespace

GaussianTensors to_tensors(const GaussianSet& set) {
    GaussianTensors t;
    t.means = pack(set.means);
    t.scales = pack(set.scales);
    t.rotations = pack(set.rotations);
    t.opacities = diff::Tensor::constant({set.size(), 1}, set.opacities);
    t.sh = pack(set.sh);
    return t;
}

GaussianSet to_set(const GaussianTensors& t) {
    GaussianSet set;
    set.means = unpack<3>(t.means);
    set.scales = unpack<3>(t.scales);
    set.rotations = unpack<4>(t.rotations);
    set.opacities.assign(t.opacities.values().begin(), t.opacities.values().end());
    set.sh = unpack<3>(t.sh);
    if (set.opacities.size() != set.means.size() || set.scales.size() != set.means.size() ||
        set.rotations.size() != set.means.size() || set.sh.size() != set.means.size()) {
        throw diff::ShapeError("GaussianTensors attribute counts differ");
    }
    return set;
}

void SceneBounds::validate() const {
    for (double h : half_extent) {
        if (!(h > 0.0)) throw std::invalid_argument("scene bounds need a positive half extent");
    }
}

bool SceneBounds::contains(const Vec3& p) const {
    for (int i = 0; i < 3; ++i) {
        if (std::abs(p[i] - center[i]) > half_extent[i]) return false;
    }
    return true;
}

Vec3 Camera::center() const { return -1.0 * matvec(transpose(rotation), translation); }

std::array<double, 16> Camera::world_to_camera() const {
    return {rotation[0][0], rotation[0][1], rotation[0][2], translation[0],
            rotation[1][0], rotation[1][1], rotation[1][2], translation[1],
            rotation[2][0], rotation[2][1], rotation[2][2], translation[2],
            0.0,            0.0,            0.0,            1.0};
}

void Camera::validate() const {
    const Mat3 rtr = matmul(transpose(rotation), rotation);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (std::abs(rtr[i][j] - (i == j ? 1.0 : 0.0)) > 1e-8) {
                throw std::invalid_argument("camera rotation is not orthonormal");
            }
        }
    if (std::abs(determinant(rotation) - 1.0) > 1e-8) throw std::invalid_argument("camera rotation is a reflection");
    if (!(fx > 0 && fy > 0)) throw std::invalid_argument("camera focal lengths must be positive");
    if (width < 1 || height < 1) throw std::invalid_argument("camera image size must be at least 1 x 1");
    if (!(near > 0)) throw std::invalid_argument("camera near plane must be positive");
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, std::size_t width, std::size_t height,
               double fov_x_radians, double near) {
    const Vec3 forward = normalized(target - eye);
    const Vec3 right = normalized(cross(forward, up));
    const Vec3 down = cross(forward, right);
    Camera cam;
    cam.rotation = {right, down, forward};
    cam.translation = -1.0 * matvec(cam.rotation, eye);
    cam.width = width;
    cam.height = height;
    cam.fx = 0.5 * static_cast<double>(width) / std::tan(0.5 * fov_x_radians);
    cam.fy = cam.fx;
    cam.cx = 0.5 * static_cast<double>(width) - 0.5;
    cam.cy = 0.5 * static_cast<double>(height) - 0.5;
    cam.near = near;
    return cam;
}

diff::Tensor Image::to_tensor() const { return diff::Tensor::constant({height, width, 3}, pixels); }

Image Image::from_tensor(const diff::Tensor& t) {
    if (t.rank() != 3 || t.dim(2) != 3) throw diff::ShapeError("image tensor must be H x W x 3");
    Image img(t.dim(1), t.dim(0));
    img.pixels.assign(t.values().begin(), t.values().end());
    return img;
}

}  // namespace dipgs::scene
