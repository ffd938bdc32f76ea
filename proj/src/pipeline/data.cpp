// SPDX-License-Identifier: Apache-2.0
#include "dipgs/io/image_io.hpp"
#include "dipgs/pipeline/pipeline.hpp"

namespace dipgs::pipeline {

TrainingData training_data(const io::SyntheticScene& scene, std::vector<Image> images) {
    if (images.size() != scene.train_cameras.size()) {
        throw std::invalid_argument("expected " + std::to_string(scene.train_cameras.size()) + " training images, got " +
                                    std::to_string(images.size()));
    }
    TrainingData data;
    data.background = scene.background;
    data.bounds = scene.bounds;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Camera& cam = scene.train_cameras[i];
        if (images[i].width != cam.width || images[i].height != cam.height) {
            throw std::invalid_argument("training image " + std::to_string(i) + " does not match its camera size");
        }
        data.views.push_back({cam, std::move(images[i])});
    }
    return data;
}

TrainingData training_data(const io::SyntheticScene& scene) {
    std::vector<Image> images;
    for (const auto& cam : scene.train_cameras) {
        images.push_back(io::decode_ppm(io::encode_ppm(render::render(scene.truth, cam, scene.background).pixels)));
    }
    return training_data(scene, std::move(images));
}

}  // namespace dipgs::pipeline
