#include "robophoto/abstraction.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>

#include "robophoto/composition.hpp"

namespace robophoto::abstraction {

using tinynet::LayerSpec;

std::uint8_t face_intensity(double r) {
    const double value = std::clamp(kMaxFaceIntensity * r, 0.0, kMaxFaceIntensity);
    const int saved = std::fegetround();
    std::fesetround(FE_TONEAREST);
    const double rounded = std::nearbyint(value);
    std::fesetround(saved);
    return static_cast<std::uint8_t>(rounded);
}

namespace {

// round(v * target / source), halves up, in exact integer arithmetic.
int scale_coordinate(int v, int target, int source) {
    const long long num = 2LL * v * target + source;
    return static_cast<int>(num / (2LL * source));
}

}  // namespace

core::BoundingBox render_box(const core::BoundingBox& b, int width, int height) {
    core::BoundingBox r{scale_coordinate(b.x_tl, kRenderWidth, width), scale_coordinate(b.y_tl, kRenderHeight, height),
                        scale_coordinate(b.x_br, kRenderWidth, width),
                        scale_coordinate(b.y_br, kRenderHeight, height)};
    // Every face stays visible as at least one pixel.
    r.x_tl = std::min(r.x_tl, kRenderWidth - 1);
    r.y_tl = std::min(r.y_tl, kRenderHeight - 1);
    r.x_br = std::clamp(r.x_br, r.x_tl + 1, kRenderWidth);
    r.y_br = std::clamp(r.y_br, r.y_tl + 1, kRenderHeight);
    return r;
}

GrayImage render_abstract(const core::PictureRecord& picture) {
    for (const auto& f : picture.faces)
        if (!f.score) throw composition::MissingFaceScore();
    GrayImage image(kRenderWidth, kRenderHeight, kBackground);
    for (const auto& f : picture.faces) {
        const std::uint8_t g = face_intensity(*f.score);
        const core::BoundingBox r = render_box(f.bbox, picture.width, picture.height);
        for (int y = r.y_tl; y < r.y_br; ++y)
            for (int x = r.x_tl; x < r.x_br; ++x) image.at(x, y) = std::min(image.at(x, y), g);
    }
    return image;
}

tinynet::Tensor picture_input(const GrayImage& image) {
    if (image.width != kRenderWidth || image.height != kRenderHeight)
        throw ArgumentError("abstract image must be " + std::to_string(kRenderWidth) + "x" +
                            std::to_string(kRenderHeight) + ", got " + std::to_string(image.width) + "x" +
                            std::to_string(image.height));
    std::vector<double> values(image.pixels.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = (255.0 - image.pixels[i]) / 255.0;
    return tinynet::Tensor({1, static_cast<std::size_t>(kRenderHeight), static_cast<std::size_t>(kRenderWidth)},
                           std::move(values));
}

tinynet::NetworkModel build_picture_cnn(std::uint64_t seed) {
    const std::size_t h1 = tinynet::conv_output_size(kRenderHeight, 4, 3, tinynet::Padding::Valid);
    const std::size_t w1 = tinynet::conv_output_size(kRenderWidth, 4, 3, tinynet::Padding::Valid);
    const std::size_t h2 = tinynet::conv_output_size(h1, 4, 3, tinynet::Padding::Valid);
    const std::size_t w2 = tinynet::conv_output_size(w1, 4, 3, tinynet::Padding::Valid);
    std::vector<LayerSpec> layers = {
        LayerSpec::conv2d(1, 8, 4, 4, 3),  LayerSpec::leaky_relu(),   LayerSpec::conv2d(8, 20, 4, 4, 3),
        LayerSpec::leaky_relu(),           LayerSpec::flatten(),      LayerSpec::dense(20 * h2 * w2, 1260),
        LayerSpec::leaky_relu(),           LayerSpec::dense(1260, 100), LayerSpec::leaky_relu(),
        LayerSpec::dense(100, 1),          LayerSpec::sigmoid(),
    };
    auto m = tinynet::make_model({1, static_cast<std::size_t>(kRenderHeight), static_cast<std::size_t>(kRenderWidth)},
                                 std::move(layers), seed, "picture_cnn");
    m.metadata.extra["render_size"] = {kRenderWidth, kRenderHeight};
    return m;
}

double classify_picture(const tinynet::NetworkModel& model, const GrayImage& abstract_image) {
    return tinynet::forward(model, picture_input(abstract_image));
}

tinynet::TrainResult train_picture_cnn(std::span<const core::PictureRecord> pictures,
                                       const tinynet::TrainConfig& config, std::uint64_t init_seed) {
    std::vector<tinynet::Sample> samples;
    for (const auto& p : pictures) {
        if (!p.label) continue;
        samples.push_back({picture_input(render_abstract(p)), *p.label == core::Quality::Good ? 1.0 : 0.0});
    }
    if (samples.empty()) throw ArgumentError("train_picture_cnn: no labeled pictures");
    return tinynet::train(build_picture_cnn(init_seed), samples, config);
}

}  // namespace robophoto::abstraction
