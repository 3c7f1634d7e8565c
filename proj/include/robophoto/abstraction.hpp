#pragma once

#include <cstdint>
#include <span>

#include "robophoto/core.hpp"
#include "robophoto/image.hpp"
#include "robophoto/tinynet.hpp"

namespace robophoto::abstraction {

/// Fixed render size (3:2) for every abstract image.
inline constexpr int kRenderWidth = 150;
inline constexpr int kRenderHeight = 100;
inline constexpr std::uint8_t kBackground = 255;
inline constexpr double kMaxFaceIntensity = 245.0;

/// round-half-even(245 * r).
std::uint8_t face_intensity(double r);

/// Face box scaled from picture pixels to render pixels, as drawn.
core::BoundingBox render_box(const core::BoundingBox& bbox, int width, int height);

/// White canvas with one gray rectangle per face; overlaps keep the darker
/// value. Throws composition::MissingFaceScore for an unscored face.
GrayImage render_abstract(const core::PictureRecord& picture);

/// 1x100x150 network input: darkness (255 - p) / 255 per pixel.
tinynet::Tensor picture_input(const GrayImage& abstract_image);

/// Conv(1->8, 4x4, stride 3) -> Conv(8->20, 4x4, stride 3), valid padding,
/// LeakyReLU after each; dense 3200 -> 1260 -> 100 -> 1 with Sigmoid.
/// Sizes: 100x150 -> 33x49 -> 10x16, flatten 20*10*16 = 3200.
tinynet::NetworkModel build_picture_cnn(std::uint64_t seed = 0);

/// Network score in [0,1]; Good iff >= 0.5. Throws ArgumentError when the
/// image is not at the render size.
double classify_picture(const tinynet::NetworkModel& model, const GrayImage& abstract_image);

/// Renders, labels and trains. Pictures must be labeled with scored faces.
tinynet::TrainResult train_picture_cnn(std::span<const core::PictureRecord> pictures,
                                       const tinynet::TrainConfig& config, std::uint64_t init_seed);

}  // namespace robophoto::abstraction
