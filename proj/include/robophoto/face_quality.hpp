#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "robophoto/core.hpp"
#include "robophoto/tinynet.hpp"

namespace robophoto::face {

enum class FaceModelKind { FaceANN, FaceCNN };

inline constexpr std::size_t kFaceCnnHeight = 30;
inline constexpr std::size_t kFaceCnnWidth = 40;
inline constexpr double kDecisionThreshold = 0.5;

class UndersizedFace : public Error {
public:
    UndersizedFace(int w, int h)
        : Error("face crop " + std::to_string(w) + "x" + std::to_string(h) + " is smaller than 30x30") {}
};

class MissingModality : public Error {
public:
    using Error::Error;
};

/// Dense 9 -> 32 -> 64 -> 64 -> 32 -> 16 -> 1, ReLU hidden, Sigmoid head.
tinynet::NetworkModel build_face_ann(std::uint64_t seed = 0);

/// Five stride-2 3x3 convolutions (96,96,96,192,192 channels) with "same"
/// zero padding over a 1x30x40 crop, then dense 100,200,400,800,400,200,10
/// and a Sigmoid output. Spatial sizes: 30x40 -> 15x20 -> 8x10 -> 4x5 -> 2x3 -> 1x2.
tinynet::NetworkModel build_face_cnn(std::uint64_t seed = 0);

FaceModelKind model_kind(const tinynet::NetworkModel& model);

/// Bilinear resampling with corner alignment; returns intensities in [0,255].
std::vector<double> bilinear_resample(const GrayImage& src, int out_w, int out_h);

/// Crops (when a box is given), resamples to 40x30 and scales to [0,1].
/// Throws UndersizedFace when the crop is smaller than 30x30.
tinynet::Tensor preprocess_face(const GrayImage& image, const std::optional<core::BoundingBox>& crop = std::nullopt);

/// Per-feature z-score constants fitted on training faces.
struct FeatureStandardizer {
    std::array<double, core::kFaceFeatureCount> mean{};
    std::array<double, core::kFaceFeatureCount> stddev{};

    static FeatureStandardizer identity();
    static FeatureStandardizer fit(std::span<const core::FaceObservation> faces);
    tinynet::Tensor apply(const core::FaceFeatures& features) const;

    nlohmann::json to_json() const;
    static FeatureStandardizer from_json(const nlohmann::json& j);
};

/// Standardizer stored in the model metadata, or identity when absent.
FeatureStandardizer standardizer_of(const tinynet::NetworkModel& model);

/// Network input for one face under the given model kind.
tinynet::Tensor face_input(const tinynet::NetworkModel& model, const core::FaceObservation& face);

/// r = forward(model, input), stored into face.score.
double score_face(const tinynet::NetworkModel& model, core::FaceObservation& face);

/// Scores every face of every picture in place.
void score_faces(const tinynet::NetworkModel& model, core::Dataset& dataset);

/// Fraction of labeled faces where (r >= 0.5) agrees with label Good.
/// Throws ArgumentError when no face carries a label.
double evaluate_face_model(const tinynet::NetworkModel& model, std::span<const core::FaceObservation> faces);

std::vector<core::FaceObservation> labeled_faces(const core::Dataset& dataset);

/// Fits the standardizer on `faces`, embeds it in the model and trains.
tinynet::TrainResult train_face_ann(std::span<const core::FaceObservation> faces, const tinynet::TrainConfig& config,
                                    std::uint64_t init_seed);

tinynet::TrainResult train_face_cnn(std::span<const core::FaceObservation> faces, const tinynet::TrainConfig& config,
                                    std::uint64_t init_seed);

}  // namespace robophoto::face
