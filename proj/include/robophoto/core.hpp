#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robophoto/errors.hpp"
#include "robophoto/image.hpp"

namespace robophoto::core {

enum class Quality { Good, Bad };

std::string_view to_string(Quality q);
Quality quality_from_string(std::string_view s);

/// Face box in integer pixels, origin top-left.
struct BoundingBox {
    int x_tl = 0;
    int y_tl = 0;
    int x_br = 0;
    int y_br = 0;

    int width() const { return x_br - x_tl; }
    int height() const { return y_br - y_tl; }
    bool valid() const { return x_tl >= 0 && y_tl >= 0 && x_tl < x_br && y_tl < y_br; }
    bool within(int image_width, int image_height) const {
        return valid() && x_br <= image_width && y_br <= image_height;
    }

    bool operator==(const BoundingBox&) const = default;
};

inline constexpr std::size_t kFaceFeatureCount = 9;

/// Per-face descriptors. Angles in degrees, the rest in [0,1].
struct FaceFeatures {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
    double joy = 0.0;
    double sorrow = 0.0;
    double anger = 0.0;
    double surprise = 0.0;
    double exposure = 0.0;
    double blur = 0.0;

    /// Canonical order: roll, pitch, yaw, joy, sorrow, anger, surprise, exposure, blur.
    std::array<double, kFaceFeatureCount> as_array() const {
        return {roll, pitch, yaw, joy, sorrow, anger, surprise, exposure, blur};
    }
    static const std::array<std::string_view, kFaceFeatureCount>& names();

    bool operator==(const FaceFeatures&) const = default;
};

/// Maps a discrete likelihood level (VERY_UNLIKELY ... VERY_LIKELY) to
/// {0, 0.25, 0.5, 0.75, 1}. UNKNOWN maps to 0.
double likelihood_level(std::string_view level);

inline constexpr int kMinFaceImageSide = 30;

struct FaceObservation {
    BoundingBox bbox;
    FaceFeatures features;
    std::optional<GrayImage> face_image;
    std::string face_image_path;  // as written in the dataset file; empty when absent
    std::optional<Quality> label;
    std::optional<double> score;  // face quality r in [0,1]

    bool operator==(const FaceObservation&) const = default;
};

struct PictureRecord {
    std::string picture_id;
    std::string burst_id;
    int width = 0;
    int height = 0;
    std::vector<FaceObservation> faces;
    std::optional<Quality> label;

    double center_x() const { return width / 2.0; }
    double center_y() const { return height / 2.0; }

    bool operator==(const PictureRecord&) const = default;
};

struct Dataset {
    std::vector<PictureRecord> records;
    std::string provenance;
};

enum class FaceCountCategory { One, Two, ThreePlus };

inline constexpr std::array<FaceCountCategory, 3> kAllCategories = {
    FaceCountCategory::One, FaceCountCategory::Two, FaceCountCategory::ThreePlus};

std::string_view to_string(FaceCountCategory c);

/// Throws NoFacesError for pictures without faces.
FaceCountCategory face_count_category(const PictureRecord& picture);

struct ValidateOptions {
    bool keep_faceless = false;
    int min_face_image_side = kMinFaceImageSide;
};

struct DropCounts {
    std::size_t records_dropped = 0;
    std::size_t faces_dropped = 0;
    std::size_t faceless_dropped = 0;
};

struct ValidationResult {
    Dataset dataset;
    DropCounts drops;
};

/// Drops records and faces that break the type invariants and counts them.
/// Throws ValidationError on a duplicate picture_id.
ValidationResult validate_dataset(std::vector<PictureRecord> records, std::string provenance,
                                  const ValidateOptions& options = {});

struct SplitRatios {
    double train = 0.8;
    double test = 0.1;
    double validation = 0.1;
};

struct DatasetSplit {
    Dataset train;
    Dataset test;
    Dataset validation;
};

/// Burst-atomic seeded partition. Throws ArgumentError if the ratios are
/// negative or do not sum to 1 within 1e-9.
DatasetSplit split_dataset(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace robophoto::core
