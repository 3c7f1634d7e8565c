#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "robophoto/core.hpp"

namespace robophoto::selection {

inline constexpr int kCropStepWidth = 600;
inline constexpr int kCropStepHeight = 400;
inline constexpr int kMinCropWidth = 1200;
inline constexpr int kMinCropHeight = 800;
inline constexpr int kMaxCropSteps = 6;

/// Centered crops shrinking by 600x400 per step, then one 4:3 crop of the
/// last step. Rectangles are in original-image pixels.
struct CropPlan {
    std::vector<core::BoundingBox> steps;
    std::optional<core::BoundingBox> aspect_crop;

    /// Steps followed by the aspect crop.
    std::vector<core::BoundingBox> rectangles() const;
};

/// Stops early when the next crop would fall below 1200x800. An image that
/// admits no step yields an empty plan without an aspect crop.
CropPlan crop_cascade(int width, int height);

/// Centered 4:3 crop of `outer`; the width is rounded down to an even number.
core::BoundingBox aspect_crop(const core::BoundingBox& outer);

/// The part of `picture` inside `rect`, re-based to the crop origin. Faces
/// clipped by the crop keep their visible part; faces outside are dropped.
core::PictureRecord crop_picture(const core::PictureRecord& picture, const core::BoundingBox& rect,
                                 const std::string& id_suffix);

struct SelectionConstraints {
    std::size_t per_category_quota = 8;
    bool one_per_burst = true;
    std::size_t total = 24;
};

struct ScoredPicture {
    std::string picture_id;
    std::string burst_id;
    core::FaceCountCategory category = core::FaceCountCategory::One;
    double score = 0.0;

    bool operator==(const ScoredPicture&) const = default;
};

struct SelectionResult {
    std::vector<ScoredPicture> picks;                 // in pick order
    std::vector<core::FaceCountCategory> order;       // categories as processed
    std::array<std::size_t, 3> shortfall{};            // unfilled quota per category (One, Two, ThreePlus)

    std::vector<std::string> picture_ids() const;
};

/// Categories with fewer candidates go first (ties: 3+, 2, 1).
std::vector<core::FaceCountCategory> category_order(std::span<const ScoredPicture> candidates);

/// Greedy per-category selection by descending score (ties by picture_id),
/// never reusing a burst when one_per_burst is set.
SelectionResult select_best(std::span<const ScoredPicture> candidates, const SelectionConstraints& constraints);

inline constexpr std::size_t kOracleMaxCandidates = 20;

/// Same contract as select_best, by enumerating every feasible subset per
/// category and keeping the lexicographically best by rank. At most 20
/// candidates; throws ArgumentError otherwise.
std::vector<std::string> selection_oracle(std::span<const ScoredPicture> candidates,
                                          const SelectionConstraints& constraints);

/// JSON array of {method, picture_id, burst_id, category, score, rank}.
nlohmann::json selection_report(const std::string& method, const SelectionResult& result);

}  // namespace robophoto::selection
