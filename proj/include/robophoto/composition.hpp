#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "robophoto/core.hpp"

namespace robophoto::composition {

/// Position bounds (fractions of width/height) and occupancy band.
struct BaselineThresholds {
    double x_min = 0.0;
    double x_max = 1.0;
    double y_min = 0.0;
    double y_max = 1.0;
    double occ_min = 0.0;
    double occ_max = 1.0;

    bool valid() const;
    bool operator==(const BaselineThresholds&) const = default;
};

struct HeuristicThresholds {
    BaselineThresholds baseline;
    double r_min = 0.0;  // a face counts as good when r > r_min
    double p_min = 0.0;  // required share of good faces (strictly greater)

    bool valid() const;
    bool operator==(const HeuristicThresholds&) const = default;
};

struct PictureScore {
    bool passed = false;
    double score = 0.0;  // 0 whenever !passed
};

class MissingFaceScore : public Error {
public:
    MissingFaceScore() : Error("face_quality: face has no quality score") {}
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

Point face_center(const core::BoundingBox& bbox);

/// Distance from the face center to the image center, divided by the
/// center-to-corner distance.
double center_distance(const core::BoundingBox& bbox, int width, int height);

/// Normalized quantities the gate compares against the thresholds.
struct FaceGeometry {
    double left = 0.0;    // x_tl / width
    double right = 0.0;   // x_br / width
    double top = 0.0;     // y_tl / height
    double bottom = 0.0;  // y_br / height
    double occupancy = 0.0;
    double distance = 0.0;
};

FaceGeometry face_geometry(const core::BoundingBox& bbox, int width, int height);

bool passes(const FaceGeometry& g, const BaselineThresholds& t);

bool baseline_gate(const core::BoundingBox& bbox, int width, int height, const BaselineThresholds& t);

/// Fails (score 0) when there are no faces or any face fails the gate;
/// otherwise sums (1 - d) over faces.
PictureScore baseline_score(const core::PictureRecord& picture, const BaselineThresholds& t);

/// Baseline gate plus the good-face share test; sums (1 - d) * r. Throws
/// MissingFaceScore if a face has no score.
PictureScore heuristic_score(const core::PictureRecord& picture, const HeuristicThresholds& t);

enum class ThresholdKind { Baseline, Heuristic };

std::string_view to_string(ThresholdKind k);
ThresholdKind threshold_kind_from_string(std::string_view s);

/// File form of either threshold family, tagged by "kind".
struct ThresholdSet {
    ThresholdKind kind = ThresholdKind::Baseline;
    HeuristicThresholds values;  // r_min/p_min ignored for Baseline

    static ThresholdSet baseline(const BaselineThresholds& t) { return {ThresholdKind::Baseline, {t, 0.0, 0.0}}; }
    static ThresholdSet heuristic(const HeuristicThresholds& t) { return {ThresholdKind::Heuristic, t}; }
};

nlohmann::json to_json(const ThresholdSet& set);
ThresholdSet threshold_set_from_json(const nlohmann::json& j);
ThresholdSet load_threshold_set(const std::string& path);
void save_threshold_set(const std::string& path, const ThresholdSet& set);

}  // namespace robophoto::composition
