#include "robophoto/composition.hpp"

#include <cmath>
#include <fstream>

namespace robophoto::composition {

bool BaselineThresholds::valid() const {
    for (double v : {x_min, x_max, y_min, y_max, occ_min, occ_max})
        if (!(v >= 0.0 && v <= 1.0)) return false;
    return x_min < x_max && y_min < y_max && occ_min < occ_max;
}

bool HeuristicThresholds::valid() const {
    return baseline.valid() && r_min >= 0.0 && r_min <= 1.0 && p_min >= 0.0 && p_min <= 1.0;
}

Point face_center(const core::BoundingBox& b) {
    return {(static_cast<double>(b.x_tl) + b.x_br) / 2.0, (static_cast<double>(b.y_tl) + b.y_br) / 2.0};
}

double center_distance(const core::BoundingBox& bbox, int width, int height) {
    const Point c = face_center(bbox);
    const double xc = width / 2.0;
    const double yc = height / 2.0;
    const double dx = c.x - xc;
    const double dy = c.y - yc;
    // sqrt of the ratio of squared lengths keeps the value exactly invariant
    // under integer rescaling of the picture.
    return std::sqrt((dx * dx + dy * dy) / (xc * xc + yc * yc));
}

FaceGeometry face_geometry(const core::BoundingBox& b, int width, int height) {
    const double w = width;
    const double h = height;
    FaceGeometry g;
    g.left = b.x_tl / w;
    g.right = b.x_br / w;
    g.top = b.y_tl / h;
    g.bottom = b.y_br / h;
    g.occupancy = (std::abs(static_cast<double>(b.x_br) - b.x_tl) * std::abs(static_cast<double>(b.y_br) - b.y_tl)) /
                  (w * h);
    g.distance = center_distance(b, width, height);
    return g;
}

bool passes(const FaceGeometry& g, const BaselineThresholds& t) {
    return g.left > t.x_min && g.right < t.x_max && g.top > t.y_min && g.bottom < t.y_max &&
           t.occ_min < g.occupancy && g.occupancy < t.occ_max;
}

bool baseline_gate(const core::BoundingBox& bbox, int width, int height, const BaselineThresholds& t) {
    return passes(face_geometry(bbox, width, height), t);
}

PictureScore baseline_score(const core::PictureRecord& picture, const BaselineThresholds& t) {
    if (picture.faces.empty()) return {};
    double s = 0.0;
    for (const auto& f : picture.faces) {
        const FaceGeometry g = face_geometry(f.bbox, picture.width, picture.height);
        if (!passes(g, t)) return {};
        s += 1.0 - g.distance;
    }
    return {true, s};
}

PictureScore heuristic_score(const core::PictureRecord& picture, const HeuristicThresholds& t) {
    for (const auto& f : picture.faces)
        if (!f.score) throw MissingFaceScore();
    if (picture.faces.empty()) return {};
    std::size_t good = 0;
    double s = 0.0;
    for (const auto& f : picture.faces) {
        const FaceGeometry g = face_geometry(f.bbox, picture.width, picture.height);
        if (!passes(g, t.baseline)) return {};
        if (*f.score > t.r_min) ++good;
        s += (1.0 - g.distance) * *f.score;
    }
    const double share = static_cast<double>(good) / static_cast<double>(picture.faces.size());
    if (!(share > t.p_min)) return {};
    return {true, s};
}

std::string_view to_string(ThresholdKind k) { return k == ThresholdKind::Baseline ? "baseline" : "heuristic"; }

ThresholdKind threshold_kind_from_string(std::string_view s) {
    if (s == "baseline") return ThresholdKind::Baseline;
    if (s == "heuristic") return ThresholdKind::Heuristic;
    throw ArgumentError("unknown threshold kind '" + std::string(s) + "'");
}

nlohmann::json to_json(const ThresholdSet& set) {
    const auto& b = set.values.baseline;
    nlohmann::json j{{"kind", to_string(set.kind)}, {"x_min", b.x_min},   {"x_max", b.x_max},
                     {"y_min", b.y_min},            {"y_max", b.y_max},   {"occ_min", b.occ_min},
                     {"occ_max", b.occ_max}};
    if (set.kind == ThresholdKind::Heuristic) {
        j["r_min"] = set.values.r_min;
        j["p_min"] = set.values.p_min;
    }
    return j;
}

ThresholdSet threshold_set_from_json(const nlohmann::json& j) {
    try {
        ThresholdSet set;
        set.kind = threshold_kind_from_string(j.at("kind").get<std::string>());
        auto& b = set.values.baseline;
        b.x_min = j.at("x_min").get<double>();
        b.x_max = j.at("x_max").get<double>();
        b.y_min = j.at("y_min").get<double>();
        b.y_max = j.at("y_max").get<double>();
        b.occ_min = j.at("occ_min").get<double>();
        b.occ_max = j.at("occ_max").get<double>();
        if (set.kind == ThresholdKind::Heuristic) {
            set.values.r_min = j.at("r_min").get<double>();
            set.values.p_min = j.at("p_min").get<double>();
        }
        if (!set.values.valid()) throw ValidationError("threshold values violate their bounds");
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("threshold set: ") + e.what());
    }
}

ThresholdSet load_threshold_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open thresholds " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("threshold set: ") + e.what());
    }
    return threshold_set_from_json(j);
}

void save_threshold_set(const std::string& path, const ThresholdSet& set) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << to_json(set).dump(2) << '\n';
}

}  // namespace robophoto::composition
