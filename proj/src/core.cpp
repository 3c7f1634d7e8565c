#include "robophoto/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "robophoto/errors.hpp"
#include "robophoto/rng.hpp"

namespace robophoto::core {

std::string_view to_string(Quality q) { return q == Quality::Good ? "Good" : "Bad"; }

Quality quality_from_string(std::string_view s) {
    if (s == "Good" || s == "good" || s == "GOOD") return Quality::Good;
    if (s == "Bad" || s == "bad" || s == "BAD") return Quality::Bad;
    throw ParseError("unknown quality label '" + std::string(s) + "'");
}

const std::array<std::string_view, kFaceFeatureCount>& FaceFeatures::names() {
    static const std::array<std::string_view, kFaceFeatureCount> kNames = {
        "roll", "pitch", "yaw", "joy", "sorrow", "anger", "surprise", "exposure", "blur"};
    return kNames;
}

double likelihood_level(std::string_view level) {
    if (level == "UNKNOWN" || level == "VERY_UNLIKELY") return 0.0;
    if (level == "UNLIKELY") return 0.25;
    if (level == "POSSIBLE") return 0.5;
    if (level == "LIKELY") return 0.75;
    if (level == "VERY_LIKELY") return 1.0;
    throw ParseError("unknown likelihood level '" + std::string(level) + "'");
}

std::string_view to_string(FaceCountCategory c) {
    switch (c) {
        case FaceCountCategory::One: return "1";
        case FaceCountCategory::Two: return "2";
        case FaceCountCategory::ThreePlus: return "3+";
    }
    return "?";
}

FaceCountCategory face_count_category(const PictureRecord& picture) {
    switch (picture.faces.size()) {
        case 0: throw NoFacesError();
        case 1: return FaceCountCategory::One;
        case 2: return FaceCountCategory::Two;
        default: return FaceCountCategory::ThreePlus;
    }
}

namespace {

bool features_ok(FaceFeatures& f) {
    for (double v : f.as_array())
        if (!std::isfinite(v)) return false;
    for (double a : {f.roll, f.pitch, f.yaw})
        if (a < -180.0 || a > 180.0) return false;
    for (double* v : {&f.joy, &f.sorrow, &f.anger, &f.surprise, &f.exposure, &f.blur})
        *v = std::clamp(*v, 0.0, 1.0);
    return true;
}

}  // namespace

ValidationResult validate_dataset(std::vector<PictureRecord> records, std::string provenance,
                                  const ValidateOptions& options) {
    std::unordered_set<std::string> seen;
    for (const auto& r : records)
        if (!seen.insert(r.picture_id).second)
            throw ValidationError("duplicate picture_id '" + r.picture_id + "'");

    ValidationResult result;
    result.dataset.provenance = std::move(provenance);
    for (auto& r : records) {
        bool ok = !r.picture_id.empty() && !r.burst_id.empty() && r.width >= 2 && r.height >= 2;
        for (auto& face : r.faces) {
            if (!ok) break;
            ok = face.bbox.within(r.width, r.height) && features_ok(face.features) &&
                 (!face.score || (std::isfinite(*face.score) && *face.score >= 0.0 && *face.score <= 1.0));
        }
        if (!ok) {
            ++result.drops.records_dropped;
            continue;
        }
        const auto before = r.faces.size();
        std::erase_if(r.faces, [&](const FaceObservation& f) {
            return f.face_image && (f.face_image->width < options.min_face_image_side ||
                                    f.face_image->height < options.min_face_image_side);
        });
        result.drops.faces_dropped += before - r.faces.size();
        if (r.faces.empty() && !options.keep_faceless) {
            ++result.drops.faceless_dropped;
            continue;
        }
        result.dataset.records.push_back(std::move(r));
    }
    return result;
}

DatasetSplit split_dataset(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed) {
    const std::array<double, 3> weights = {ratios.train, ratios.test, ratios.validation};
    for (double w : weights)
        if (!(w >= 0.0)) throw ArgumentError("split ratios must be non-negative");
    if (std::abs(weights[0] + weights[1] + weights[2] - 1.0) > 1e-9)
        throw ArgumentError("split ratios must sum to 1");

    const std::size_t n = dataset.records.size();

    // Largest-remainder targets so the three sizes sum to n.
    std::array<std::size_t, 3> target{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double exact = weights[k] * static_cast<double>(n);
        target[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[k] = exact - static_cast<double>(target[k]);
        assigned += target[k];
    }
    while (assigned < n) {
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (remainder[k] > remainder[best]) best = k;
        ++target[best];
        remainder[best] = -1.0;
        ++assigned;
    }

    // Bursts in first-appearance order, then shuffled.
    std::vector<std::string> bursts;
    std::unordered_map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
        auto& m = members[dataset.records[i].burst_id];
        if (m.empty()) bursts.push_back(dataset.records[i].burst_id);
        m.push_back(i);
    }
    Rng rng(seed);
    rng.shuffle(bursts);

    std::vector<int> partition_of(n, 0);
    std::array<std::size_t, 3> filled{};
    for (const auto& b : bursts) {
        int best = 0;
        long long best_deficit = static_cast<long long>(target[0]) - static_cast<long long>(filled[0]);
        for (int k = 1; k < 3; ++k) {
            long long deficit = static_cast<long long>(target[k]) - static_cast<long long>(filled[k]);
            if (deficit > best_deficit) {
                best = k;
                best_deficit = deficit;
            }
        }
        for (std::size_t i : members[b]) partition_of[i] = best;
        filled[best] += members[b].size();
    }

    DatasetSplit split;
    split.train.provenance = dataset.provenance + "#train";
    split.test.provenance = dataset.provenance + "#test";
    split.validation.provenance = dataset.provenance + "#validation";
    std::array<Dataset*, 3> parts = {&split.train, &split.test, &split.validation};
    for (std::size_t i = 0; i < n; ++i) parts[partition_of[i]]->records.push_back(dataset.records[i]);
    return split;
}

}  // namespace robophoto::core
