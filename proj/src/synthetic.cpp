#include "robophoto/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "robophoto/abstraction.hpp"
#include "robophoto/rng.hpp"
#include "robophoto/threshold_opt.hpp"

namespace robophoto::synth {

using core::BoundingBox;
using core::FaceObservation;
using core::PictureRecord;
using core::Quality;

bool face_rule(const core::FaceFeatures& f) { return std::abs(f.yaw) < 20.0 && f.joy > 0.6 && f.blur < 0.3; }

namespace {

core::FaceFeatures random_features(Rng& rng, double p_condition) {
    core::FaceFeatures f;
    f.roll = rng.uniform(-30.0, 30.0);
    f.pitch = rng.uniform(-30.0, 30.0);
    if (rng.bernoulli(p_condition))
        f.yaw = rng.uniform(-19.5, 19.5);
    else
        f.yaw = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(20.5, 90.0);
    f.joy = rng.bernoulli(p_condition) ? rng.uniform(0.62, 1.0) : rng.uniform(0.0, 0.58);
    f.blur = rng.bernoulli(p_condition) ? rng.uniform(0.0, 0.28) : rng.uniform(0.32, 1.0);
    f.sorrow = rng.uniform(0.0, 0.5);
    f.anger = rng.uniform(0.0, 0.5);
    f.surprise = rng.uniform(0.0, 0.5);
    f.exposure = rng.uniform(0.0, 1.0);
    return f;
}

BoundingBox random_box(Rng& rng, int width, int height) {
    const int w = static_cast<int>(rng.uniform(120.0, 1300.0));
    const int h = std::min(height - 2, static_cast<int>(w * rng.uniform(1.0, 1.4)));
    const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - w)));
    const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - h)));
    return {x, y, x + w, y + h};
}

bool clear_of(double value, double threshold, double margin) { return std::abs(value - threshold) >= margin; }

bool respects_margin(const PictureRecord& p, const composition::ThresholdSet& t, double margin) {
    const auto& b = t.values.baseline;
    std::size_t good = 0;
    for (const auto& f : p.faces) {
        const auto g = composition::face_geometry(f.bbox, p.width, p.height);
        if (!clear_of(g.left, b.x_min, margin) || !clear_of(g.right, b.x_max, margin) ||
            !clear_of(g.top, b.y_min, margin) || !clear_of(g.bottom, b.y_max, margin) ||
            !clear_of(g.occupancy, b.occ_min, margin) || !clear_of(g.occupancy, b.occ_max, margin))
            return false;
        if (t.kind == composition::ThresholdKind::Heuristic) {
            if (!clear_of(*f.score, t.values.r_min, margin)) return false;
            if (*f.score > t.values.r_min) ++good;
        }
    }
    if (t.kind == composition::ThresholdKind::Heuristic &&
        !clear_of(static_cast<double>(good) / static_cast<double>(p.faces.size()), t.values.p_min, margin))
        return false;
    return true;
}

}  // namespace

std::vector<FaceObservation> rule_labeled_faces(std::size_t n, double label_noise, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<FaceObservation> faces;
    faces.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        FaceObservation f;
        f.features = random_features(rng, 0.8);
        f.bbox = random_box(rng, 3000, 2000);
        bool good = face_rule(f.features);
        if (rng.bernoulli(label_noise)) good = !good;
        f.label = good ? Quality::Good : Quality::Bad;
        faces.push_back(std::move(f));
    }
    return faces;
}

GrayImage face_crop(const core::FaceFeatures& f, int width, int height) {
    GrayImage sharp(width, height, 30);
    const double cx = width / 2.0 + std::clamp(f.yaw, -90.0, 90.0) / 90.0 * width / 3.0;
    const double cy = height / 2.0;
    const double rx = width * 0.3, ry = height * 0.42;
    const auto face = static_cast<std::uint8_t>(std::lround(90.0 + 140.0 * std::clamp(f.exposure, 0.0, 1.0)));
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double u = (x + 0.5 - cx) / rx, v = (y + 0.5 - cy) / ry;
            if (u * u + v * v <= 1.0) sharp.at(x, y) = face;
        }
    const int mouth_y = static_cast<int>(cy + ry * 0.45);
    const double half = rx * (0.2 + 0.6 * std::clamp(f.joy, 0.0, 1.0));
    for (int x = static_cast<int>(cx - half); x <= static_cast<int>(cx + half); ++x)
        if (x >= 0 && x < width && mouth_y < height) sharp.at(x, mouth_y) = 0;

    const int radius = static_cast<int>(std::lround(3.0 * std::clamp(f.blur, 0.0, 1.0)));
    if (radius == 0) return sharp;
    GrayImage out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            int sum = 0, n = 0;
            for (int yy = std::max(0, y - radius); yy <= std::min(height - 1, y + radius); ++yy)
                for (int xx = std::max(0, x - radius); xx <= std::min(width - 1, x + radius); ++xx) {
                    sum += sharp.at(xx, yy);
                    ++n;
                }
            out.at(x, y) = static_cast<std::uint8_t>((sum + n / 2) / n);
        }
    return out;
}

core::Dataset threshold_labeled_pictures(std::size_t n, const composition::ThresholdSet& hidden, double margin,
                                         std::uint64_t seed) {
    Rng rng(seed);
    core::Dataset ds;
    ds.provenance = "synthetic:threshold_labeled";
    const bool heuristic = hidden.kind == composition::ThresholdKind::Heuristic;
    while (ds.records.size() < n) {
        const bool want_good = rng.bernoulli(0.5);
        PictureRecord p;
        p.width = 3000;
        p.height = 2000;
        const std::size_t faces = 1 + rng.below(3);
        for (std::size_t k = 0; k < faces; ++k) {
            FaceObservation f;
            f.bbox = random_box(rng, p.width, p.height);
            f.features = random_features(rng, 0.8);
            if (heuristic) f.score = rng.uniform();
            p.faces.push_back(std::move(f));
        }
        if (!respects_margin(p, hidden, margin)) continue;
        const Quality q = thresholds::classify_with_thresholds(p, hidden);
        if ((q == Quality::Good) != want_good) continue;
        p.label = q;
        p.picture_id = "p" + std::to_string(ds.records.size());
        p.burst_id = "b" + std::to_string(ds.records.size());
        ds.records.push_back(std::move(p));
    }
    return ds;
}

bool layout_rule(const PictureRecord& picture) {
    const int x_lo = abstraction::kRenderWidth / 10, x_hi = abstraction::kRenderWidth - x_lo;
    const int y_lo = abstraction::kRenderHeight / 10, y_hi = abstraction::kRenderHeight - y_lo;
    for (const auto& f : picture.faces) {
        if (abstraction::face_intensity(*f.score) < 147) return false;
        const BoundingBox r = abstraction::render_box(f.bbox, picture.width, picture.height);
        if (r.x_tl < x_lo || r.x_br > x_hi || r.y_tl < y_lo || r.y_br > y_hi) return false;
    }
    return true;
}

std::vector<PictureRecord> rule_labeled_layouts(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PictureRecord> out;
    out.reserve(n);
    const int W = 3000, H = 2000;
    const int x_lo = W / 10, x_hi = W - W / 10, y_lo = H / 10, y_hi = H - H / 10;
    // 20 original pixels per render pixel; keep 3 render pixels clear of the band edges.
    const int gap = 60;
    for (std::size_t i = 0; i < n; ++i) {
        PictureRecord p;
        p.picture_id = "layout" + std::to_string(i);
        p.burst_id = p.picture_id;
        p.width = W;
        p.height = H;
        const std::size_t faces = 1 + rng.below(3);
        for (std::size_t k = 0; k < faces; ++k) {
            FaceObservation f;
            const bool good_score = rng.bernoulli(0.8);
            const bool good_place = rng.bernoulli(0.8);
            f.score = good_score ? rng.uniform(0.64, 1.0) : rng.uniform(0.0, 0.56);
            const int w = static_cast<int>(rng.uniform(160.0, 700.0));
            const int h = static_cast<int>(w * rng.uniform(1.0, 1.4));
            int x, y;
            if (good_place) {
                x = x_lo + gap + static_cast<int>(rng.below(static_cast<std::uint64_t>(x_hi - x_lo - 2 * gap - w)));
                y = y_lo + gap + static_cast<int>(rng.below(static_cast<std::uint64_t>(y_hi - y_lo - 2 * gap - h)));
            } else {
                // Crosses one of the four band edges by at least `gap`.
                x = static_cast<int>(rng.below(static_cast<std::uint64_t>(W - w)));
                y = static_cast<int>(rng.below(static_cast<std::uint64_t>(H - h)));
                switch (rng.below(4)) {
                    case 0: x = static_cast<int>(rng.below(static_cast<std::uint64_t>(x_lo - gap))); break;
                    case 1: x = W - w - static_cast<int>(rng.below(static_cast<std::uint64_t>(x_lo - gap))); break;
                    case 2: y = static_cast<int>(rng.below(static_cast<std::uint64_t>(y_lo - gap))); break;
                    default: y = H - h - static_cast<int>(rng.below(static_cast<std::uint64_t>(y_lo - gap))); break;
                }
            }
            f.bbox = {x, y, x + w, y + h};
            p.faces.push_back(std::move(f));
        }
        p.label = layout_rule(p) ? Quality::Good : Quality::Bad;
        out.push_back(std::move(p));
    }
    return out;
}

core::Dataset burst_dataset(std::size_t bursts, std::size_t pictures_per_burst, std::uint64_t seed) {
    Rng rng(seed);
    core::Dataset ds;
    ds.provenance = "synthetic:bursts";
    const composition::BaselineThresholds position{0.05, 0.95, 0.05, 0.95, 0.0005, 0.3};
    for (std::size_t b = 0; b < bursts; ++b) {
        const std::size_t faces = 1 + rng.below(4);
        // A burst shares its subjects; frames jitter position and expression.
        std::vector<BoundingBox> anchors;
        for (std::size_t k = 0; k < faces; ++k) {
            const int w = static_cast<int>(rng.uniform(150.0, 500.0));
            const int h = static_cast<int>(w * 1.2);
            const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(6000 - w)));
            const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(4000 - h)));
            anchors.push_back({x, y, x + w, y + h});
        }
        for (std::size_t i = 0; i < pictures_per_burst; ++i) {
            PictureRecord p;
            p.picture_id = "burst" + std::to_string(b) + "_" + std::to_string(i);
            p.burst_id = "burst" + std::to_string(b);
            p.width = 6000;
            p.height = 4000;
            std::size_t good_faces = 0;
            for (const auto& a : anchors) {
                FaceObservation f;
                const int dx = static_cast<int>(rng.uniform(-120.0, 120.0));
                const int dy = static_cast<int>(rng.uniform(-80.0, 80.0));
                f.bbox = {std::clamp(a.x_tl + dx, 0, 5999 - a.width()), std::clamp(a.y_tl + dy, 0, 3999 - a.height()), 0, 0};
                f.bbox.x_br = f.bbox.x_tl + a.width();
                f.bbox.y_br = f.bbox.y_tl + a.height();
                f.features = random_features(rng, 0.85);
                const bool good = face_rule(f.features);
                good_faces += good;
                f.label = good ? Quality::Good : Quality::Bad;
                p.faces.push_back(std::move(f));
            }
            const bool placed = composition::baseline_score(p, position).passed;
            p.label = placed && 2 * good_faces > p.faces.size() ? Quality::Good : Quality::Bad;
            ds.records.push_back(std::move(p));
        }
    }
    return ds;
}

}  // namespace robophoto::synth
