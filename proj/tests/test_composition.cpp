#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "robophoto/composition.hpp"
#include "robophoto/rng.hpp"

using namespace robophoto;
using namespace robophoto::composition;
using testing::face_at;
using testing::picture;

namespace {

const BaselineThresholds kOpen{0.0, 1.0, 0.0, 1.0, 0.0, 1.0};

core::PictureRecord random_picture(Rng& rng, int w, int h) {
    auto p = picture("r", "b", w, h);
    const int n = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i) {
        const int fw = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(w / 3)));
        const int fh = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(h / 3)));
        const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - fw)));
        const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - fh)));
        p.faces.push_back(face_at(x, y, x + fw, y + fh, rng.uniform()));
    }
    return p;
}

BaselineThresholds random_thresholds(Rng& rng) {
    auto pair = [&] {
        double a = rng.uniform(), b = rng.uniform();
        if (a > b) std::swap(a, b);
        return std::pair{a * 0.5, 0.5 + b * 0.5};
    };
    const auto [x0, x1] = pair();
    const auto [y0, y1] = pair();
    const auto [o0, o1] = pair();
    return {x0, x1, y0, y1, o0 * 0.1, o1};
}

}  // namespace

TEST_SUITE("composition") {

TEST_CASE("face centers") {
    auto c = face_center({100, 50, 200, 150});
    CHECK(c.x == 150.0);
    CHECK(c.y == 100.0);
    c = face_center({0, 0, 2, 2});
    CHECK(c.x == 1.0);
    c = face_center({10, 10, 11, 11});
    CHECK(c.x == 10.5);
    CHECK(c.y == 10.5);
}

TEST_CASE("center distances") {
    CHECK(center_distance({1400, 900, 1600, 1100}, 3000, 2000) == 0.0);
    CHECK(center_distance({0, 0, 0, 0}, 3000, 2000) == doctest::Approx(1.0));
    const double expected = 1000.0 / std::sqrt(1500.0 * 1500.0 + 1000.0 * 1000.0);
    CHECK(expected == doctest::Approx(0.5547).epsilon(1e-4));
    CHECK(center_distance({1490, 0, 1510, 0}, 3000, 2000) == doctest::Approx(expected));
}

TEST_CASE("baseline gate") {
    CHECK(baseline_gate({100, 100, 300, 300}, 1000, 1000, kOpen));
    auto t = kOpen;
    t.occ_max = 0.5;
    CHECK_FALSE(baseline_gate({0, 0, 1000, 1000}, 1000, 1000, t));
    t = kOpen;
    t.x_min = 0.1;
    CHECK_FALSE(baseline_gate({50, 100, 300, 300}, 1000, 1000, t));
    CHECK(baseline_gate({101, 100, 300, 300}, 1000, 1000, t));
    // Bounds are strict.
    CHECK_FALSE(baseline_gate({100, 100, 300, 300}, 1000, 1000, t));
}

TEST_CASE("baseline scores") {
    CHECK_FALSE(baseline_score(picture("a", "b", 3000, 2000), kOpen).passed);
    CHECK(baseline_score(picture("a", "b", 3000, 2000), kOpen).score == 0.0);

    auto p = picture("a", "b", 3000, 2000, {face_at(1400, 900, 1600, 1100), face_at(2150, 1400, 2350, 1600)});
    auto s = baseline_score(p, kOpen);
    CHECK(s.passed);
    CHECK(s.score == doctest::Approx(1.5));

    auto t = kOpen;
    t.x_max = 0.7;
    s = baseline_score(p, t);
    CHECK_FALSE(s.passed);
    CHECK(s.score == 0.0);
}

TEST_CASE("heuristic scores") {
    HeuristicThresholds h{kOpen, 0.5, 0.6};
    auto p = picture("a", "b", 3000, 2000, {face_at(1400, 900, 1600, 1100, 0.9), face_at(100, 100, 300, 300, 0.2)});
    auto s = heuristic_score(p, h);
    CHECK_FALSE(s.passed);
    CHECK(s.score == 0.0);

    auto single = picture("a", "b", 3000, 2000, {face_at(1400, 900, 1600, 1100, 0.8)});
    s = heuristic_score(single, {kOpen, 0.0, 0.0});
    CHECK(s.passed);
    CHECK(s.score == doctest::Approx(0.8));

    // A share equal to p_min fails.
    auto two = picture("a", "b", 3000, 2000, {face_at(1400, 900, 1600, 1100, 0.9), face_at(100, 100, 300, 300, 0.2)});
    CHECK_FALSE(heuristic_score(two, {kOpen, 0.5, 0.5}).passed);
    CHECK(heuristic_score(two, {kOpen, 0.5, 0.49}).passed);

    single.faces[0].score.reset();
    CHECK_THROWS_AS(heuristic_score(single, {kOpen, 0.0, 0.0}), MissingFaceScore);
}

TEST_CASE("heuristic with unit scores matches baseline") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        auto p = random_picture(rng, 3000, 2000);
        for (auto& f : p.faces) f.score = 1.0;
        const auto t = random_thresholds(rng);
        const auto b = baseline_score(p, t);
        const auto h = heuristic_score(p, {t, rng.uniform(0.0, 0.99), 0.0});
        CHECK(b.passed == h.passed);
        CHECK(b.score == h.score);
    }
}

TEST_CASE("scores stay within the face count") {
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        const auto p = random_picture(rng, 1200 + static_cast<int>(rng.below(3000)), 800 + static_cast<int>(rng.below(2000)));
        const auto t = random_thresholds(rng);
        for (const auto s : {baseline_score(p, t), heuristic_score(p, {t, rng.uniform(), rng.uniform()})}) {
            CHECK(s.score >= 0.0);
            CHECK(s.score <= static_cast<double>(p.faces.size()));
            if (!s.passed) CHECK(s.score == 0.0);
        }
    }
}

TEST_CASE("moving a face toward the center never lowers the score") {
    Rng rng(5);
    for (int i = 0; i < 300; ++i) {
        auto p = random_picture(rng, 3000, 2000);
        auto& f = p.faces[0];
        const auto before = baseline_score(p, kOpen);
        if (!before.passed) continue;
        const auto c = face_center(f.bbox);
        const int dx = c.x < 1500 ? 1 : (c.x > 1500 ? -1 : 0);
        const int dy = c.y < 1000 ? 1 : (c.y > 1000 ? -1 : 0);
        f.bbox = {f.bbox.x_tl + dx, f.bbox.y_tl + dy, f.bbox.x_br + dx, f.bbox.y_br + dy};
        const auto after = baseline_score(p, kOpen);
        if (after.passed) CHECK(after.score >= before.score);
    }
}

TEST_CASE("integer scaling leaves scores unchanged") {
    Rng rng(6);
    for (int i = 0; i < 300; ++i) {
        const auto p = random_picture(rng, 600, 400);
        const int k = 2 + static_cast<int>(rng.below(5));
        auto q = p;
        q.width *= k;
        q.height *= k;
        for (auto& f : q.faces) f.bbox = {f.bbox.x_tl * k, f.bbox.y_tl * k, f.bbox.x_br * k, f.bbox.y_br * k};
        const auto t = random_thresholds(rng);
        CHECK(baseline_score(p, t).passed == baseline_score(q, t).passed);
        CHECK(baseline_score(p, t).score == doctest::Approx(baseline_score(q, t).score).epsilon(1e-12));
    }
}

TEST_CASE("threshold set json round trip") {
    const auto h = ThresholdSet::heuristic({{0.1, 0.9, 0.2, 0.8, 0.01, 0.3}, 0.4, 0.5});
    const auto back = threshold_set_from_json(to_json(h));
    CHECK(back.kind == ThresholdKind::Heuristic);
    CHECK(back.values == h.values);
    const auto j = to_json(ThresholdSet::baseline({0.1, 0.9, 0.2, 0.8, 0.01, 0.3}));
    CHECK(j.at("kind") == "baseline");
    CHECK_FALSE(j.contains("r_min"));
}

}
