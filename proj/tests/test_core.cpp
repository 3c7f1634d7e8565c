#include <doctest.h>

#include <map>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "robophoto/core.hpp"
#include "robophoto/rng.hpp"

using namespace robophoto;
using namespace robophoto::core;
using testing::face_at;
using testing::picture;

TEST_SUITE("core_model") {

TEST_CASE("face count categories") {
    auto p = picture("a", "b", 100, 100, {face_at(0, 0, 10, 10)});
    CHECK(face_count_category(p) == FaceCountCategory::One);
    p.faces.push_back(face_at(10, 10, 20, 20));
    CHECK(face_count_category(p) == FaceCountCategory::Two);
    for (int i = 0; i < 3; ++i) p.faces.push_back(face_at(20, 20, 30, 30));
    CHECK(face_count_category(p) == FaceCountCategory::ThreePlus);
    p.faces.clear();
    CHECK_THROWS_AS(face_count_category(p), NoFacesError);
}

TEST_CASE("likelihood levels") {
    CHECK(likelihood_level("VERY_UNLIKELY") == 0.0);
    CHECK(likelihood_level("UNLIKELY") == 0.25);
    CHECK(likelihood_level("POSSIBLE") == 0.5);
    CHECK(likelihood_level("LIKELY") == 0.75);
    CHECK(likelihood_level("VERY_LIKELY") == 1.0);
    CHECK(likelihood_level("UNKNOWN") == 0.0);
    CHECK_THROWS(likelihood_level("SOMETIMES"));
}

TEST_CASE("undersized face image is dropped and counted") {
    auto small = face_at(0, 0, 20, 20);
    small.face_image = GrayImage(20, 20, 100);
    auto big = face_at(30, 30, 70, 70);
    big.face_image = GrayImage(40, 40, 100);
    const auto r = validate_dataset({picture("p", "b", 100, 100, {small, big})}, "t");
    REQUIRE(r.dataset.records.size() == 1);
    CHECK(r.dataset.records[0].faces.size() == 1);
    CHECK(r.drops.faces_dropped == 1);

    const auto only_small = validate_dataset({picture("p", "b", 100, 100, {small})}, "t");
    CHECK(only_small.dataset.records.empty());
    CHECK(only_small.drops.faceless_dropped == 1);
    const auto kept = validate_dataset({picture("p", "b", 100, 100, {small})}, "t", {.keep_faceless = true});
    REQUIRE(kept.dataset.records.size() == 1);
    CHECK(kept.dataset.records[0].faces.empty());
}

TEST_CASE("degenerate box rejects the record") {
    const auto r = validate_dataset({picture("p", "b", 100, 100, {face_at(10, 10, 10, 20)})}, "t");
    CHECK(r.dataset.records.empty());
    CHECK(r.drops.records_dropped == 1);
}

TEST_CASE("other invariant violations") {
    std::vector<PictureRecord> bad;
    bad.push_back(picture("outside", "b", 100, 100, {face_at(50, 50, 101, 60)}));
    bad.push_back(picture("", "b", 100, 100, {face_at(0, 0, 5, 5)}));
    bad.push_back(picture("noburst", "", 100, 100, {face_at(0, 0, 5, 5)}));
    bad.push_back(picture("tiny", "b", 1, 100, {}));
    auto angle = face_at(0, 0, 5, 5);
    angle.features.yaw = 200.0;
    bad.push_back(picture("angle", "b", 100, 100, {angle}));
    auto nan = face_at(0, 0, 5, 5);
    nan.features.blur = std::nan("");
    bad.push_back(picture("nan", "b", 100, 100, {nan}));
    bad.push_back(picture("score", "b", 100, 100, {face_at(0, 0, 5, 5, 1.5)}));
    const auto r = validate_dataset(bad, "t", {.keep_faceless = true});
    CHECK(r.dataset.records.empty());
    CHECK(r.drops.records_dropped == bad.size());
}

TEST_CASE("well-formed record passes unchanged") {
    auto f = face_at(10, 20, 60, 80, 0.4);
    f.features = {1, 2, 3, 0.5, 0.25, 0, 0.75, 0.3, 0.1};
    f.label = Quality::Good;
    auto p = picture("p1", "b1", 640, 480, {f});
    p.label = Quality::Bad;
    const auto r = validate_dataset({p}, "t");
    REQUIRE(r.dataset.records.size() == 1);
    CHECK(r.dataset.records[0] == p);
    CHECK(r.dataset.provenance == "t");
}

TEST_CASE("likelihoods and image scores are clamped") {
    auto f = face_at(0, 0, 10, 10);
    f.features.joy = 1.3;
    f.features.blur = -0.2;
    const auto r = validate_dataset({picture("p", "b", 100, 100, {f})}, "t");
    REQUIRE(r.dataset.records.size() == 1);
    CHECK(r.dataset.records[0].faces[0].features.joy == 1.0);
    CHECK(r.dataset.records[0].faces[0].features.blur == 0.0);
}

TEST_CASE("duplicate picture ids are an error") {
    CHECK_THROWS_AS(validate_dataset({picture("p", "a", 10, 10), picture("p", "b", 10, 10)}, "t"), ValidationError);
}

std::vector<PictureRecord> random_records(Rng& rng, std::size_t n) {
    std::vector<PictureRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto p = picture("p" + std::to_string(i), "b" + std::to_string(rng.below(n / 3 + 1)), 50, 40);
        const std::size_t faces = rng.below(3);
        for (std::size_t k = 0; k < faces; ++k) {
            const int x = static_cast<int>(rng.below(60)) - 5, y = static_cast<int>(rng.below(50)) - 5;
            auto f = face_at(x, y, x + 1 + static_cast<int>(rng.below(10)), y + 1 + static_cast<int>(rng.below(10)));
            f.features.joy = rng.uniform(-0.5, 1.5);
            if (rng.bernoulli(0.3)) f.face_image = GrayImage(20 + static_cast<int>(rng.below(20)), 35, 0);
            p.faces.push_back(f);
        }
        out.push_back(p);
    }
    return out;
}

TEST_CASE("validation is idempotent") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        for (bool keep : {false, true}) {
            const auto once = validate_dataset(random_records(rng, 30), "t", {.keep_faceless = keep});
            const auto twice = validate_dataset(once.dataset.records, "t", {.keep_faceless = keep});
            CHECK(twice.dataset.records == once.dataset.records);
            CHECK(twice.drops.records_dropped + twice.drops.faces_dropped + twice.drops.faceless_dropped == 0);
        }
    }
}

Dataset singleton_bursts(std::size_t n) {
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) d.records.push_back(picture("p" + std::to_string(i), "b" + std::to_string(i), 10, 10));
    return d;
}

std::vector<std::string> ids(const Dataset& d) {
    std::vector<std::string> v;
    for (const auto& r : d.records) v.push_back(r.picture_id);
    return v;
}

TEST_CASE("split sizes follow the ratios") {
    const auto s = split_dataset(singleton_bursts(100), {0.8, 0.1, 0.1}, 7);
    CHECK(s.train.records.size() == 80);
    CHECK(s.test.records.size() == 10);
    CHECK(s.validation.records.size() == 10);
}

TEST_CASE("split is deterministic") {
    const auto d = singleton_bursts(57);
    const auto a = split_dataset(d, {0.8, 0.1, 0.1}, 11);
    const auto b = split_dataset(d, {0.8, 0.1, 0.1}, 11);
    CHECK(ids(a.train) == ids(b.train));
    CHECK(ids(a.test) == ids(b.test));
    CHECK(ids(a.validation) == ids(b.validation));
    const auto c = split_dataset(d, {0.8, 0.1, 0.1}, 12);
    CHECK(ids(a.train) != ids(c.train));
}

TEST_CASE("one burst lands in one partition") {
    Dataset d;
    for (int i = 0; i < 10; ++i) d.records.push_back(picture("p" + std::to_string(i), "only", 10, 10));
    const auto s = split_dataset(d, {0.8, 0.1, 0.1}, 7);
    const std::size_t sizes[] = {s.train.records.size(), s.test.records.size(), s.validation.records.size()};
    CHECK(std::count(std::begin(sizes), std::end(sizes), 10u) == 1);
    CHECK(std::count(std::begin(sizes), std::end(sizes), 0u) == 2);
}

TEST_CASE("ratios must sum to one") {
    CHECK_THROWS_AS(split_dataset(singleton_bursts(10), {0.8, 0.1, 0.2}, 1), ArgumentError);
    CHECK_THROWS_AS(split_dataset(singleton_bursts(10), {1.2, -0.1, -0.1}, 1), ArgumentError);
    CHECK_NOTHROW(split_dataset(singleton_bursts(10), {0.7, 0.2, 0.1}, 1));
}

TEST_CASE("split partitions for every seed") {
    Rng rng(99);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Dataset d;
        d.records = random_records(rng, 20 + rng.below(60));
        const auto s = split_dataset(d, {0.8, 0.1, 0.1}, seed);
        std::multiset<std::string> all;
        std::map<std::string, int> burst_part;
        bool atomic = true;
        int part = 0;
        for (const Dataset* p : {&s.train, &s.test, &s.validation}) {
            for (const auto& r : p->records) {
                all.insert(r.picture_id);
                auto [it, fresh] = burst_part.emplace(r.burst_id, part);
                atomic &= fresh || it->second == part;
            }
            ++part;
        }
        const auto input = ids(d);
        CHECK(all == std::multiset<std::string>(input.begin(), input.end()));
        CHECK(atomic);
    }
}

}
