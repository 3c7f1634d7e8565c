#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "robophoto/behavior_sim.hpp"
#include "robophoto/errors.hpp"

using namespace robophoto;
using namespace robophoto::sim;

namespace {

void fill_columns(GrayImage& mask, int x0, int x1) {
    const int top = LineImage::slice_start_row(mask.height);
    for (int y = top; y < top + LineImage::kSliceHeight; ++y)
        for (int x = x0; x < x1; ++x) mask.at(x, y) = 1;
}

std::vector<ScanPoint> person(std::size_t n) { return std::vector<ScanPoint>(n, ScanPoint{0.3, 1.0}); }

std::size_t count_event(const std::vector<StepRecord>& log, const std::string& name) {
    std::size_t n = 0;
    for (const auto& r : log) n += std::count(r.events.begin(), r.events.end(), name);
    return n;
}

}  // namespace

TEST_SUITE("behavior_sim") {

TEST_CASE("line centroid") {
    LineImage img;
    CHECK_FALSE(line_centroid(img).has_value());
    fill_columns(img.mask, 315, 325);
    CHECK(std::abs(*line_centroid(img) - 320.0) <= 0.5);

    LineImage two;
    fill_columns(two.mask, 100, 101);
    fill_columns(two.mask, 200, 201);
    CHECK(*line_centroid(two) == doctest::Approx(150.0));

    // Pixels outside the slice are ignored.
    LineImage outside;
    outside.mask.at(10, 0) = 1;
    outside.mask.at(10, 479) = 1;
    CHECK_FALSE(line_centroid(outside).has_value());
    CHECK(LineImage::slice_start_row() == 360);
}

TEST_CASE("steering") {
    ControllerParams p{1.5, 0.3};
    CHECK(steer(320.0, p).omega == 0.0);
    CHECK(steer(320.0, p).v == 0.3);
    CHECK(steer(640.0, p).omega == doctest::Approx(-1.5));
    CHECK(steer(0.0, p).omega == doctest::Approx(1.5));
}

TEST_CASE("steering moves the line toward the center") {
    for (double offset : {-0.06, 0.06}) {
        Scenario s = straight_line_scenario();
        s.start.y = offset;
        World w = initial_world(s);
        const double before = *line_centroid(render_line_image(s, w.pose));
        REQUIRE(before != 320.0);
        const auto out = behavior_step(s, w);
        const double after = *line_centroid(render_line_image(s, out.world.pose));
        CHECK(std::abs(after - 320.0) < std::abs(before - 320.0));
    }
}

TEST_CASE("frame blocking") {
    CollisionParams p;
    CHECK(frame_blocked(person(10), p));
    CHECK_FALSE(frame_blocked(person(9), p));
    // Footprint points do not count.
    std::vector<ScanPoint> robot(20, ScanPoint{0.1, 0.2});
    CHECK_FALSE(frame_blocked(robot, p));
    std::vector<ScanPoint> far(20, ScanPoint{0.3, 2.5});
    CHECK_FALSE(frame_blocked(far, p));
    std::vector<ScanPoint> wide(20, ScanPoint{-0.6, 1.0});
    CHECK_FALSE(frame_blocked(wide, p));
}

TEST_CASE("four blocked frames out of five stop the robot") {
    CollisionParams p;
    CollisionState st;
    const bool pattern[] = {true, false, true, true, true};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK_FALSE(st.stopped);
        st = collision_update(pattern[i] ? person(10) : person(0), st, 0.1, p);
    }
    CHECK(st.stopped);

    CollisionState never;
    for (int i = 0; i < 20; ++i) never = collision_update(person(9), never, 0.1, p);
    CHECK_FALSE(never.stopped);
}

TEST_CASE("motion resumes after two clear seconds") {
    CollisionParams p;
    CollisionState st;
    for (int i = 0; i < 5; ++i) st = collision_update(person(10), st, 0.1, p);
    REQUIRE(st.stopped);
    int clear_frames = 0;
    while (st.stopped && clear_frames < 100) {
        st = collision_update(person(0), st, 0.1, p);
        ++clear_frames;
    }
    // The first clear frame starts the clock at zero.
    CHECK((clear_frames - 1) * 0.1 == doctest::Approx(2.0));

    // A blocked frame restarts the clear timer.
    CollisionState again;
    for (int i = 0; i < 5; ++i) again = collision_update(person(10), again, 0.1, p);
    for (int i = 0; i < 15; ++i) again = collision_update(person(0), again, 0.1, p);
    again = collision_update(person(10), again, 0.1, p);
    for (int i = 0; i < 20; ++i) again = collision_update(person(0), again, 0.1, p);
    CHECK(again.stopped);
    again = collision_update(person(0), again, 0.1, p);
    CHECK_FALSE(again.stopped);
}

TEST_CASE("camera voting") {
    PictureTakingParams p;
    std::vector<std::optional<Camera>> h(10, std::nullopt);
    for (int i = 0; i < 7; ++i) h[i] = Camera::Left;
    CHECK(camera_vote(h, p) == Camera::Left);
    h[0] = Camera::Front;
    CHECK_FALSE(camera_vote(h, p).has_value());
    CHECK_FALSE(camera_vote({}, p).has_value());

    CHECK(frame_leader({3, 1, 0}) == Camera::Left);
    CHECK(frame_leader({0, 0, 2}) == Camera::Right);
    CHECK_FALSE(frame_leader({2, 2, 0}).has_value());
    CHECK_FALSE(frame_leader({0, 0, 0}).has_value());

    const double deg = std::acos(-1.0) / 180.0;
    CHECK(rotation_for(Camera::Front, p) == doctest::Approx(-40.0 * deg));
    CHECK(rotation_for(Camera::Left, p) == doctest::Approx(130.0 * deg));
    CHECK(rotation_for(Camera::Right, p) == doctest::Approx(-130.0 * deg));
}

TEST_CASE("shutters only while bursting") {
    for (const auto& s : {straight_line_scenario(), left_cluster_scenario(), collision_scenario(),
                          empty_course_scenario()}) {
        const auto log = run_scenario(s);
        for (const auto& r : log) {
            if (std::count(r.events.begin(), r.events.end(), "shutter")) CHECK(r.state == "BurstAndRotateBack");
            if (r.state == "Stopped") CHECK(r.command == Command{});
        }
    }
}

TEST_CASE("a left cluster gives one burst") {
    const auto log = run_scenario(left_cluster_scenario());
    CHECK(count_event(log, "vote_left") == 1);
    CHECK(count_event(log, "shutter") == 20);
    CHECK(count_event(log, "line_found") == 1);
}

TEST_CASE("no faces means no pictures") {
    const auto log = run_scenario(empty_course_scenario());
    CHECK(count_event(log, "shutter") == 0);
    CHECK(count_event(log, "course_complete") == 1);
}

TEST_CASE("obstacles do not interrupt a rotation") {
    const Scenario plain = left_cluster_scenario();
    Scenario blocked = plain;
    blocked.obstacles = {{2.7, 20.0, person(10)}};
    const auto a = run_scenario(plain);
    const auto b = run_scenario(blocked);
    std::size_t compared = 0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        if (a[i].state != "RotateToSubject" && a[i].state != "BurstAndRotateBack") continue;
        CHECK(b[i].state == a[i].state);
        CHECK(b[i].command == a[i].command);
        ++compared;
    }
    CHECK(compared > 40);
    CHECK(count_event(b, "stop") >= 1);
}

TEST_CASE("scenario json round trip and stable logs") {
    const auto s = left_cluster_scenario();
    const auto back = scenario_from_json(scenario_to_json(s));
    std::ostringstream a, b;
    write_event_log(a, run_scenario(s));
    write_event_log(b, run_scenario(back));
    CHECK(a.str() == b.str());
    CHECK_THROWS_AS(scenario_from_json(nlohmann::json{{"dt", "fast"}}), ParseError);
}

}
