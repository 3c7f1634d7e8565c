#pragma once

#include <array>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "robophoto/image.hpp"

namespace robophoto::sim {

/// Binary line mask as seen by the downward line camera (post color mask).
struct LineImage {
    static constexpr int kWidth = 640;
    static constexpr int kHeight = 480;
    static constexpr int kSliceHeight = 20;

    GrayImage mask{kWidth, kHeight, 0};

    static int slice_start_row(int height = kHeight) { return (height * 3) / 4; }
};

/// Horizontal centroid sum(x I) / sum(I) over the 20-row slice starting at
/// 75% of the height; nullopt when the slice is empty.
std::optional<double> line_centroid(const GrayImage& mask);
inline std::optional<double> line_centroid(const LineImage& image) { return line_centroid(image.mask); }

struct ControllerParams {
    double k_p = 1.0;    // rad/s per unit normalized pixel error
    double v_lin = 0.3;  // m/s
};

struct Command {
    double v = 0.0;
    double omega = 0.0;  // rad/s, positive counter-clockwise
    bool operator==(const Command&) const = default;
};

/// omega = -k_p (x - w/2) / (w/2); v = v_lin.
Command steer(double centroid_x, const ControllerParams& params, int image_width = LineImage::kWidth);

struct CollisionParams {
    std::size_t n_stop = 10;
    double x_stop = 0.5;
    double z_stop = 2.0;
    std::size_t n_detected = 4;
    std::size_t n_window = 5;
    double t_stop = 2.0;
};

/// Points closer than these bounds belong to the robot frame and are ignored.
struct Footprint {
    double half_width = 0.25;
    double depth = 0.3;
};

/// Laser-scan point in the robot frame: x to the right, z forward (m).
struct ScanPoint {
    double x = 0.0;
    double z = 0.0;
};

struct CollisionState {
    std::deque<bool> window;  // most recent frame last
    bool stopped = false;
    std::optional<double> clear_elapsed;  // seconds of consecutive clear frames while stopped
};

/// Footprint points removed, then blocked iff at least n_stop points satisfy
/// |x| < x_stop and z < z_stop.
bool frame_blocked(std::span<const ScanPoint> points, const CollisionParams& params, const Footprint& footprint = {});

/// Enters stopped when n_detected of the last n_window frames are blocked;
/// leaves it after t_stop seconds of consecutive clear frames.
CollisionState collision_update(std::span<const ScanPoint> points, CollisionState state, double dt,
                                const CollisionParams& params, const Footprint& footprint = {});

enum class Camera { Left, Front, Right };

std::string_view to_string(Camera c);

struct PictureTakingParams {
    std::size_t n_max = 7;
    std::size_t n_window = 10;
    double theta_side_deg = 130.0;
    double theta_front_deg = 40.0;
    std::size_t n_burst = 20;
    double rotation_speed = 0.5;   // rad/s
    double heading_tolerance_deg = 1.0;
    double transfer_pause = 5.0;   // s of line following without voting
};

/// Camera with strictly the most faces in this frame; nullopt for ties and
/// empty frames.
std::optional<Camera> frame_leader(const std::array<int, 3>& counts);

/// A camera wins if it leads at least n_max of the last n_window frames.
std::optional<Camera> camera_vote(std::span<const std::optional<Camera>> history, const PictureTakingParams& params);

/// Signed rotation for a winning camera: Left counter-clockwise, Right and
/// Front clockwise (radians, positive counter-clockwise).
double rotation_for(Camera c, const PictureTakingParams& params);

// Behavior states.
struct FollowLine {};
struct Stopped {
    bool resume_to_pause = false;
    double pause_remaining = 0.0;
};
struct RotateToSubject {
    Camera camera = Camera::Front;
    double direction = 1.0;  // +1 counter-clockwise
    double remaining = 0.0;  // rad still to rotate
    double rotated = 0.0;
};
struct BurstAndRotateBack {
    std::size_t shots_left = 0;
    double direction = -1.0;  // of the return rotation
    double remaining = 0.0;   // rad until the pre-rotation heading
    bool line_found = false;
};
struct TransferPause {
    double remaining = 0.0;
};

using BehaviorState = std::variant<FollowLine, Stopped, RotateToSubject, BurstAndRotateBack, TransferPause>;

std::string_view state_name(const BehaviorState& s);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;  // rad, counter-clockwise from +x
};

/// Ground footprint of the line camera's 20-row slice.
struct CameraGeometry {
    double lookahead_near = 0.95;  // m, bottom slice row
    double lookahead_far = 1.05;   // m, top slice row
    double half_width = 0.3;       // m visible either side at the slice
    double tape_width = 0.02;      // m
};

struct Obstacle {
    double t_start = 0.0;
    double t_end = 0.0;
    std::vector<ScanPoint> points;
};

struct FaceCluster {
    Camera camera = Camera::Left;
    std::size_t from_frame = 0;
    std::size_t to_frame = 0;  // exclusive
    int count = 0;
};

struct Scenario {
    std::string name;
    double dt = 0.1;
    double duration = 60.0;
    std::vector<Vec2> line;
    Pose start;
    ControllerParams controller;
    CollisionParams collision;
    PictureTakingParams picture;
    CameraGeometry camera;
    Footprint footprint;
    std::vector<ScanPoint> frame_points;  // always in the scan (robot frame, filtered by footprint)
    std::vector<Obstacle> obstacles;
    std::array<std::vector<int>, 3> face_streams;  // per-frame counts: left, front, right
    std::vector<FaceCluster> face_clusters;        // added on top of the streams
    double finish_tolerance = 0.05;                // m before the polyline end
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);

/// Renders the slice rows of the line mask for a pose; other rows stay 0.
LineImage render_line_image(const Scenario& scenario, const Pose& pose);

std::vector<ScanPoint> scan_at(const Scenario& scenario, double t);
std::array<int, 3> face_counts_at(const Scenario& scenario, std::size_t frame);

struct World {
    Pose pose;
    std::size_t frame = 0;
    CollisionState collision;
    std::deque<std::optional<Camera>> vote_history;
    BehaviorState state = FollowLine{};
    bool finished = false;

    double time(double dt) const { return static_cast<double>(frame) * dt; }
};

struct StepRecord {
    double t = 0.0;
    std::string state;  // state that produced the command
    Command command;
    std::vector<std::string> events;
    Pose pose;  // after integration
    std::optional<double> centroid;
};

struct StepOutcome {
    World world;
    StepRecord record;
};

/// One control period: sense, decide, act, integrate the pose.
StepOutcome behavior_step(const Scenario& scenario, World world);

World initial_world(const Scenario& scenario);

/// Steps until the course is complete or the duration elapses.
std::vector<StepRecord> run_scenario(const Scenario& scenario);

nlohmann::json to_json(const StepRecord& r);
/// One JSON object per line.
void write_event_log(std::ostream& out, std::span<const StepRecord> log);

/// Canned scenarios used by the tests and the CLI.
Scenario straight_line_scenario();
Scenario left_cluster_scenario();
Scenario collision_scenario();
Scenario empty_course_scenario();

}  // namespace robophoto::sim
