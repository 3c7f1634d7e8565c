#include "robophoto/behavior_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "robophoto/errors.hpp"

namespace robophoto::sim {

namespace {
constexpr double kDeg = M_PI / 180.0;
constexpr double kTimeEps = 1e-9;

double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a <= 0.0) a += 2.0 * M_PI;
    return a - M_PI;
}
}  // namespace

std::optional<double> line_centroid(const GrayImage& mask) {
    const int start = LineImage::slice_start_row(mask.height);
    const int end = std::min(mask.height, start + LineImage::kSliceHeight);
    double m00 = 0.0, m10 = 0.0;
    for (int y = start; y < end; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y) != 0) {
                m00 += 1.0;
                m10 += x;
            }
    if (m00 == 0.0) return std::nullopt;
    return m10 / m00;
}

Command steer(double centroid_x, const ControllerParams& params, int image_width) {
    const double half = image_width / 2.0;
    return {params.v_lin, -params.k_p * (centroid_x - half) / half};
}

bool frame_blocked(std::span<const ScanPoint> points, const CollisionParams& params, const Footprint& footprint) {
    std::size_t close = 0;
    for (const auto& p : points) {
        if (std::abs(p.x) <= footprint.half_width && p.z >= 0.0 && p.z <= footprint.depth) continue;
        if (std::abs(p.x) < params.x_stop && p.z < params.z_stop) ++close;
    }
    return close >= params.n_stop;
}

CollisionState collision_update(std::span<const ScanPoint> points, CollisionState state, double dt,
                                const CollisionParams& params, const Footprint& footprint) {
    const bool blocked = frame_blocked(points, params, footprint);
    state.window.push_back(blocked);
    while (state.window.size() > params.n_window) state.window.pop_front();
    if (!state.stopped) {
        const auto hits = static_cast<std::size_t>(std::count(state.window.begin(), state.window.end(), true));
        if (hits >= params.n_detected) {
            state.stopped = true;
            state.clear_elapsed.reset();
        }
        return state;
    }
    if (blocked) {
        state.clear_elapsed.reset();
    } else if (!state.clear_elapsed) {
        state.clear_elapsed = 0.0;
    } else {
        *state.clear_elapsed += dt;
    }
    if (state.clear_elapsed && *state.clear_elapsed >= params.t_stop - kTimeEps) {
        state.stopped = false;
        state.clear_elapsed.reset();
        state.window.clear();
    }
    return state;
}

std::string_view to_string(Camera c) {
    switch (c) {
        case Camera::Left: return "left";
        case Camera::Front: return "front";
        case Camera::Right: return "right";
    }
    return "?";
}

std::optional<Camera> frame_leader(const std::array<int, 3>& counts) {
    const int best = *std::max_element(counts.begin(), counts.end());
    if (best <= 0 || std::count(counts.begin(), counts.end(), best) != 1) return std::nullopt;
    return static_cast<Camera>(std::find(counts.begin(), counts.end(), best) - counts.begin());
}

std::optional<Camera> camera_vote(std::span<const std::optional<Camera>> history, const PictureTakingParams& params) {
    const std::size_t n = std::min(history.size(), params.n_window);
    std::array<std::size_t, 3> wins{};
    for (std::size_t i = history.size() - n; i < history.size(); ++i)
        if (history[i]) ++wins[static_cast<std::size_t>(*history[i])];
    for (Camera c : {Camera::Left, Camera::Front, Camera::Right})
        if (wins[static_cast<std::size_t>(c)] >= params.n_max) return c;
    return std::nullopt;
}

double rotation_for(Camera c, const PictureTakingParams& params) {
    switch (c) {
        case Camera::Left: return params.theta_side_deg * kDeg;
        case Camera::Right: return -params.theta_side_deg * kDeg;
        case Camera::Front: return -params.theta_front_deg * kDeg;
    }
    return 0.0;
}

std::string_view state_name(const BehaviorState& s) {
    struct Visitor {
        std::string_view operator()(const FollowLine&) const { return "FollowLine"; }
        std::string_view operator()(const Stopped&) const { return "Stopped"; }
        std::string_view operator()(const RotateToSubject&) const { return "RotateToSubject"; }
        std::string_view operator()(const BurstAndRotateBack&) const { return "BurstAndRotateBack"; }
        std::string_view operator()(const TransferPause&) const { return "TransferPause"; }
    };
    return std::visit(Visitor{}, s);
}

// ---------------------------------------------------------------------------
// World synthesis

namespace {

struct Closest {
    double distance = 0.0;
    double arc = 0.0;  // arc length of the closest polyline point
};

Closest closest_on_polyline(const std::vector<Vec2>& line, double px, double py) {
    Closest best{std::numeric_limits<double>::infinity(), 0.0};
    double arc = 0.0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        const double ax = line[i].x, ay = line[i].y;
        const double dx = line[i + 1].x - ax, dy = line[i + 1].y - ay;
        const double len2 = dx * dx + dy * dy;
        const double len = std::sqrt(len2);
        double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double cx = ax + t * dx - px, cy = ay + t * dy - py;
        const double d = std::sqrt(cx * cx + cy * cy);
        if (d < best.distance) best = {d, arc + t * len};
        arc += len;
    }
    return best;
}

double polyline_length(const std::vector<Vec2>& line) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) total += std::hypot(line[i + 1].x - line[i].x, line[i + 1].y - line[i].y);
    return total;
}

}  // namespace

LineImage render_line_image(const Scenario& scenario, const Pose& pose) {
    LineImage image;
    if (scenario.line.size() < 2) return image;
    const CameraGeometry& cam = scenario.camera;
    const double fx = std::cos(pose.heading), fy = std::sin(pose.heading);
    const double rx = fy, ry = -fx;  // right of heading
    const int start = LineImage::slice_start_row();
    const double half_cols = LineImage::kWidth / 2.0;
    for (int k = 0; k < LineImage::kSliceHeight; ++k) {
        const double f = cam.lookahead_far +
                         (cam.lookahead_near - cam.lookahead_far) * k / (LineImage::kSliceHeight - 1.0);
        for (int c = 0; c < LineImage::kWidth; ++c) {
            const double lateral = (c + 0.5 - half_cols) / half_cols * cam.half_width;
            const double px = pose.x + f * fx + lateral * rx;
            const double py = pose.y + f * fy + lateral * ry;
            if (closest_on_polyline(scenario.line, px, py).distance <= cam.tape_width / 2.0)
                image.mask.at(c, start + k) = 255;
        }
    }
    return image;
}

std::vector<ScanPoint> scan_at(const Scenario& scenario, double t) {
    std::vector<ScanPoint> points = scenario.frame_points;
    for (const auto& o : scenario.obstacles)
        if (t >= o.t_start - kTimeEps && t < o.t_end - kTimeEps) points.insert(points.end(), o.points.begin(), o.points.end());
    return points;
}

std::array<int, 3> face_counts_at(const Scenario& scenario, std::size_t frame) {
    std::array<int, 3> counts{};
    for (std::size_t c = 0; c < 3; ++c)
        if (frame < scenario.face_streams[c].size()) counts[c] = scenario.face_streams[c][frame];
    for (const auto& cl : scenario.face_clusters)
        if (frame >= cl.from_frame && frame < cl.to_frame) counts[static_cast<std::size_t>(cl.camera)] += cl.count;
    return counts;
}

World initial_world(const Scenario& scenario) {
    World w;
    w.pose = scenario.start;
    return w;
}

// ---------------------------------------------------------------------------
// Stepping

StepOutcome behavior_step(const Scenario& scenario, World world) {
    const double dt = scenario.dt;
    if (!(dt > 0.0)) throw ArgumentError("dt must be positive");
    const double t = world.time(dt);
    const double tolerance = scenario.picture.heading_tolerance_deg * kDeg;
    const double rot_speed = scenario.picture.rotation_speed;

    StepRecord rec;
    rec.t = t;
    rec.state = std::string(state_name(world.state));
    const LineImage view = render_line_image(scenario, world.pose);
    rec.centroid = line_centroid(view);
    auto& events = rec.events;
    Command cmd;

    auto follow = [&]() { cmd = rec.centroid ? steer(*rec.centroid, scenario.controller) : Command{scenario.controller.v_lin, 0.0}; };

    // Line-following states share the collision gate.
    auto gate = [&](bool in_pause, double pause_remaining) -> bool {
        world.collision = collision_update(scan_at(scenario, t), std::move(world.collision), dt, scenario.collision,
                                           scenario.footprint);
        if (world.collision.stopped) {
            world.state = Stopped{in_pause, pause_remaining};
            rec.state = "Stopped";
            events.push_back("stop");
            return true;
        }
        return false;
    };

    if (auto* s = std::get_if<FollowLine>(&world.state)) {
        (void)s;
        if (!gate(false, 0.0)) {
            const auto counts = face_counts_at(scenario, world.frame);
            world.vote_history.push_back(frame_leader(counts));
            while (world.vote_history.size() > scenario.picture.n_window) world.vote_history.pop_front();
            const std::vector<std::optional<Camera>> history(world.vote_history.begin(), world.vote_history.end());
            if (auto winner = camera_vote(history, scenario.picture)) {
                const double turn = rotation_for(*winner, scenario.picture);
                world.state = RotateToSubject{*winner, turn > 0 ? 1.0 : -1.0, std::abs(turn), 0.0};
                world.vote_history.clear();
                world.collision.window.clear();
                events.push_back("vote_" + std::string(to_string(*winner)));
            } else {
                follow();
            }
        }
    } else if (auto* s = std::get_if<TransferPause>(&world.state)) {
        const double remaining = s->remaining;
        if (!gate(true, remaining)) {
            follow();
            const double left = remaining - dt;
            if (left <= kTimeEps) {
                world.state = FollowLine{};
                events.push_back("transfer_done");
            } else {
                world.state = TransferPause{left};
            }
        }
    } else if (auto* s = std::get_if<Stopped>(&world.state)) {
        const Stopped stopped = *s;
        world.collision = collision_update(scan_at(scenario, t), std::move(world.collision), dt, scenario.collision,
                                           scenario.footprint);
        if (!world.collision.stopped) {
            events.push_back("resume");
            if (stopped.resume_to_pause)
                world.state = TransferPause{stopped.pause_remaining};
            else
                world.state = FollowLine{};
            rec.state = std::string(state_name(world.state));
            follow();
        }
    } else if (auto* s = std::get_if<RotateToSubject>(&world.state)) {
        if (s->remaining <= tolerance) {
            events.push_back("rotation_done");
            world.state = BurstAndRotateBack{scenario.picture.n_burst, -s->direction, s->rotated, false};
        } else {
            const double step = std::min(rot_speed * dt, s->remaining);
            cmd = {0.0, s->direction * step / dt};
            s->remaining -= step;
            s->rotated += step;
        }
    }

    if (auto* s = std::get_if<BurstAndRotateBack>(&world.state)) {
        rec.state = "BurstAndRotateBack";
        if (s->shots_left > 0) {
            events.push_back("shutter");
            --s->shots_left;
        }
        if (rec.centroid && !s->line_found) {
            s->line_found = true;
            events.push_back("line_found");
        }
        if (!s->line_found && s->remaining > tolerance) {
            const double step = std::min(rot_speed * dt, s->remaining);
            cmd = {0.0, s->direction * step / dt};
            s->remaining -= step;
        }
        if (s->shots_left == 0 && (s->line_found || s->remaining <= tolerance)) {
            if (!s->line_found) events.push_back("line_lost");
            world.state = TransferPause{scenario.picture.transfer_pause};
        }
    }

    // Integrate.
    Pose& p = world.pose;
    p.x += cmd.v * std::cos(p.heading) * dt;
    p.y += cmd.v * std::sin(p.heading) * dt;
    p.heading = wrap_angle(p.heading + cmd.omega * dt);
    rec.command = cmd;
    rec.pose = p;
    ++world.frame;

    if (scenario.line.size() >= 2) {
        const Closest c = closest_on_polyline(scenario.line, p.x, p.y);
        if (c.arc >= polyline_length(scenario.line) - scenario.finish_tolerance) {
            world.finished = true;
            events.push_back("course_complete");
        }
    }
    return {std::move(world), std::move(rec)};
}

std::vector<StepRecord> run_scenario(const Scenario& scenario) {
    if (!(scenario.dt > 0.0)) throw ArgumentError("dt must be positive");
    World world = initial_world(scenario);
    std::vector<StepRecord> log;
    const auto steps = static_cast<std::size_t>(std::llround(scenario.duration / scenario.dt));
    for (std::size_t k = 0; k < steps && !world.finished; ++k) {
        auto out = behavior_step(scenario, std::move(world));
        world = std::move(out.world);
        log.push_back(std::move(out.record));
    }
    return log;
}

nlohmann::json to_json(const StepRecord& r) {
    nlohmann::json j;
    j["t"] = r.t;
    j["state"] = r.state;
    j["command"] = {{"v", r.command.v}, {"omega", r.command.omega}};
    j["events"] = r.events;
    j["pose"] = {{"x", r.pose.x}, {"y", r.pose.y}, {"heading_deg", r.pose.heading / kDeg}};
    j["centroid"] = r.centroid ? nlohmann::json(*r.centroid) : nlohmann::json(nullptr);
    return j;
}

void write_event_log(std::ostream& out, std::span<const StepRecord> log) {
    for (const auto& r : log) out << to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Scenario files

namespace {

Camera camera_from_string(const std::string& s) {
    if (s == "left") return Camera::Left;
    if (s == "front") return Camera::Front;
    if (s == "right") return Camera::Right;
    throw ParseError("unknown camera '" + s + "'");
}

std::vector<ScanPoint> points_from_json(const nlohmann::json& j) {
    std::vector<ScanPoint> out;
    for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return out;
}

nlohmann::json points_to_json(const std::vector<ScanPoint>& points) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : points) out.push_back({p.x, p.z});
    return out;
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& value) {
    if (auto it = j.find(key); it != j.end()) value = it->get<T>();
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        Scenario s;
        read_opt(j, "name", s.name);
        read_opt(j, "dt", s.dt);
        read_opt(j, "duration", s.duration);
        read_opt(j, "finish_tolerance", s.finish_tolerance);
        for (const auto& p : j.at("line")) s.line.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        if (auto it = j.find("start"); it != j.end()) {
            read_opt(*it, "x", s.start.x);
            read_opt(*it, "y", s.start.y);
            double deg = 0.0;
            read_opt(*it, "heading_deg", deg);
            s.start.heading = deg * kDeg;
        }
        if (auto it = j.find("controller"); it != j.end()) {
            read_opt(*it, "k_p", s.controller.k_p);
            read_opt(*it, "v_lin", s.controller.v_lin);
        }
        if (auto it = j.find("collision"); it != j.end()) {
            read_opt(*it, "n_stop", s.collision.n_stop);
            read_opt(*it, "x_stop", s.collision.x_stop);
            read_opt(*it, "z_stop", s.collision.z_stop);
            read_opt(*it, "n_detected", s.collision.n_detected);
            read_opt(*it, "n_window", s.collision.n_window);
            read_opt(*it, "t_stop", s.collision.t_stop);
        }
        if (auto it = j.find("picture"); it != j.end()) {
            read_opt(*it, "n_max", s.picture.n_max);
            read_opt(*it, "n_window", s.picture.n_window);
            read_opt(*it, "theta_side_deg", s.picture.theta_side_deg);
            read_opt(*it, "theta_front_deg", s.picture.theta_front_deg);
            read_opt(*it, "n_burst", s.picture.n_burst);
            read_opt(*it, "rotation_speed", s.picture.rotation_speed);
            read_opt(*it, "transfer_pause", s.picture.transfer_pause);
        }
        if (auto it = j.find("camera"); it != j.end()) {
            read_opt(*it, "lookahead_near", s.camera.lookahead_near);
            read_opt(*it, "lookahead_far", s.camera.lookahead_far);
            read_opt(*it, "half_width", s.camera.half_width);
            read_opt(*it, "tape_width", s.camera.tape_width);
        }
        if (auto it = j.find("frame_points"); it != j.end()) s.frame_points = points_from_json(*it);
        if (auto it = j.find("obstacles"); it != j.end())
            for (const auto& o : *it)
                s.obstacles.push_back({o.at("t_start").get<double>(), o.at("t_end").get<double>(),
                                       points_from_json(o.at("points"))});
        if (auto it = j.find("face_streams"); it != j.end()) {
            read_opt(*it, "left", s.face_streams[0]);
            read_opt(*it, "front", s.face_streams[1]);
            read_opt(*it, "right", s.face_streams[2]);
        }
        if (auto it = j.find("face_clusters"); it != j.end())
            for (const auto& c : *it)
                s.face_clusters.push_back({camera_from_string(c.at("camera").get<std::string>()),
                                           c.at("from_frame").get<std::size_t>(), c.at("to_frame").get<std::size_t>(),
                                           c.at("count").get<int>()});
        if (s.collision.n_detected > s.collision.n_window) throw ValidationError("n_detected must not exceed n_window");
        if (s.picture.n_max > s.picture.n_window) throw ValidationError("n_max must not exceed n_window");
        if (!(s.dt > 0.0)) throw ValidationError("dt must be positive");
        if (!(s.controller.k_p > 0.0) || !(s.controller.v_lin > 0.0))
            throw ValidationError("k_p and v_lin must be positive");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
}

nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["dt"] = s.dt;
    j["duration"] = s.duration;
    j["finish_tolerance"] = s.finish_tolerance;
    j["line"] = nlohmann::json::array();
    for (const auto& p : s.line) j["line"].push_back({p.x, p.y});
    j["start"] = {{"x", s.start.x}, {"y", s.start.y}, {"heading_deg", s.start.heading / kDeg}};
    j["controller"] = {{"k_p", s.controller.k_p}, {"v_lin", s.controller.v_lin}};
    j["collision"] = {{"n_stop", s.collision.n_stop},         {"x_stop", s.collision.x_stop},
                      {"z_stop", s.collision.z_stop},         {"n_detected", s.collision.n_detected},
                      {"n_window", s.collision.n_window},     {"t_stop", s.collision.t_stop}};
    j["picture"] = {{"n_max", s.picture.n_max},
                    {"n_window", s.picture.n_window},
                    {"theta_side_deg", s.picture.theta_side_deg},
                    {"theta_front_deg", s.picture.theta_front_deg},
                    {"n_burst", s.picture.n_burst},
                    {"rotation_speed", s.picture.rotation_speed},
                    {"transfer_pause", s.picture.transfer_pause}};
    j["camera"] = {{"lookahead_near", s.camera.lookahead_near},
                   {"lookahead_far", s.camera.lookahead_far},
                   {"half_width", s.camera.half_width},
                   {"tape_width", s.camera.tape_width}};
    j["frame_points"] = points_to_json(s.frame_points);
    j["obstacles"] = nlohmann::json::array();
    for (const auto& o : s.obstacles)
        j["obstacles"].push_back({{"t_start", o.t_start}, {"t_end", o.t_end}, {"points", points_to_json(o.points)}});
    j["face_streams"] = {{"left", s.face_streams[0]}, {"front", s.face_streams[1]}, {"right", s.face_streams[2]}};
    j["face_clusters"] = nlohmann::json::array();
    for (const auto& c : s.face_clusters)
        j["face_clusters"].push_back({{"camera", to_string(c.camera)},
                                      {"from_frame", c.from_frame},
                                      {"to_frame", c.to_frame},
                                      {"count", c.count}});
    return j;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
    return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Canned scenarios

namespace {

std::vector<ScanPoint> metal_frame_points() {
    std::vector<ScanPoint> pts;
    for (int i = 0; i < 12; ++i) pts.push_back({-0.2 + 0.4 * i / 11.0, 0.12});
    return pts;
}

}  // namespace

Scenario straight_line_scenario() {
    Scenario s;
    s.name = "straight_line";
    s.duration = 5.0;
    s.line = {{-1.0, 0.0}, {20.0, 0.0}};
    s.start = {0.0, 0.0, 3.0 * kDeg};
    s.frame_points = metal_frame_points();
    return s;
}

Scenario left_cluster_scenario() {
    Scenario s;
    s.name = "left_cluster";
    s.duration = 30.0;
    s.line = {{-1.0, 0.0}, {15.0, 0.0}};
    s.frame_points = metal_frame_points();
    s.face_clusters = {{Camera::Left, 20, 40, 3}, {Camera::Front, 15, 25, 1}};
    return s;
}

Scenario collision_scenario() {
    Scenario s;
    s.name = "collision";
    s.duration = 10.0;
    s.line = {{-1.0, 0.0}, {20.0, 0.0}};
    s.frame_points = metal_frame_points();
    std::vector<ScanPoint> person(10, ScanPoint{0.3, 1.0});
    s.obstacles = {{2.0, 4.0, person}};
    return s;
}

Scenario empty_course_scenario() {
    Scenario s;
    s.name = "empty_course";
    s.duration = 60.0;
    s.line = {{-1.0, 0.0}, {3.0, 0.0}, {6.0, 1.0}};
    s.frame_points = metal_frame_points();
    return s;
}

}  // namespace robophoto::sim
