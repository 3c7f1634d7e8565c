// Acceptance checks. One PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "robophoto/abstraction.hpp"
#include "robophoto/behavior_sim.hpp"
#include "robophoto/composition.hpp"
#include "robophoto/dataset_io.hpp"
#include "robophoto/face_quality.hpp"
#include "robophoto/image.hpp"
#include "robophoto/rng.hpp"
#include "robophoto/selection.hpp"
#include "robophoto/stats.hpp"
#include "robophoto/synthetic.hpp"
#include "robophoto/threshold_opt.hpp"
#include "robophoto/tinynet.hpp"

using namespace robophoto;
using tinynet::LayerSpec;
using tinynet::Padding;
using tinynet::Tensor;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

LayerSpec random_activation(Rng& rng) {
    switch (rng.below(3)) {
        case 0: return LayerSpec::relu();
        case 1: return LayerSpec::leaky_relu();
        default: return LayerSpec::sigmoid();
    }
}

tinynet::NetworkModel random_architecture(Rng& rng, std::uint64_t seed) {
    std::vector<LayerSpec> layers;
    tinynet::Shape input;
    std::size_t features = 0;
    if (rng.bernoulli(0.5)) {
        features = 2 + rng.below(6);
        input = {features};
    } else {
        std::size_t c = 1 + rng.below(2), h = 5 + rng.below(5), w = 5 + rng.below(5);
        input = {c, h, w};
        const std::size_t convs = 1 + rng.below(2);
        for (std::size_t i = 0; i < convs; ++i) {
            const std::size_t out_c = 1 + rng.below(3);
            const std::size_t f = 2 + rng.below(2);
            const std::size_t stride = 1 + rng.below(2);
            const Padding pad = rng.bernoulli(0.5) ? Padding::Same : Padding::Valid;
            if (pad == Padding::Valid && (h < f || w < f)) break;
            layers.push_back(LayerSpec::conv2d(c, out_c, f, f, stride, pad));
            layers.push_back(random_activation(rng));
            h = tinynet::conv_output_size(h, f, stride, pad);
            w = tinynet::conv_output_size(w, f, stride, pad);
            c = out_c;
        }
        layers.push_back(LayerSpec::flatten());
        features = c * h * w;
    }
    const std::size_t hidden = 1 + rng.below(2);
    for (std::size_t i = 0; i < hidden; ++i) {
        const std::size_t units = 2 + rng.below(5);
        layers.push_back(LayerSpec::dense(features, units));
        layers.push_back(random_activation(rng));
        features = units;
    }
    layers.push_back(LayerSpec::dense(features, 1));
    layers.push_back(LayerSpec::sigmoid());
    auto model = tinynet::make_model(input, layers, seed, "random");
    // Random biases too, so no unit sits exactly on a kink.
    for (auto& p : model.params)
        if (!p.empty())
            for (double& b : p[1].data) b = rng.uniform(-0.5, 0.5);
    return model;
}

Outcome ac1_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto model = random_architecture(rng, 5000 + i);
        Tensor x(model.input_shape);
        for (double& v : x.data) v = rng.normal();
        const tinynet::Sample s{x, rng.bernoulli(0.5) ? 1.0 : 0.0};
        worst = std::max(worst, tinynet::gradient_check(model, s, 1e-5));
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 60.0, fmt("50 architectures, max relative error %.3g, %.1f s", worst, secs)};
}

// ---------------------------------------------------------------------------

Outcome ac2_face_ann() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto train = synth::rule_labeled_faces(2000, 0.10, 2024);
    const auto test = synth::rule_labeled_faces(2000, 0.10, 4048);
    tinynet::TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.003;
    cfg.optimizer = tinynet::Optimizer::SGD;
    cfg.seed = 7;
    const auto a = face::train_face_ann(train, cfg, 11);
    const auto b = face::train_face_ann(train, cfg, 11);
    const double acc = face::evaluate_face_model(a.model, test);
    const bool same = a.model.params == b.model.params;
    const double secs = seconds_since(t0);
    return {acc >= 0.85 && same && secs < 120.0,
            fmt("held-out accuracy %.4f, deterministic %s, %.1f s", acc, same ? "yes" : "no", secs)};
}

// ---------------------------------------------------------------------------

Outcome ac3_picture_cnn() {
    const auto t0 = std::chrono::steady_clock::now();
    auto pictures = synth::rule_labeled_layouts(2000, 77);
    std::span<const core::PictureRecord> all(pictures);
    tinynet::TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.01;
    cfg.optimizer = tinynet::Optimizer::Momentum;
    cfg.seed = 3;
    const auto result = abstraction::train_picture_cnn(all.subspan(0, 1600), cfg, 5);
    std::size_t correct = 0;
    for (const auto& p : all.subspan(1600)) {
        const bool good = abstraction::classify_picture(result.model, abstraction::render_abstract(p)) >= 0.5;
        correct += good == (*p.label == core::Quality::Good);
    }
    const double acc = static_cast<double>(correct) / 400.0;
    const double secs = seconds_since(t0);
    return {acc >= 0.90 && secs < 600.0, fmt("held-out accuracy %.4f, %.1f s", acc, secs)};
}

// ---------------------------------------------------------------------------

Outcome ac4_ga_vs_grid() {
    const auto t0 = std::chrono::steady_clock::now();
    const composition::BaselineThresholds hidden_b{0.1, 0.9, 0.1, 0.85, 0.03, 0.25};
    const auto base_set = composition::ThresholdSet::baseline(hidden_b);
    const auto heur_set = composition::ThresholdSet::heuristic({hidden_b, 0.5, 0.5});

    const auto run = [](const core::Dataset& ds, composition::ThresholdKind kind, std::size_t steps) {
        thresholds::GAConfig cfg;
        cfg.seed = 42;
        const auto ga = thresholds::ga_optimize(ds, kind, cfg);
        const auto grid = thresholds::grid_search_oracle(ds, kind, steps);
        return std::pair{ga.best_accuracy, grid.best_accuracy};
    };
    const auto [ga_b, grid_b] = run(synth::threshold_labeled_pictures(500, base_set, 0.02, 91),
                                    composition::ThresholdKind::Baseline, 9);
    const auto [ga_h, grid_h] = run(synth::threshold_labeled_pictures(500, heur_set, 0.02, 92),
                                    composition::ThresholdKind::Heuristic, 5);
    const double secs = seconds_since(t0);
    const bool pass = ga_b >= grid_b - 0.02 && ga_b >= 0.98 && ga_h >= grid_h - 0.02 && ga_h >= 0.98 && secs < 300.0;
    return {pass, fmt("baseline GA %.4f grid %.4f; heuristic GA %.4f grid %.4f; %.1f s", ga_b, grid_b, ga_h, grid_h,
                      secs)};
}

// ---------------------------------------------------------------------------

core::PictureRecord random_picture(Rng& rng) {
    core::PictureRecord p;
    p.width = 2 + static_cast<int>(rng.below(3000));
    p.height = 2 + static_cast<int>(rng.below(2000));
    const std::size_t n = rng.below(5);
    for (std::size_t k = 0; k < n; ++k) {
        core::FaceObservation f;
        const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.width - 1)));
        const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.height - 1)));
        const int x1 = x0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(p.width - x0)));
        const int y1 = y0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(p.height - y0)));
        f.bbox = {x0, y0, x1, y1};
        f.score = rng.uniform();
        p.faces.push_back(f);
    }
    return p;
}

composition::BaselineThresholds random_baseline(Rng& rng) {
    auto pair = [&rng](double hi) {
        double a = rng.uniform(0.0, hi), b = rng.uniform(0.0, hi);
        if (a > b) std::swap(a, b);
        return std::pair{a, b};
    };
    const auto [x0, x1] = pair(1.0);
    const auto [y0, y1] = pair(1.0);
    const auto [o0, o1] = pair(0.6);
    // Mostly permissive so both gate outcomes occur often.
    if (rng.bernoulli(0.5)) return {0.1 * x0, 1.0 - 0.1 * x1, 0.1 * y0, 1.0 - 0.1 * y1, 0.01 * o0, 0.5 + o1};
    return {x0, x1, y0, y1, o0, o1};
}

Outcome ac5_scoring() {
    Rng rng(555);
    std::size_t failures = 0, gated = 0, passed = 0;
    for (int i = 0; i < 1000; ++i) {
        auto p = random_picture(rng);
        const auto tb = random_baseline(rng);
        const auto base = composition::baseline_score(p, tb);
        base.passed ? ++passed : ++gated;

        // (a) all r = 1 and p_min = 0 reduce the heuristic to the baseline.
        auto ones = p;
        for (auto& f : ones.faces) f.score = 1.0;
        const auto heur = composition::heuristic_score(ones, {tb, rng.uniform(0.0, 0.999), 0.0});
        if (heur.passed != base.passed || heur.score != base.score) ++failures;

        // (b) integer upscaling leaves the score unchanged.
        const int k = 2 + static_cast<int>(rng.below(5));
        auto big = p;
        big.width *= k;
        big.height *= k;
        for (auto& f : big.faces) f.bbox = {f.bbox.x_tl * k, f.bbox.y_tl * k, f.bbox.x_br * k, f.bbox.y_br * k};
        const auto scaled = composition::baseline_score(big, tb);
        if (scaled.passed != base.passed || scaled.score != base.score) ++failures;
        const composition::HeuristicThresholds th{tb, rng.uniform(), rng.uniform()};
        const auto h1 = composition::heuristic_score(p, th);
        const auto h2 = composition::heuristic_score(big, th);
        if (h1.passed != h2.passed || h1.score != h2.score) ++failures;

        // (c) a failed gate gives exactly zero.
        bool any_fail = p.faces.empty();
        for (const auto& f : p.faces) any_fail |= !composition::baseline_gate(f.bbox, p.width, p.height, tb);
        if (any_fail && (base.passed || base.score != 0.0)) ++failures;
        if (!h1.passed && h1.score != 0.0) ++failures;
    }
    return {failures == 0 && gated > 0 && passed > 0,
            fmt("1000 pictures (%zu passed, %zu gated), %zu violations", passed, gated, failures)};
}

// ---------------------------------------------------------------------------

std::vector<selection::ScoredPicture> random_candidates(Rng& rng, std::size_t n, std::size_t bursts) {
    std::vector<selection::ScoredPicture> c;
    for (std::size_t i = 0; i < n; ++i) {
        selection::ScoredPicture s;
        s.picture_id = "p" + std::to_string(i);
        s.burst_id = "b" + std::to_string(rng.below(bursts));
        s.category = core::kAllCategories[rng.below(3)];
        s.score = static_cast<double>(rng.below(8)) / 4.0;  // deliberate ties
        c.push_back(s);
    }
    rng.shuffle(c);
    return c;
}

Outcome ac6_selection() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(606);
    std::size_t mismatches = 0, violations = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = rng.below(21);
        const auto cands = random_candidates(rng, n, 1 + rng.below(8));
        selection::SelectionConstraints cons;
        cons.per_category_quota = 1 + rng.below(4);
        cons.total = 3 * cons.per_category_quota;
        cons.one_per_burst = rng.bernoulli(0.8);
        if (selection::select_best(cands, cons).picture_ids() != selection::selection_oracle(cands, cons))
            ++mismatches;
    }
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = rng.below(501);
        const auto cands = random_candidates(rng, n, 1 + rng.below(200));
        const selection::SelectionConstraints cons;
        const auto r = selection::select_best(cands, cons);
        std::set<std::string> bursts, ids;
        std::map<core::FaceCountCategory, std::size_t> per;
        for (const auto& p : r.picks) {
            bursts.insert(p.burst_id);
            ids.insert(p.picture_id);
            ++per[p.category];
        }
        bool ok = bursts.size() == r.picks.size() && ids.size() == r.picks.size() && r.picks.size() <= cons.total;
        for (const auto& [cat, count] : per) ok &= count <= cons.per_category_quota;
        violations += !ok;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && violations == 0 && secs < 60.0,
            fmt("oracle mismatches %zu/1000, invariant violations %zu/1000, %.1f s", mismatches, violations, secs)};
}

// ---------------------------------------------------------------------------

Outcome ac7_crop() {
    const auto plan = selection::crop_cascade(6000, 4000);
    const std::vector<std::pair<int, int>> expected = {{5400, 3600}, {4800, 3200}, {4200, 2800},
                                                       {3600, 2400}, {3000, 2000}, {2400, 1600}};
    bool ok = plan.steps.size() == expected.size();
    for (std::size_t i = 0; ok && i < expected.size(); ++i) {
        const auto& r = plan.steps[i];
        ok = r.width() == expected[i].first && r.height() == expected[i].second &&
             r.x_tl == (6000 - expected[i].first) / 2 && r.y_tl == (4000 - expected[i].second) / 2;
    }
    ok = ok && plan.aspect_crop && plan.aspect_crop->width() == 2132 && plan.aspect_crop->height() == 1600;
    std::string sizes;
    for (const auto& r : plan.rectangles()) sizes += fmt("%dx%d ", r.width(), r.height());
    return {ok, "plan " + sizes};
}

// ---------------------------------------------------------------------------

bool has_event(const sim::StepRecord& r, const std::string& e) {
    return std::find(r.events.begin(), r.events.end(), e) != r.events.end();
}

std::string event_log_text(const sim::Scenario& s) {
    std::ostringstream out;
    const auto log = sim::run_scenario(s);
    sim::write_event_log(out, log);
    return out.str();
}

Outcome ac8_simulator() {
    std::string detail;
    bool ok = true;

    // Straight line: error non-increasing until below 2 px, within 50 steps, and stays there.
    {
        const auto log = sim::run_scenario(sim::straight_line_scenario());
        std::optional<std::size_t> settled;
        bool monotone = true, stays = true;
        double prev = 1e9;
        for (std::size_t i = 0; i < log.size(); ++i) {
            if (!log[i].centroid) {
                monotone = false;
                break;
            }
            const double e = std::abs(*log[i].centroid - 320.0);
            if (!settled) {
                monotone &= e <= prev;
                prev = e;
                if (e < 2.0) settled = i;
            } else {
                stays &= e < 2.0;
            }
        }
        const bool pass = settled && *settled < 50 && monotone && stays;
        ok &= pass;
        detail += settled ? fmt("straight settles at step %zu; ", *settled) : std::string("straight never settles; ");
    }

    // Left cluster: 20 shutters, heading restored within 5 degrees.
    {
        const auto log = sim::run_scenario(sim::left_cluster_scenario());
        std::size_t shutters = 0;
        std::optional<double> before, after;
        for (std::size_t i = 0; i < log.size(); ++i) {
            shutters += static_cast<std::size_t>(std::count(log[i].events.begin(), log[i].events.end(), "shutter"));
            if (!before && log[i].state == "RotateToSubject" && i > 0) before = log[i - 1].pose.heading;
            if (!after && has_event(log[i], "transfer_done")) after = log[i].pose.heading;
        }
        const double diff = before && after ? std::abs(*after - *before) * 180.0 / std::numbers::pi : 1e9;
        const bool pass = shutters == 20 && diff <= 5.0;
        ok &= pass;
        detail += fmt("left cluster %zu shutters, heading change %.3f deg; ", shutters, diff);
    }

    // Collision: stop within n_window frames of blockage, resume T_stop after clearance.
    {
        const auto s = sim::collision_scenario();
        const auto log = sim::run_scenario(s);
        const double blocked_from = s.obstacles.front().t_start, clear_from = s.obstacles.front().t_end;
        std::optional<double> stop_t, resume_t;
        for (const auto& r : log) {
            if (!stop_t && has_event(r, "stop")) stop_t = r.t;
            if (!resume_t && has_event(r, "resume")) resume_t = r.t;
        }
        const double frames_to_stop = stop_t ? (*stop_t - blocked_from) / s.dt : 1e9;
        const double resume_delay = resume_t ? *resume_t - clear_from : 1e9;
        const bool pass = frames_to_stop < static_cast<double>(s.collision.n_window) &&
                          std::abs(resume_delay - s.collision.t_stop) < 1e-9;
        ok &= pass;
        detail += fmt("collision stop after %.0f frames, resume %.3f s after clearance; ", frames_to_stop, resume_delay);
    }

    bool identical = true;
    for (const auto& s : {sim::straight_line_scenario(), sim::left_cluster_scenario(), sim::collision_scenario(),
                          sim::empty_course_scenario()})
        identical &= event_log_text(s) == event_log_text(s);
    ok &= identical;
    detail += identical ? "logs bit-identical" : "logs differ across runs";
    return {ok, detail};
}

// ---------------------------------------------------------------------------

Outcome ac9_ttest() {
    Rng rng(909);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const std::size_t na = 2 + rng.below(40), nb = 2 + rng.below(40);
        const double shift = rng.uniform(-1.5, 1.5), sa = rng.uniform(0.3, 2.0), sb = rng.uniform(0.3, 2.0);
        std::vector<double> a(na), b(nb);
        for (double& v : a) v = 3.0 + shift + sa * rng.normal();
        for (double& v : b) v = 3.0 + sb * rng.normal();
        const auto got = stats::welch_t_test(a, b);
        const auto ref = oracle::welch_statistic(a, b);
        worst = std::max(worst, std::abs(got.p_one_sided - oracle::t_upper_tail(ref.t, ref.df)));
    }
    const std::vector<double> same = {4, 5, 3, 4, 2, 5};
    const auto id = stats::welch_t_test(same, same);
    const bool pass = worst < 1e-6 && id.t == 0.0;
    return {pass, fmt("20 pairs, max |dp| %.3g; identical samples T=%g p=%g", worst, id.t, id.p_one_sided)};
}

// ---------------------------------------------------------------------------

Outcome ac10_round_trips() {
    std::string detail;
    bool ok = true;

    // Model save/load bit-exact.
    {
        auto model = face::build_face_ann(3);
        model.metadata.extra["standardization"] = face::FeatureStandardizer::identity().to_json();
        std::stringstream a;
        tinynet::save_model(a, model);
        const std::string first = a.str();
        const auto loaded = tinynet::load_model(a);
        std::stringstream b;
        tinynet::save_model(b, loaded);
        const bool same = loaded.params == model.params && b.str() == first;
        ok &= same;
        detail += same ? "model bit-exact; " : "model differs; ";
    }

    // Dataset JSONL ingest -> emit -> ingest.
    {
        auto ds = synth::burst_dataset(4, 5, 12);
        std::stringstream first;
        core::write_jsonl(first, ds);
        const auto once = core::validate_dataset(core::read_records(first, "."), "rt").dataset;
        std::stringstream second;
        core::write_jsonl(second, once);
        const auto twice = core::validate_dataset(core::read_records(second, "."), "rt").dataset;
        std::stringstream third;
        core::write_jsonl(third, twice);
        const bool same = once.records == twice.records && second.str() == third.str() && first.str() == second.str();
        ok &= same;
        detail += same ? "dataset stable; " : "dataset changed; ";
    }

    // Abstract PGM against hand-computed bytes.
    {
        core::PictureRecord p;
        p.width = 3000;
        p.height = 2000;
        core::FaceObservation f;
        f.bbox = {300, 200, 600, 400};  // render box (15,10)-(30,20)
        f.score = 0.5;                  // 122.5 -> 122
        p.faces.push_back(f);
        std::string expected = "P5\n150 100\n255\n";
        for (int y = 0; y < 100; ++y)
            for (int x = 0; x < 150; ++x)
                expected.push_back(static_cast<char>(x >= 15 && x < 30 && y >= 10 && y < 20 ? 122 : 255));
        std::ostringstream out;
        write_pgm(out, abstraction::render_abstract(p));
        const bool same = out.str() == expected;
        ok &= same;
        detail += same ? "PGM byte-identical" : "PGM bytes differ";
    }
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::vector<int> only;
    app.add_option("--only", only, "criterion numbers to run (default all)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
        {"AC1 gradient correctness", ac1_gradients},  {"AC2 face ANN learnability", ac2_face_ann},
        {"AC3 picture CNN learnability", ac3_picture_cnn}, {"AC4 GA vs grid oracle", ac4_ga_vs_grid},
        {"AC5 scoring equivalences", ac5_scoring},       {"AC6 selection correctness", ac6_selection},
        {"AC7 crop cascade", ac7_crop},                  {"AC8 simulator closed loop", ac8_simulator},
        {"AC9 Welch t-test", ac9_ttest},                 {"AC10 round-trips", ac10_round_trips},
    };
    int failed = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(i + 1)) == only.end()) continue;
        Outcome o;
        try {
            o = checks[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", checks[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
