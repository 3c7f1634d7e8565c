#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "robophoto/abstraction.hpp"
#include "robophoto/behavior_sim.hpp"
#include "robophoto/composition.hpp"
#include "robophoto/core.hpp"
#include "robophoto/dataset_io.hpp"
#include "robophoto/face_quality.hpp"
#include "robophoto/image.hpp"
#include "robophoto/selection.hpp"
#include "robophoto/stats.hpp"
#include "robophoto/synthetic.hpp"
#include "robophoto/threshold_opt.hpp"
#include "robophoto/tinynet.hpp"
#include "robophoto/version.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace robophoto;

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

class UsageError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Resolved configuration

json typed_value(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    if (!s.empty()) {
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (end == s.c_str() + s.size()) {
            if (s.find_first_of(".eEnN") == std::string::npos) return std::stoll(s);
            return d;
        }
    }
    return s;
}

bool is_meta_option(const CLI::Option* opt) {
    const auto& names = opt->get_lnames();
    return names.empty() || names[0] == "help" || names[0] == "config";
}

/// Fills options not given on the command line from a JSON object whose keys
/// are long option names without dashes.
void apply_config_file(CLI::App& sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UsageError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw UsageError("config " + path + " must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
        CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (!opt || is_meta_option(opt)) throw UsageError("config key '" + key + "' is not an option of " + sub.get_name());
        if (opt->count() > 0) continue;
        std::vector<std::string> results;
        auto to_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_array())
            for (const auto& v : value) results.push_back(to_text(v));
        else
            results.push_back(to_text(value));
        opt->add_result(results);
        opt->run_callback();
    }
}

json resolved_config(const CLI::App& sub) {
    json config = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        if (is_meta_option(opt)) continue;
        const std::string& name = opt->get_lnames()[0];
        if (opt->count() > 0) {
            const auto& results = opt->results();
            if (results.size() == 1 && opt->get_expected_max() <= 1) {
                config[name] = opt->get_type_size() == 0 ? json(true) : typed_value(results[0]);
            } else {
                json arr = json::array();
                for (const auto& r : results) arr.push_back(typed_value(r));
                config[name] = arr;
            }
        } else {
            const std::string def = opt->get_default_str();
            config[name] = def.empty() ? json(nullptr) : typed_value(def);
        }
    }
    return config;
}

json run_header(const CLI::App& sub) {
    return {{"tool", kToolName}, {"version", kVersion}, {"command", sub.get_name()}, {"config", resolved_config(sub)}};
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// Config and results of a run, written beside the primary output.
void write_run_record(const fs::path& output, const CLI::App& sub, const json& results = json::object()) {
    json record = run_header(sub);
    record["results"] = results;
    const fs::path path = fs::is_directory(output) ? output / "run.json" : fs::path(output.string() + ".run.json");
    write_json(path, record);
}

void require(const CLI::App& sub, std::initializer_list<const char*> names) {
    for (const char* name : names) {
        const CLI::Option* opt = sub.get_option(std::string("--") + name);
        if (opt->count() == 0) throw UsageError(sub.get_name() + ": --" + std::string(name) + " is required");
    }
}

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

// ---------------------------------------------------------------------------
// Shared loading helpers

core::Dataset load(const std::string& path) { return core::load_dataset(path).dataset; }

/// Rewrites relative face_image_path entries so they resolve from `to_dir`.
void rebase_image_paths(core::Dataset& ds, const fs::path& from_dir, const fs::path& to_dir) {
    for (auto& r : ds.records)
        for (auto& f : r.faces) {
            if (f.face_image_path.empty() || fs::path(f.face_image_path).is_absolute()) continue;
            const fs::path abs = fs::absolute(from_dir / f.face_image_path).lexically_normal();
            f.face_image_path = abs.lexically_relative(fs::absolute(to_dir).lexically_normal()).generic_string();
        }
}

void save_dataset(core::Dataset ds, const std::string& source, const fs::path& out) {
    ensure_parent(out);
    const fs::path from = fs::path(source).parent_path();
    const fs::path to = out.parent_path();
    rebase_image_paths(ds, from.empty() ? "." : from, to.empty() ? "." : to);
    core::write_jsonl(out, ds);
}

bool all_faces_scored(const core::Dataset& ds) {
    for (const auto& r : ds.records)
        for (const auto& f : r.faces)
            if (!f.score) return false;
    return true;
}

/// Scores faces with the model when one is given.
void maybe_score(core::Dataset& ds, const std::string& face_model) {
    if (face_model.empty()) return;
    face::score_faces(tinynet::load_model(fs::path(face_model)), ds);
}

/// Runs `fn`, prefixing errors with the pipeline stage.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const NumericError& e) {
        throw NumericError("stage " + name + ": " + e.what());
    } catch (const Error& e) {
        throw Error("stage " + name + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Training options

struct TrainOptions {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    std::string optimizer = "sgd";
    double momentum = 0.9;
    std::uint64_t seed = 0;
    std::uint64_t init_seed = 1;

    tinynet::TrainConfig config() const {
        if (epochs < 1) throw UsageError("--epochs must be at least 1");
        if (batch_size < 1) throw UsageError("--batch-size must be at least 1");
        if (!(learning_rate > 0.0)) throw UsageError("--learning-rate must be positive");
        tinynet::TrainConfig c;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.learning_rate = learning_rate;
        c.optimizer = optimizer == "momentum" ? tinynet::Optimizer::Momentum : tinynet::Optimizer::SGD;
        c.momentum = momentum;
        c.seed = seed;
        return c;
    }
};

void add_train_options(CLI::App* sub, TrainOptions& o) {
    sub->add_option("--epochs", o.epochs, "training epochs");
    sub->add_option("--batch-size", o.batch_size, "mini-batch size");
    sub->add_option("--learning-rate", o.learning_rate, "step size");
    sub->add_option("--optimizer", o.optimizer, "sgd or momentum")->check(CLI::IsMember({"sgd", "momentum"}));
    sub->add_option("--momentum", o.momentum, "momentum coefficient");
    sub->add_option("--seed", o.seed, "shuffling seed");
    sub->add_option("--init-seed", o.init_seed, "weight initialization seed");
}

json training_results(const tinynet::TrainResult& r) {
    return {{"loss_history", r.loss_history}, {"final_loss", r.loss_history.back()}};
}

// ---------------------------------------------------------------------------
// Commands

struct Command {
    CLI::App* app = nullptr;
    std::function<void()> run;
};

Command add_generate(CLI::App& root) {
    struct Opts {
        std::string kind = "bursts";
        std::string out;
        std::size_t count = 1000;
        std::size_t bursts = 10;
        std::size_t per_burst = 5;
        double label_noise = 0.1;
        double margin = 0.02;
        std::string hidden;
        std::string face_images;
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("generate", "write a rule-labeled synthetic dataset");
    sub->add_option("--kind", o->kind, "faces, pictures, layouts or bursts")
        ->check(CLI::IsMember({"faces", "pictures", "layouts", "bursts"}));
    sub->add_option("--out", o->out, "output JSONL");
    sub->add_option("--count", o->count, "faces or pictures to generate");
    sub->add_option("--bursts", o->bursts, "bursts (kind bursts)");
    sub->add_option("--per-burst", o->per_burst, "pictures per burst (kind bursts)");
    sub->add_option("--label-noise", o->label_noise, "label flip probability (kind faces)");
    sub->add_option("--margin", o->margin, "threshold margin (kind pictures)");
    sub->add_option("--hidden", o->hidden, "labeling thresholds JSON (kind pictures)");
    sub->add_option("--face-images", o->face_images, "directory, relative to the output, for synthetic face crops");
    sub->add_option("--seed", o->seed, "generator seed");
    return {sub, [sub, o] {
                require(*sub, {"out"});
                const fs::path out = o->out;
                ensure_parent(out);
                core::Dataset ds;
                if (o->kind == "faces") {
                    const auto faces = synth::rule_labeled_faces(o->count, o->label_noise, o->seed);
                    for (std::size_t i = 0; i < faces.size(); ++i) {
                        core::PictureRecord p;
                        p.picture_id = "face" + std::to_string(i);
                        p.burst_id = p.picture_id;
                        p.width = 3000;
                        p.height = 2000;
                        p.faces.push_back(faces[i]);
                        ds.records.push_back(std::move(p));
                    }
                } else if (o->kind == "pictures") {
                    const auto hidden =
                        o->hidden.empty()
                            ? composition::ThresholdSet::baseline({0.1, 0.9, 0.1, 0.85, 0.03, 0.25})
                            : composition::load_threshold_set(o->hidden);
                    ds = synth::threshold_labeled_pictures(o->count, hidden, o->margin, o->seed);
                } else if (o->kind == "layouts") {
                    ds.records = synth::rule_labeled_layouts(o->count, o->seed);
                } else {
                    ds = synth::burst_dataset(o->bursts, o->per_burst, o->seed);
                }
                if (!o->face_images.empty()) {
                    const fs::path base = out.has_parent_path() ? out.parent_path() : fs::path(".");
                    fs::create_directories(base / o->face_images);
                    for (auto& r : ds.records)
                        for (std::size_t k = 0; k < r.faces.size(); ++k) {
                            const std::string rel =
                                (fs::path(o->face_images) / (r.picture_id + "_" + std::to_string(k) + ".pgm"))
                                    .generic_string();
                            write_pgm(base / rel, synth::face_crop(r.faces[k].features));
                            r.faces[k].face_image_path = rel;
                        }
                }
                core::write_jsonl(out, ds);
                write_run_record(out, *sub, {{"records", ds.records.size()}});
                std::cout << "wrote " << ds.records.size() << " records to " << out.string() << '\n';
            }};
}

Command add_ingest(CLI::App& root) {
    struct Opts {
        std::string input;
        std::string out;
        bool keep_faceless = false;
        int min_face_side = core::kMinFaceImageSide;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("ingest", "validate a JSONL dataset and write the clean records");
    sub->add_option("--input", o->input, "raw JSONL");
    sub->add_option("--out", o->out, "validated JSONL");
    sub->add_flag("--keep-faceless", o->keep_faceless, "keep pictures without faces");
    sub->add_option("--min-face-side", o->min_face_side, "smallest accepted face image side");
    return {sub, [sub, o] {
                require(*sub, {"input", "out"});
                core::ValidateOptions v;
                v.keep_faceless = o->keep_faceless;
                v.min_face_image_side = o->min_face_side;
                const auto result = core::load_dataset(o->input, v);
                save_dataset(result.dataset, o->input, o->out);
                const json drops = {{"records_kept", result.dataset.records.size()},
                                    {"records_dropped", result.drops.records_dropped},
                                    {"faces_dropped", result.drops.faces_dropped},
                                    {"faceless_dropped", result.drops.faceless_dropped}};
                write_run_record(o->out, *sub, drops);
                std::cout << drops.dump() << '\n';
            }};
}

Command add_split(CLI::App& root) {
    struct Opts {
        std::string dataset;
        std::string out_dir;
        double train = 0.8;
        double test = 0.1;
        double validation = 0.1;
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("split", "burst-atomic train/test/validation split");
    sub->add_option("--dataset", o->dataset, "input JSONL");
    sub->add_option("--out-dir", o->out_dir, "directory for train.jsonl, test.jsonl, validation.jsonl");
    sub->add_option("--train", o->train, "train share");
    sub->add_option("--test", o->test, "test share");
    sub->add_option("--validation", o->validation, "validation share");
    sub->add_option("--seed", o->seed, "split seed");
    return {sub, [sub, o] {
                require(*sub, {"dataset", "out-dir"});
                const auto ds = load(o->dataset);
                core::DatasetSplit split;
                try {
                    split = core::split_dataset(ds, {o->train, o->test, o->validation}, o->seed);
                } catch (const ArgumentError& e) {
                    throw UsageError(e.what());
                }
                const fs::path dir = o->out_dir;
                fs::create_directories(dir);
                save_dataset(split.train, o->dataset, dir / "train.jsonl");
                save_dataset(split.test, o->dataset, dir / "test.jsonl");
                save_dataset(split.validation, o->dataset, dir / "validation.jsonl");
                const json sizes = {{"train", split.train.records.size()},
                                    {"test", split.test.records.size()},
                                    {"validation", split.validation.records.size()}};
                write_run_record(dir, *sub, sizes);
                std::cout << sizes.dump() << '\n';
            }};
}

Command add_train_face(CLI::App& root, face::FaceModelKind kind) {
    struct Opts {
        std::string dataset;
        std::string validation;
        std::string out;
        TrainOptions train;
    };
    auto o = std::make_shared<Opts>();
    const bool ann = kind == face::FaceModelKind::FaceANN;
    auto* sub = root.add_subcommand(ann ? "train-face-ann" : "train-face-cnn",
                                    ann ? "train the face quality network on the 9 face features"
                                        : "train the face quality network on 40x30 face crops");
    sub->add_option("--dataset", o->dataset, "training JSONL with labeled faces");
    sub->add_option("--validation", o->validation, "held-out JSONL for an accuracy report");
    sub->add_option("--out", o->out, "model file");
    add_train_options(sub, o->train);
    return {sub, [sub, o, ann] {
                require(*sub, {"dataset", "out"});
                const auto cfg = o->train.config();
                const auto faces = face::labeled_faces(load(o->dataset));
                const auto r = ann ? face::train_face_ann(faces, cfg, o->train.init_seed)
                                   : face::train_face_cnn(faces, cfg, o->train.init_seed);
                ensure_parent(o->out);
                tinynet::save_model(fs::path(o->out), r.model);
                json results = training_results(r);
                results["train_accuracy"] = face::evaluate_face_model(r.model, faces);
                if (!o->validation.empty())
                    results["validation_accuracy"] =
                        face::evaluate_face_model(r.model, face::labeled_faces(load(o->validation)));
                write_run_record(o->out, *sub, results);
                std::cout << results.dump() << '\n';
            }};
}

double picture_accuracy(const tinynet::NetworkModel& model, std::span<const core::PictureRecord> pictures) {
    std::size_t correct = 0, labeled = 0;
    for (const auto& p : pictures) {
        if (!p.label) continue;
        ++labeled;
        const bool good = abstraction::classify_picture(model, abstraction::render_abstract(p)) >= 0.5;
        correct += good == (*p.label == core::Quality::Good);
    }
    if (labeled == 0) throw ValidationError("no labeled pictures");
    return static_cast<double>(correct) / static_cast<double>(labeled);
}

Command add_train_picture(CLI::App& root) {
    struct Opts {
        std::string dataset;
        std::string validation;
        std::string face_model;
        std::string out;
        TrainOptions train;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("train-picture-cnn", "train the picture network on abstract renderings");
    sub->add_option("--dataset", o->dataset, "training JSONL with labeled pictures");
    sub->add_option("--validation", o->validation, "held-out JSONL for an accuracy report");
    sub->add_option("--face-model", o->face_model, "face model used to score faces first");
    sub->add_option("--out", o->out, "model file");
    add_train_options(sub, o->train);
    return {sub, [sub, o] {
                require(*sub, {"dataset", "out"});
                const auto cfg = o->train.config();
                auto ds = load(o->dataset);
                stage("face_quality", [&] { maybe_score(ds, o->face_model); });
                const auto r = stage("train", [&] {
                    return abstraction::train_picture_cnn(ds.records, cfg, o->train.init_seed);
                });
                ensure_parent(o->out);
                tinynet::save_model(fs::path(o->out), r.model);
                json results = training_results(r);
                results["train_accuracy"] = picture_accuracy(r.model, ds.records);
                if (!o->validation.empty()) {
                    auto val = load(o->validation);
                    maybe_score(val, o->face_model);
                    results["validation_accuracy"] = picture_accuracy(r.model, val.records);
                }
                write_run_record(o->out, *sub, results);
                std::cout << results.dump() << '\n';
            }};
}

Command add_optimize(CLI::App& root) {
    struct Opts {
        std::string dataset;
        std::string kind = "baseline";
        std::string face_model;
        std::string out;
        std::string curve;
        std::size_t grid_steps = 0;
        thresholds::GAConfig ga;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("optimize-thresholds", "fit scorer thresholds with the genetic algorithm");
    sub->add_option("--dataset", o->dataset, "training JSONL with labeled pictures");
    sub->add_option("--kind", o->kind, "baseline or heuristic")->check(CLI::IsMember({"baseline", "heuristic"}));
    sub->add_option("--face-model", o->face_model, "face model used to score faces first");
    sub->add_option("--out", o->out, "thresholds JSON");
    sub->add_option("--curve", o->curve, "per-generation CSV (default <out>.curve.csv)");
    sub->add_option("--grid-steps", o->grid_steps, "also run the exhaustive grid with this many steps per axis");
    sub->add_option("--population", o->ga.population_size, "population size");
    sub->add_option("--generations", o->ga.generations, "generations");
    sub->add_option("--crossover-rate", o->ga.crossover_rate, "uniform crossover probability");
    sub->add_option("--mutation-rate", o->ga.mutation_rate, "per-gene mutation probability");
    sub->add_option("--mutation-sigma", o->ga.mutation_sigma, "Gaussian mutation width");
    sub->add_option("--elitism", o->ga.elitism_count, "individuals copied unchanged");
    sub->add_option("--tournament", o->ga.tournament_size, "tournament size");
    sub->add_option("--seed", o->ga.seed, "GA seed");
    return {sub, [sub, o] {
                require(*sub, {"dataset", "out"});
                try {
                    o->ga.validate();
                } catch (const ArgumentError& e) {
                    throw UsageError(e.what());
                }
                const auto kind = composition::threshold_kind_from_string(o->kind);
                auto ds = load(o->dataset);
                stage("face_quality", [&] {
                    maybe_score(ds, o->face_model);
                    if (kind == composition::ThresholdKind::Heuristic && !all_faces_scored(ds))
                        throw Error("faces lack quality scores; pass --face-model");
                });
                const auto report = stage("optimize", [&] { return thresholds::ga_optimize(ds, kind, o->ga); });
                ensure_parent(o->out);
                composition::save_threshold_set(o->out, report.best_thresholds);
                const std::string curve_path = o->curve.empty() ? o->out + ".curve.csv" : o->curve;
                std::ofstream curve(curve_path);
                if (!curve) throw Error("cannot write " + curve_path);
                thresholds::write_curve_csv(curve, report.curve);
                json results = {{"best_accuracy", report.best_accuracy},
                                {"evaluations", report.evaluations},
                                {"thresholds", composition::to_json(report.best_thresholds)}};
                if (o->grid_steps > 0) {
                    const auto grid = stage("grid", [&] {
                        try {
                            return thresholds::grid_search_oracle(ds, kind, o->grid_steps);
                        } catch (const ArgumentError& e) {
                            throw UsageError(e.what());
                        }
                    });
                    results["grid_accuracy"] = grid.best_accuracy;
                    results["grid_evaluations"] = grid.evaluations;
                    results["ga_minus_grid"] = report.best_accuracy - grid.best_accuracy;
                }
                write_run_record(o->out, *sub, results);
                std::cout << results.dump() << '\n';
            }};
}

/// Accuracy of one method, overall and per face-count category.
json method_report(const core::Dataset& ds, const std::function<bool(const core::PictureRecord&)>& says_good) {
    struct Tally {
        std::size_t total = 0, correct = 0;
    };
    std::map<std::string, Tally> per;
    for (auto c : core::kAllCategories) per[std::string(core::to_string(c))];
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& p : ds.records) {
        if (!p.label) continue;
        const bool good = says_good(p);
        const bool truth = *p.label == core::Quality::Good;
        (good ? (truth ? tp : fp) : (truth ? fn : tn)) += 1;
        if (!p.faces.empty()) {
            auto& t = per[std::string(core::to_string(core::face_count_category(p)))];
            ++t.total;
            t.correct += good == truth;
        }
    }
    const std::size_t total = tp + fp + tn + fn;
    json categories = json::object();
    for (const auto& [name, t] : per)
        categories[name] = {{"pictures", t.total},
                            {"accuracy", t.total ? json(static_cast<double>(t.correct) / t.total) : json(nullptr)}};
    return {{"accuracy", static_cast<double>(tp + tn) / static_cast<double>(total)},
            {"pictures", total},
            {"per_category", categories},
            {"confusion", {{"true_good", tp}, {"false_good", fp}, {"true_bad", tn}, {"false_bad", fn}}}};
}

Command add_evaluate(CLI::App& root) {
    struct Opts {
        std::string dataset;
        std::string baseline;
        std::string heuristic;
        std::string picture_model;
        std::string face_model;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("evaluate", "accuracy of the scorers and the picture network on a labeled set");
    sub->add_option("--dataset", o->dataset, "labeled JSONL");
    sub->add_option("--baseline", o->baseline, "baseline thresholds JSON");
    sub->add_option("--heuristic", o->heuristic, "heuristic thresholds JSON");
    sub->add_option("--picture-model", o->picture_model, "picture network model");
    sub->add_option("--face-model", o->face_model, "face model used to score faces first");
    sub->add_option("--out", o->out, "report JSON");
    return {sub, [sub, o] {
                require(*sub, {"dataset", "out"});
                if (o->baseline.empty() && o->heuristic.empty() && o->picture_model.empty())
                    throw UsageError("evaluate: give at least one of --baseline, --heuristic, --picture-model");
                auto ds = load(o->dataset);
                std::size_t labeled = 0;
                for (const auto& r : ds.records) labeled += r.label.has_value();
                if (labeled == 0) throw ValidationError("evaluate: dataset has no labeled pictures");
                stage("face_quality", [&] { maybe_score(ds, o->face_model); });

                json report = run_header(*sub);
                report["methods"] = json::object();
                if (!o->baseline.empty()) {
                    const auto t = composition::load_threshold_set(o->baseline);
                    report["methods"]["baseline"] = stage("baseline", [&] {
                        return method_report(ds, [&](const core::PictureRecord& p) {
                            return composition::baseline_score(p, t.values.baseline).passed;
                        });
                    });
                }
                if (!o->heuristic.empty()) {
                    const auto t = composition::load_threshold_set(o->heuristic);
                    report["methods"]["heuristic"] = stage("heuristic", [&] {
                        return method_report(ds, [&](const core::PictureRecord& p) {
                            return composition::heuristic_score(p, t.values).passed;
                        });
                    });
                }
                if (!o->picture_model.empty()) {
                    const auto model = tinynet::load_model(fs::path(o->picture_model));
                    report["methods"]["picture_cnn"] = stage("picture_cnn", [&] {
                        return method_report(ds, [&](const core::PictureRecord& p) {
                            return abstraction::classify_picture(model, abstraction::render_abstract(p)) >= 0.5;
                        });
                    });
                }
                ensure_parent(o->out);
                write_json(o->out, report);
                write_run_record(o->out, *sub);
                std::cout << report["methods"].dump() << '\n';
            }};
}

Command add_select(CLI::App& root) {
    struct Opts {
        std::string dataset;
        std::string face_model;
        std::string baseline;
        std::string heuristic;
        std::string picture_model;
        std::string out;
        bool crop = false;
        std::size_t quota = 8;
        std::size_t total = 24;
        bool allow_same_burst = false;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("select", "score pictures with each method and pick the best per category");
    sub->add_option("--dataset", o->dataset, "picture JSONL");
    sub->add_option("--face-model", o->face_model, "face model used to score faces first");
    sub->add_option("--baseline", o->baseline, "baseline thresholds JSON");
    sub->add_option("--heuristic", o->heuristic, "heuristic thresholds JSON");
    sub->add_option("--picture-model", o->picture_model, "picture network model");
    sub->add_flag("--crop", o->crop, "add the crop cascade of every picture as candidates");
    sub->add_option("--quota", o->quota, "pictures per face-count category");
    sub->add_option("--total", o->total, "overall cap");
    sub->add_flag("--allow-same-burst", o->allow_same_burst, "allow several pictures from one burst");
    sub->add_option("--out", o->out, "selection report JSON");
    return {sub, [sub, o] {
                require(*sub, {"dataset", "out"});
                if (o->baseline.empty() && o->heuristic.empty() && o->picture_model.empty())
                    throw UsageError("select: give at least one of --baseline, --heuristic, --picture-model");
                auto ds = load(o->dataset);
                if (o->crop) {
                    stage("crop", [&] {
                        std::vector<core::PictureRecord> expanded;
                        for (const auto& p : ds.records) {
                            expanded.push_back(p);
                            const auto rects = selection::crop_cascade(p.width, p.height).rectangles();
                            for (std::size_t k = 0; k < rects.size(); ++k) {
                                auto c = selection::crop_picture(p, rects[k], "_crop" + std::to_string(k + 1));
                                if (!c.faces.empty()) expanded.push_back(std::move(c));
                            }
                        }
                        ds.records = std::move(expanded);
                    });
                }
                stage("face_quality", [&] { maybe_score(ds, o->face_model); });
                const selection::SelectionConstraints constraints{o->quota, !o->allow_same_burst, o->total};

                // Candidates are the pictures a method calls good, ranked by its score.
                auto run_method = [&](const std::string& name,
                                      const std::function<std::optional<double>(const core::PictureRecord&)>& score) {
                    return stage(name, [&] {
                        std::vector<selection::ScoredPicture> cands;
                        for (const auto& p : ds.records) {
                            if (p.faces.empty()) continue;
                            if (auto s = score(p))
                                cands.push_back({p.picture_id, p.burst_id, core::face_count_category(p), *s});
                        }
                        const auto result = selection::select_best(cands, constraints);
                        json shortfall = json::object();
                        for (auto c : core::kAllCategories)
                            shortfall[std::string(core::to_string(c))] = result.shortfall[static_cast<std::size_t>(c)];
                        return json{{"candidates", cands.size()},
                                    {"picks", selection::selection_report(name, result)},
                                    {"shortfall", shortfall}};
                    });
                };

                json report = run_header(*sub);
                report["methods"] = json::object();
                if (!o->baseline.empty()) {
                    const auto t = composition::load_threshold_set(o->baseline);
                    report["methods"]["baseline"] = run_method("baseline", [&](const core::PictureRecord& p) {
                        const auto s = composition::baseline_score(p, t.values.baseline);
                        return s.passed ? std::optional<double>(s.score) : std::nullopt;
                    });
                }
                if (!o->heuristic.empty()) {
                    const auto t = composition::load_threshold_set(o->heuristic);
                    stage("face_quality", [&] {
                        if (!all_faces_scored(ds)) throw Error("faces lack quality scores; pass --face-model");
                    });
                    report["methods"]["heuristic"] = run_method("heuristic", [&](const core::PictureRecord& p) {
                        const auto s = composition::heuristic_score(p, t.values);
                        return s.passed ? std::optional<double>(s.score) : std::nullopt;
                    });
                }
                if (!o->picture_model.empty()) {
                    const auto model = tinynet::load_model(fs::path(o->picture_model));
                    stage("face_quality", [&] {
                        if (!all_faces_scored(ds)) throw Error("faces lack quality scores; pass --face-model");
                    });
                    report["methods"]["picture_cnn"] = run_method("picture_cnn", [&](const core::PictureRecord& p) {
                        const double s = abstraction::classify_picture(model, abstraction::render_abstract(p));
                        return s >= 0.5 ? std::optional<double>(s) : std::nullopt;
                    });
                }
                ensure_parent(o->out);
                write_json(o->out, report);
                write_run_record(o->out, *sub);
                json summary = json::object();
                for (const auto& [name, m] : report["methods"].items()) summary[name] = m["picks"].size();
                std::cout << summary.dump() << '\n';
            }};
}

Command add_simulate(CLI::App& root) {
    struct Opts {
        std::string scenario;
        std::string builtin;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("simulate", "run the behavior simulator and write its event log");
    sub->add_option("--scenario", o->scenario, "scenario JSON");
    sub->add_option("--builtin", o->builtin, "straight, left_cluster, collision or empty_course")
        ->check(CLI::IsMember({"straight", "left_cluster", "collision", "empty_course"}));
    sub->add_option("--out", o->out, "event log JSONL");
    return {sub, [sub, o] {
                require(*sub, {"out"});
                if (o->scenario.empty() == o->builtin.empty())
                    throw UsageError("simulate: give exactly one of --scenario, --builtin");
                sim::Scenario s;
                if (!o->scenario.empty())
                    s = sim::load_scenario(o->scenario);
                else if (o->builtin == "straight")
                    s = sim::straight_line_scenario();
                else if (o->builtin == "left_cluster")
                    s = sim::left_cluster_scenario();
                else if (o->builtin == "collision")
                    s = sim::collision_scenario();
                else
                    s = sim::empty_course_scenario();
                const auto log = sim::run_scenario(s);
                ensure_parent(o->out);
                std::ofstream out(o->out, std::ios::binary);
                if (!out) throw Error("cannot write " + o->out);
                sim::write_event_log(out, log);
                std::map<std::string, std::size_t> events;
                for (const auto& r : log)
                    for (const auto& e : r.events) ++events[e];
                const json summary = {{"scenario", s.name}, {"steps", log.size()}, {"events", events}};
                write_run_record(o->out, *sub, summary);
                std::cout << summary.dump() << '\n';
            }};
}

Command add_render(CLI::App& root) {
    struct Opts {
        std::string dataset;
        std::string face_model;
        std::vector<std::string> ids;
        std::string out_dir;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("render-abstract", "write abstract face-layout images as PGM");
    sub->add_option("--dataset", o->dataset, "picture JSONL");
    sub->add_option("--face-model", o->face_model, "face model used to score faces first");
    sub->add_option("--picture-id", o->ids, "pictures to render (default all)");
    sub->add_option("--out-dir", o->out_dir, "directory for <picture_id>.pgm");
    return {sub, [sub, o] {
                require(*sub, {"dataset", "out-dir"});
                auto ds = load(o->dataset);
                stage("face_quality", [&] { maybe_score(ds, o->face_model); });
                const fs::path dir = o->out_dir;
                fs::create_directories(dir);
                std::size_t written = 0;
                std::vector<std::string> wanted = o->ids;
                for (const auto& p : ds.records) {
                    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), p.picture_id) == wanted.end())
                        continue;
                    write_pgm(dir / (p.picture_id + ".pgm"), stage("render", [&] { return abstraction::render_abstract(p); }));
                    ++written;
                }
                if (!wanted.empty() && written != wanted.size())
                    throw ValidationError("render-abstract: some picture ids are not in the dataset");
                write_run_record(dir, *sub, {{"images", written}});
                std::cout << "wrote " << written << " images to " << dir.string() << '\n';
            }};
}

std::vector<double> read_numbers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    for (char& c : text)
        if (c == ',') c = ' ';
    std::istringstream ss(text);
    std::vector<double> values;
    std::string token;
    while (ss >> token) {
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size()) throw ParseError(path + ": not a number '" + token + "'");
        values.push_back(v);
    }
    return values;
}

Command add_ttest(CLI::App& root) {
    struct Opts {
        std::string a;
        std::string b;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = root.add_subcommand("ttest", "one-sided Welch t-test that mean(a) > mean(b)");
    sub->add_option("--a", o->a, "first sample, numbers separated by whitespace or commas");
    sub->add_option("--b", o->b, "second sample");
    sub->add_option("--out", o->out, "report JSON");
    return {sub, [sub, o] {
                require(*sub, {"a", "b"});
                const auto r = stats::welch_t_test(read_numbers(o->a), read_numbers(o->b));
                json report = run_header(*sub);
                report["test"] = "welch, one-sided, H1: mean(a) > mean(b)";
                report["t"] = r.t;
                report["df"] = r.df;
                report["p"] = r.p_one_sided;
                report["mean_a"] = r.mean_a;
                report["mean_b"] = r.mean_b;
                if (!o->out.empty()) {
                    ensure_parent(o->out);
                    write_json(o->out, report);
                    write_run_record(o->out, *sub);
                }
                std::cout << report.dump() << '\n';
            }};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robot photographer pipeline tools"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::vector<Command> commands = {add_generate(app),
                                     add_ingest(app),
                                     add_split(app),
                                     add_train_face(app, face::FaceModelKind::FaceANN),
                                     add_train_face(app, face::FaceModelKind::FaceCNN),
                                     add_train_picture(app),
                                     add_optimize(app),
                                     add_evaluate(app),
                                     add_select(app),
                                     add_simulate(app),
                                     add_render(app),
                                     add_ttest(app)};
    std::map<CLI::App*, std::string> config_paths;
    for (auto& c : commands) {
        c.app->option_defaults()->always_capture_default();
        c.app->add_option("--config", config_paths[c.app], "JSON file of option values");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        for (auto& c : commands) {
            if (!c.app->parsed()) continue;
            if (!config_paths[c.app].empty()) apply_config_file(*c.app, config_paths[c.app]);
            c.run();
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
