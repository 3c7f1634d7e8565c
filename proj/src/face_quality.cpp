#include "robophoto/face_quality.hpp"

#include <cmath>

namespace robophoto::face {

using tinynet::LayerSpec;
using tinynet::NetworkModel;
using tinynet::Padding;
using tinynet::Tensor;

namespace {
constexpr const char* kAnnName = "face_ann";
constexpr const char* kCnnName = "face_cnn";
}  // namespace

NetworkModel build_face_ann(std::uint64_t seed) {
    std::vector<LayerSpec> layers;
    const std::size_t widths[] = {core::kFaceFeatureCount, 32, 64, 64, 32, 16};
    for (std::size_t i = 0; i + 1 < std::size(widths); ++i) {
        layers.push_back(LayerSpec::dense(widths[i], widths[i + 1]));
        layers.push_back(LayerSpec::relu());
    }
    layers.push_back(LayerSpec::dense(16, 1));
    layers.push_back(LayerSpec::sigmoid());
    NetworkModel m = tinynet::make_model({core::kFaceFeatureCount}, std::move(layers), seed, kAnnName);
    m.metadata.extra["standardization"] = FeatureStandardizer::identity().to_json();
    return m;
}

NetworkModel build_face_cnn(std::uint64_t seed) {
    std::vector<LayerSpec> layers;
    const std::size_t channels[] = {1, 96, 96, 96, 192, 192};
    for (std::size_t i = 0; i + 1 < std::size(channels); ++i) {
        layers.push_back(LayerSpec::conv2d(channels[i], channels[i + 1], 3, 3, 2, Padding::Same));
        layers.push_back(LayerSpec::relu());
    }
    layers.push_back(LayerSpec::flatten());
    const std::size_t flat = 192 * 1 * 2;
    const std::size_t widths[] = {flat, 100, 200, 400, 800, 400, 200, 10};
    for (std::size_t i = 0; i + 1 < std::size(widths); ++i) {
        layers.push_back(LayerSpec::dense(widths[i], widths[i + 1]));
        layers.push_back(LayerSpec::relu());
    }
    layers.push_back(LayerSpec::dense(10, 1));
    layers.push_back(LayerSpec::sigmoid());
    NetworkModel m =
        tinynet::make_model({1, kFaceCnnHeight, kFaceCnnWidth}, std::move(layers), seed, kCnnName);
    m.metadata.extra["conv_padding"] = "same";
    m.metadata.extra["input_hw"] = {kFaceCnnHeight, kFaceCnnWidth};
    return m;
}

FaceModelKind model_kind(const NetworkModel& model) {
    if (model.metadata.architecture == kAnnName) return FaceModelKind::FaceANN;
    if (model.metadata.architecture == kCnnName) return FaceModelKind::FaceCNN;
    throw ArgumentError("model '" + model.metadata.architecture + "' is not a face quality model");
}

std::vector<double> bilinear_resample(const GrayImage& src, int out_w, int out_h) {
    std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
    auto source_coord = [](int i, int n_src, int n_out) {
        return n_out > 1 ? static_cast<double>(i) * (n_src - 1) / (n_out - 1) : 0.0;
    };
    for (int y = 0; y < out_h; ++y) {
        const double fy = source_coord(y, src.height, out_h);
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double ty = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = source_coord(x, src.width, out_w);
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double tx = fx - x0;
            const double top = src.at(x0, y0) * (1.0 - tx) + src.at(x1, y0) * tx;
            const double bottom = src.at(x0, y1) * (1.0 - tx) + src.at(x1, y1) * tx;
            out[static_cast<std::size_t>(y) * out_w + x] = top * (1.0 - ty) + bottom * ty;
        }
    }
    return out;
}

Tensor preprocess_face(const GrayImage& image, const std::optional<core::BoundingBox>& crop) {
    GrayImage region;
    if (crop) {
        if (!crop->within(image.width, image.height)) throw ArgumentError("face box lies outside the image");
        if (crop->width() < core::kMinFaceImageSide || crop->height() < core::kMinFaceImageSide)
            throw UndersizedFace(crop->width(), crop->height());
        region = GrayImage(crop->width(), crop->height());
        for (int y = 0; y < region.height; ++y)
            for (int x = 0; x < region.width; ++x) region.at(x, y) = image.at(crop->x_tl + x, crop->y_tl + y);
    } else {
        if (image.width < core::kMinFaceImageSide || image.height < core::kMinFaceImageSide)
            throw UndersizedFace(image.width, image.height);
        region = image;
    }
    auto values = bilinear_resample(region, kFaceCnnWidth, kFaceCnnHeight);
    for (double& v : values) v /= 255.0;
    return Tensor({1, kFaceCnnHeight, kFaceCnnWidth}, std::move(values));
}

FeatureStandardizer FeatureStandardizer::identity() {
    FeatureStandardizer s;
    s.stddev.fill(1.0);
    return s;
}

FeatureStandardizer FeatureStandardizer::fit(std::span<const core::FaceObservation> faces) {
    if (faces.empty()) return identity();
    FeatureStandardizer s;
    const double n = static_cast<double>(faces.size());
    for (const auto& f : faces) {
        const auto v = f.features.as_array();
        for (std::size_t k = 0; k < v.size(); ++k) s.mean[k] += v[k];
    }
    for (double& m : s.mean) m /= n;
    for (const auto& f : faces) {
        const auto v = f.features.as_array();
        for (std::size_t k = 0; k < v.size(); ++k) s.stddev[k] += (v[k] - s.mean[k]) * (v[k] - s.mean[k]);
    }
    for (double& sd : s.stddev) {
        sd = std::sqrt(sd / n);
        if (sd < 1e-12) sd = 1.0;  // constant feature
    }
    return s;
}

Tensor FeatureStandardizer::apply(const core::FaceFeatures& features) const {
    const auto v = features.as_array();
    std::vector<double> z(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) z[k] = (v[k] - mean[k]) / stddev[k];
    return Tensor({core::kFaceFeatureCount}, std::move(z));
}

nlohmann::json FeatureStandardizer::to_json() const { return {{"mean", mean}, {"stddev", stddev}}; }

FeatureStandardizer FeatureStandardizer::from_json(const nlohmann::json& j) {
    FeatureStandardizer s;
    s.mean = j.at("mean").get<std::array<double, core::kFaceFeatureCount>>();
    s.stddev = j.at("stddev").get<std::array<double, core::kFaceFeatureCount>>();
    return s;
}

FeatureStandardizer standardizer_of(const NetworkModel& model) {
    auto it = model.metadata.extra.find("standardization");
    if (it == model.metadata.extra.end()) return FeatureStandardizer::identity();
    return FeatureStandardizer::from_json(*it);
}

Tensor face_input(const NetworkModel& model, const core::FaceObservation& face) {
    if (model_kind(model) == FaceModelKind::FaceANN) return standardizer_of(model).apply(face.features);
    if (!face.face_image) throw MissingModality("face_cnn requires a face image");
    return preprocess_face(*face.face_image);
}

double score_face(const NetworkModel& model, core::FaceObservation& face) {
    const double r = tinynet::forward(model, face_input(model, face));
    face.score = r;
    return r;
}

void score_faces(const NetworkModel& model, core::Dataset& dataset) {
    for (auto& picture : dataset.records)
        for (auto& f : picture.faces) score_face(model, f);
}

double evaluate_face_model(const NetworkModel& model, std::span<const core::FaceObservation> faces) {
    std::size_t labeled = 0, correct = 0;
    for (const auto& f : faces) {
        if (!f.label) continue;
        ++labeled;
        const bool predicted_good = tinynet::forward(model, face_input(model, f)) >= kDecisionThreshold;
        if (predicted_good == (*f.label == core::Quality::Good)) ++correct;
    }
    if (labeled == 0) throw ArgumentError("evaluate_face_model: no labeled faces");
    return static_cast<double>(correct) / static_cast<double>(labeled);
}

std::vector<core::FaceObservation> labeled_faces(const core::Dataset& dataset) {
    std::vector<core::FaceObservation> out;
    for (const auto& p : dataset.records)
        for (const auto& f : p.faces)
            if (f.label) out.push_back(f);
    return out;
}

namespace {

double label_value(const core::FaceObservation& f) { return *f.label == core::Quality::Good ? 1.0 : 0.0; }

}  // namespace

tinynet::TrainResult train_face_ann(std::span<const core::FaceObservation> faces, const tinynet::TrainConfig& config,
                                    std::uint64_t init_seed) {
    std::vector<core::FaceObservation> labeled;
    for (const auto& f : faces)
        if (f.label) labeled.push_back(f);
    if (labeled.empty()) throw ArgumentError("train_face_ann: no labeled faces");
    NetworkModel model = build_face_ann(init_seed);
    const FeatureStandardizer standardizer = FeatureStandardizer::fit(labeled);
    model.metadata.extra["standardization"] = standardizer.to_json();
    std::vector<tinynet::Sample> samples;
    samples.reserve(labeled.size());
    for (const auto& f : labeled) samples.push_back({standardizer.apply(f.features), label_value(f)});
    return tinynet::train(model, samples, config);
}

tinynet::TrainResult train_face_cnn(std::span<const core::FaceObservation> faces, const tinynet::TrainConfig& config,
                                    std::uint64_t init_seed) {
    std::vector<tinynet::Sample> samples;
    for (const auto& f : faces) {
        if (!f.label) continue;
        if (!f.face_image) throw MissingModality("train_face_cnn: labeled face without face image");
        samples.push_back({preprocess_face(*f.face_image), label_value(f)});
    }
    if (samples.empty()) throw ArgumentError("train_face_cnn: no labeled faces");
    return tinynet::train(build_face_cnn(init_seed), samples, config);
}

}  // namespace robophoto::face
