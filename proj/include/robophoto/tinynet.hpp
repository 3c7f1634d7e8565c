#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "robophoto/errors.hpp"

namespace robophoto::tinynet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major double tensor.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(shape_size(shape), fill) {}
    Tensor(Shape s, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    bool operator==(const Tensor&) const = default;
};

class ShapeError : public Error {
public:
    ShapeError(std::size_t layer, const std::string& what)
        : Error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
    std::size_t layer() const { return layer_; }

private:
    std::size_t layer_;
};

class TrainingDiverged : public NumericError {
public:
    explicit TrainingDiverged(std::size_t epoch)
        : NumericError("training diverged (non-finite loss) in epoch " + std::to_string(epoch)), epoch_(epoch) {}
    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_;
};

class ModelFormatError : public Error {
public:
    using Error::Error;
};

class UnsupportedVersionError : public ModelFormatError {
public:
    explicit UnsupportedVersionError(std::uint32_t version)
        : ModelFormatError("unsupported model format version " + std::to_string(version)), version_(version) {}
    std::uint32_t version() const { return version_; }

private:
    std::uint32_t version_;
};

enum class LayerKind { Dense, Conv2D, ReLU, LeakyReLU, Sigmoid, Flatten };
enum class Padding { Valid, Same };

inline constexpr double kLeakySlope = 0.01;

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    // Dense
    std::size_t in_units = 0;
    std::size_t out_units = 0;
    // Conv2D
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t filter_h = 0;
    std::size_t filter_w = 0;
    std::size_t stride = 1;
    Padding padding = Padding::Valid;

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec conv2d(std::size_t in_c, std::size_t out_c, std::size_t fh, std::size_t fw, std::size_t stride,
                            Padding padding = Padding::Valid);
    static LayerSpec relu() { return {LayerKind::ReLU}; }
    static LayerSpec leaky_relu() { return {LayerKind::LeakyReLU}; }
    static LayerSpec sigmoid() { return {LayerKind::Sigmoid}; }
    static LayerSpec flatten() { return {LayerKind::Flatten}; }

    bool has_params() const { return kind == LayerKind::Dense || kind == LayerKind::Conv2D; }
    bool operator==(const LayerSpec&) const = default;
};

/// Output length of a strided convolution along one axis.
std::size_t conv_output_size(std::size_t input, std::size_t filter, std::size_t stride, Padding padding);

struct ModelMetadata {
    std::string architecture;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    nlohmann::json extra = nlohmann::json::object();
};

/// Layer stack plus parameters. params[i] is {weights, bias} for Dense and
/// Conv2D layers and empty otherwise. Dense weights are [out][in]; conv
/// weights are [out_c][in_c][fh][fw]. Activations are laid out CHW.
struct NetworkModel {
    Shape input_shape;
    std::vector<LayerSpec> layers;
    std::vector<std::vector<Tensor>> params;
    ModelMetadata metadata;

    std::size_t parameter_count() const;
};

/// Shape after each layer (index i holds the output of layer i). Throws
/// ShapeError naming the first incompatible layer.
std::vector<Shape> infer_shapes(const Shape& input_shape, const std::vector<LayerSpec>& layers);

/// Builds a model with Glorot-uniform weights and zero biases.
NetworkModel make_model(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t seed,
                        std::string architecture);

/// Copy of the model with every parameter set to zero.
NetworkModel zeroed(NetworkModel model);

/// Scalar network output. For the supported architectures (final Sigmoid)
/// this lies in (0,1).
double forward(const NetworkModel& model, const Tensor& input);

/// Value feeding the final Sigmoid layer.
double forward_logit(const NetworkModel& model, const Tensor& input);

/// Full activation map after layer index `layer` (for inspection).
Tensor forward_until(const NetworkModel& model, const Tensor& input, std::size_t layer);

struct Sample {
    Tensor input;
    double label = 0.0;
};

enum class Optimizer { SGD, Momentum };

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    Optimizer optimizer = Optimizer::SGD;
    double momentum = 0.9;
    std::uint64_t seed = 0;
};

struct TrainResult {
    NetworkModel model;
    std::vector<double> loss_history;  // mean binary cross-entropy per epoch
};

/// Mini-batch gradient descent on binary cross-entropy. The caller's model is
/// not modified.
TrainResult train(const NetworkModel& model, std::span<const Sample> samples, const TrainConfig& config);

/// Binary cross-entropy of one sample, computed from the logit.
double sample_loss(const NetworkModel& model, const Sample& sample);

/// Mean loss over samples.
double mean_loss(const NetworkModel& model, std::span<const Sample> samples);

/// Analytic gradient of sample_loss, laid out like model.params.
std::vector<std::vector<Tensor>> gradient(const NetworkModel& model, const Sample& sample);

/// Max over all parameters of |g_a - g_n| / max(|g_a|, |g_n|, 1e-12), with g_n
/// from central differences.
double gradient_check(const NetworkModel& model, const Sample& sample, double epsilon);

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(std::ostream& out, const NetworkModel& model);
void save_model(const std::filesystem::path& path, const NetworkModel& model);
NetworkModel load_model(std::istream& in);
NetworkModel load_model(const std::filesystem::path& path);

nlohmann::json layer_to_json(const LayerSpec& layer);
LayerSpec layer_from_json(const nlohmann::json& j);

}  // namespace robophoto::tinynet
