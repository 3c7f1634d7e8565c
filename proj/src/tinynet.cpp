#include "robophoto/tinynet.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "robophoto/rng.hpp"

namespace robophoto::tinynet {

using nlohmann::json;

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (shape_size(shape) != data.size())
        throw ArgumentError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                            shape_to_string(shape));
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
    LayerSpec l{LayerKind::Dense};
    l.in_units = in;
    l.out_units = out;
    return l;
}

LayerSpec LayerSpec::conv2d(std::size_t in_c, std::size_t out_c, std::size_t fh, std::size_t fw, std::size_t stride,
                            Padding padding) {
    LayerSpec l{LayerKind::Conv2D};
    l.in_channels = in_c;
    l.out_channels = out_c;
    l.filter_h = fh;
    l.filter_w = fw;
    l.stride = stride;
    l.padding = padding;
    return l;
}

std::size_t conv_output_size(std::size_t input, std::size_t filter, std::size_t stride, Padding padding) {
    if (padding == Padding::Same) return (input + stride - 1) / stride;
    if (input < filter) return 0;
    return (input - filter) / stride + 1;
}

namespace {

// Leading zero-padding along one axis for "same" convolutions.
std::size_t pad_before(std::size_t input, std::size_t filter, std::size_t stride, Padding padding) {
    if (padding == Padding::Valid) return 0;
    const std::size_t out = conv_output_size(input, filter, stride, padding);
    const std::size_t needed = (out - 1) * stride + filter;
    return needed > input ? (needed - input) / 2 : 0;
}

}  // namespace

std::vector<Shape> infer_shapes(const Shape& input_shape, const std::vector<LayerSpec>& layers) {
    std::vector<Shape> shapes;
    Shape cur = input_shape;
    if (cur.empty() || shape_size(cur) == 0) throw ShapeError(0, "empty input shape");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        switch (l.kind) {
            case LayerKind::Dense:
                if (l.in_units == 0 || l.out_units == 0) throw ShapeError(i, "dense dims must be positive");
                if (cur.size() != 1 || cur[0] != l.in_units)
                    throw ShapeError(i, "dense expects [" + std::to_string(l.in_units) + "], got " +
                                            shape_to_string(cur));
                cur = {l.out_units};
                break;
            case LayerKind::Conv2D: {
                if (l.in_channels == 0 || l.out_channels == 0 || l.filter_h == 0 || l.filter_w == 0 || l.stride == 0)
                    throw ShapeError(i, "conv dims and stride must be positive");
                if (cur.size() != 3 || cur[0] != l.in_channels)
                    throw ShapeError(i, "conv expects " + std::to_string(l.in_channels) + " channels CHW, got " +
                                            shape_to_string(cur));
                const std::size_t oh = conv_output_size(cur[1], l.filter_h, l.stride, l.padding);
                const std::size_t ow = conv_output_size(cur[2], l.filter_w, l.stride, l.padding);
                if (oh == 0 || ow == 0) throw ShapeError(i, "filter larger than input " + shape_to_string(cur));
                cur = {l.out_channels, oh, ow};
                break;
            }
            case LayerKind::Flatten:
                cur = {shape_size(cur)};
                break;
            case LayerKind::ReLU:
            case LayerKind::LeakyReLU:
            case LayerKind::Sigmoid:
                break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

std::size_t NetworkModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params)
        for (const auto& t : p) n += t.size();
    return n;
}

namespace {

std::vector<Shape> param_shapes(const LayerSpec& l) {
    if (l.kind == LayerKind::Dense) return {{l.out_units, l.in_units}, {l.out_units}};
    if (l.kind == LayerKind::Conv2D)
        return {{l.out_channels, l.in_channels, l.filter_h, l.filter_w}, {l.out_channels}};
    return {};
}

}  // namespace

NetworkModel make_model(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t seed,
                        std::string architecture) {
    infer_shapes(input_shape, layers);
    NetworkModel m;
    m.input_shape = std::move(input_shape);
    m.layers = std::move(layers);
    m.metadata.architecture = std::move(architecture);
    m.metadata.seed = seed;
    Rng rng(seed);
    for (const LayerSpec& l : m.layers) {
        std::vector<Tensor> p;
        if (l.kind == LayerKind::Dense) {
            const double limit = std::sqrt(6.0 / static_cast<double>(l.in_units + l.out_units));
            Tensor w({l.out_units, l.in_units});
            for (double& v : w.data) v = rng.uniform(-limit, limit);
            p.push_back(std::move(w));
            p.emplace_back(Shape{l.out_units});
        } else if (l.kind == LayerKind::Conv2D) {
            const std::size_t receptive = l.filter_h * l.filter_w;
            const double limit =
                std::sqrt(6.0 / static_cast<double>((l.in_channels + l.out_channels) * receptive));
            Tensor w({l.out_channels, l.in_channels, l.filter_h, l.filter_w});
            for (double& v : w.data) v = rng.uniform(-limit, limit);
            p.push_back(std::move(w));
            p.emplace_back(Shape{l.out_channels});
        }
        m.params.push_back(std::move(p));
    }
    return m;
}

NetworkModel zeroed(NetworkModel model) {
    for (auto& p : model.params)
        for (auto& t : p) std::fill(t.data.begin(), t.data.end(), 0.0);
    return model;
}

namespace {

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) - y z, stable for large |z|.
inline double bce_from_logit(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

// dst[k] += c[0] s[0][k], then += c[1] s[1][k], ... in that order (m <= 4).
void multi_axpy(double* dst, const double* const* s, const double* c, std::size_t m, std::size_t n) {
    switch (m) {
        case 0:
            return;
        case 1:
            for (std::size_t k = 0; k < n; ++k) dst[k] += c[0] * s[0][k];
            return;
        case 2:
            for (std::size_t k = 0; k < n; ++k) {
                double v = dst[k] + c[0] * s[0][k];
                dst[k] = v + c[1] * s[1][k];
            }
            return;
        case 3:
            for (std::size_t k = 0; k < n; ++k) {
                double v = dst[k] + c[0] * s[0][k];
                v += c[1] * s[1][k];
                dst[k] = v + c[2] * s[2][k];
            }
            return;
        default:
            for (std::size_t k = 0; k < n; ++k) {
                double v = dst[k] + c[0] * s[0][k];
                v += c[1] * s[1][k];
                v += c[2] * s[2][k];
                dst[k] = v + c[3] * s[3][k];
            }
    }
}

struct ConvGeometry {
    std::size_t in_c, in_h, in_w, out_c, out_h, out_w, pad_top, pad_left;
};

// Precomputed shapes plus reusable activation buffers for up to `batch`
// samples. Per-sample arithmetic is independent of the batch size.
class Engine {
public:
    explicit Engine(const NetworkModel& model, std::size_t batch = 1) : model_(model), batch_(batch) {
        shapes_ = infer_shapes(model.input_shape, model.layers);
        sizes_.push_back(shape_size(model.input_shape));
        Shape in = model.input_shape;
        for (std::size_t i = 0; i < model.layers.size(); ++i) {
            sizes_.push_back(shape_size(shapes_[i]));
            const LayerSpec& l = model.layers[i];
            ConvGeometry g{};
            if (l.kind == LayerKind::Conv2D) {
                g = {in[0],
                     in[1],
                     in[2],
                     shapes_[i][0],
                     shapes_[i][1],
                     shapes_[i][2],
                     pad_before(in[1], l.filter_h, l.stride, l.padding),
                     pad_before(in[2], l.filter_w, l.stride, l.padding)};
            }
            geometry_.push_back(g);
            in = shapes_[i];
        }
        acts_.resize(sizes_.size());
        for (std::size_t i = 0; i < sizes_.size(); ++i) acts_[i].resize(sizes_[i] * batch_);
        max_width_ = *std::max_element(sizes_.begin(), sizes_.end());
        delta_a_.resize(max_width_ * batch_);
        delta_b_.resize(max_width_ * batch_);
    }

    void check_input(const Tensor& input) const {
        if (input.shape != model_.input_shape)
            throw ShapeError(0, "input shape " + shape_to_string(input.shape) + " does not match " +
                                    shape_to_string(model_.input_shape));
    }

    // Runs layers [0, upto) on one sample and returns the activation after them.
    std::span<const double> run(const Tensor& input, std::size_t upto) {
        load(0, input);
        for (std::size_t i = 0; i < upto; ++i) forward_layer(i, 1);
        return {act(upto, 0), sizes_[upto]};
    }

    const Shape& output_shape(std::size_t layer) const { return shapes_[layer]; }

    double logit(const Tensor& input) {
        require_sigmoid_head();
        return run(input, model_.layers.size() - 1)[0];
    }

    // Adds d(loss)/d(params) summed over the batch into grads and writes
    // each sample's loss.
    void accumulate_gradient(std::span<const Sample* const> batch, std::vector<std::vector<Tensor>>& grads,
                             double* losses) {
        require_sigmoid_head();
        const std::size_t n = batch.size();
        if (n > batch_) throw ArgumentError("engine batch capacity exceeded");
        for (std::size_t b = 0; b < n; ++b) load(b, batch[b]->input);
        const std::size_t head = model_.layers.size() - 1;
        for (std::size_t i = 0; i < head; ++i) forward_layer(i, n);
        double* dout = delta_a_.data();
        double* din = delta_b_.data();
        for (std::size_t b = 0; b < n; ++b) {
            const double z = act(head, b)[0];
            losses[b] = bce_from_logit(z, batch[b]->label);
            dout[b * max_width_] = sigmoid(z) - batch[b]->label;
        }
        for (std::size_t i = head; i-- > 0;) {
            backward_layer(i, n, dout, i > 0 ? din : nullptr, grads[i]);
            std::swap(dout, din);
        }
    }

    double accumulate_gradient(const Sample& sample, std::vector<std::vector<Tensor>>& grads) {
        const Sample* one = &sample;
        double loss = 0.0;
        accumulate_gradient(std::span<const Sample* const>(&one, 1), grads, &loss);
        return loss;
    }

    void require_sigmoid_head() const {
        if (model_.layers.empty() || model_.layers.back().kind != LayerKind::Sigmoid ||
            shapes_.back() != Shape{1})
            throw ShapeError(model_.layers.size() ? model_.layers.size() - 1 : 0,
                             "loss requires a final Sigmoid layer with scalar output");
    }

private:
    double* act(std::size_t layer, std::size_t b) { return acts_[layer].data() + b * sizes_[layer]; }

    void load(std::size_t b, const Tensor& input) {
        check_input(input);
        std::copy(input.data.begin(), input.data.end(), act(0, b));
    }

    void forward_layer(std::size_t i, std::size_t n) {
        const LayerSpec& l = model_.layers[i];
        const std::size_t n_in = sizes_[i];
        switch (l.kind) {
            case LayerKind::Dense: {
                const double* w = model_.params[i][0].data.data();
                const double* bias = model_.params[i][1].data.data();
                for (std::size_t o = 0; o < l.out_units; ++o) {
                    const double* row = w + o * n_in;
                    std::size_t b = 0;
                    // Four samples at a time; each sum keeps its own sequential order.
                    for (; b + 4 <= n; b += 4) {
                        const double *x0 = act(i, b), *x1 = act(i, b + 1), *x2 = act(i, b + 2), *x3 = act(i, b + 3);
                        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
                        for (std::size_t k = 0; k < n_in; ++k) {
                            s0 += row[k] * x0[k];
                            s1 += row[k] * x1[k];
                            s2 += row[k] * x2[k];
                            s3 += row[k] * x3[k];
                        }
                        act(i + 1, b)[o] = s0 + bias[o];
                        act(i + 1, b + 1)[o] = s1 + bias[o];
                        act(i + 1, b + 2)[o] = s2 + bias[o];
                        act(i + 1, b + 3)[o] = s3 + bias[o];
                    }
                    for (; b < n; ++b) {
                        const double* in = act(i, b);
                        double sum = 0.0;
                        for (std::size_t k = 0; k < n_in; ++k) sum += row[k] * in[k];
                        act(i + 1, b)[o] = sum + bias[o];
                    }
                }
                break;
            }
            case LayerKind::Conv2D:
                for (std::size_t b = 0; b < n; ++b) conv_forward(i, act(i, b), act(i + 1, b));
                break;
            case LayerKind::ReLU:
                for (std::size_t b = 0; b < n; ++b) {
                    const double* in = act(i, b);
                    double* out = act(i + 1, b);
                    for (std::size_t k = 0; k < n_in; ++k) out[k] = in[k] > 0.0 ? in[k] : 0.0;
                }
                break;
            case LayerKind::LeakyReLU:
                for (std::size_t b = 0; b < n; ++b) {
                    const double* in = act(i, b);
                    double* out = act(i + 1, b);
                    for (std::size_t k = 0; k < n_in; ++k) out[k] = in[k] > 0.0 ? in[k] : kLeakySlope * in[k];
                }
                break;
            case LayerKind::Sigmoid:
                for (std::size_t b = 0; b < n; ++b) {
                    const double* in = act(i, b);
                    double* out = act(i + 1, b);
                    for (std::size_t k = 0; k < n_in; ++k) out[k] = sigmoid(in[k]);
                }
                break;
            case LayerKind::Flatten:
                for (std::size_t b = 0; b < n; ++b) std::copy_n(act(i, b), n_in, act(i + 1, b));
                break;
        }
    }

    void conv_forward(std::size_t i, const double* in, double* out) {
        const LayerSpec& l = model_.layers[i];
        const ConvGeometry& g = geometry_[i];
        const double* w = model_.params[i][0].data.data();
        const double* b = model_.params[i][1].data.data();
        const std::size_t fh = l.filter_h, fw = l.filter_w, s = l.stride;
        for (std::size_t oc = 0; oc < g.out_c; ++oc) {
            for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                    double sum = b[oc];
                    for (std::size_t ic = 0; ic < g.in_c; ++ic) {
                        const double* wk = w + ((oc * g.in_c + ic) * fh) * fw;
                        const double* plane = in + ic * g.in_h * g.in_w;
                        for (std::size_t ky = 0; ky < fh; ++ky) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) -
                                                      static_cast<std::ptrdiff_t>(g.pad_top);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                            const double* row = plane + static_cast<std::size_t>(iy) * g.in_w;
                            for (std::size_t kx = 0; kx < fw; ++kx) {
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) -
                                                          static_cast<std::ptrdiff_t>(g.pad_left);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                                sum += wk[ky * fw + kx] * row[ix];
                            }
                        }
                    }
                    out[(oc * g.out_h + oy) * g.out_w + ox] = sum;
                }
            }
        }
    }

    // dout: gradient w.r.t. layer i output, one max_width_ stride per sample.
    // din (may be null): gradient w.r.t. its input, same layout.
    void backward_layer(std::size_t i, std::size_t n, const double* dout, double* din,
                        std::vector<Tensor>& grads) {
        const LayerSpec& l = model_.layers[i];
        const std::size_t n_in = sizes_[i];
        const std::size_t stride = max_width_;
        switch (l.kind) {
            case LayerKind::Dense: {
                const double* w = model_.params[i][0].data.data();
                double* gw = grads[0].data.data();
                double* gb = grads[1].data.data();
                if (din)
                    for (std::size_t b = 0; b < n; ++b) std::fill_n(din + b * stride, n_in, 0.0);
                std::array<const double*, 4> src{};
                std::array<double, 4> coef{};
                for (std::size_t o0 = 0; o0 < l.out_units; o0 += 4) {
                    const std::size_t o1 = std::min(l.out_units, o0 + 4);
                    for (std::size_t o = o0; o < o1; ++o) {
                        std::size_t m = 0;
                        for (std::size_t b = 0; b < n; ++b) {
                            const double d = dout[b * stride + o];
                            if (d == 0.0) continue;
                            gb[o] += d;
                            src[m] = act(i, b);
                            coef[m++] = d;
                            if (m == 4) {
                                multi_axpy(gw + o * n_in, src.data(), coef.data(), m, n_in);
                                m = 0;
                            }
                        }
                        multi_axpy(gw + o * n_in, src.data(), coef.data(), m, n_in);
                    }
                    if (!din) continue;
                    for (std::size_t b = 0; b < n; ++b) {
                        std::size_t m = 0;
                        for (std::size_t o = o0; o < o1; ++o) {
                            const double d = dout[b * stride + o];
                            if (d == 0.0) continue;
                            src[m] = w + o * n_in;
                            coef[m++] = d;
                        }
                        multi_axpy(din + b * stride, src.data(), coef.data(), m, n_in);
                    }
                }
                break;
            }
            case LayerKind::Conv2D:
                for (std::size_t b = 0; b < n; ++b)
                    conv_backward(i, act(i, b), dout + b * stride, din ? din + b * stride : nullptr, grads);
                break;
            case LayerKind::ReLU:
                if (din)
                    for (std::size_t b = 0; b < n; ++b) {
                        const double* in = act(i, b);
                        for (std::size_t k = 0; k < n_in; ++k)
                            din[b * stride + k] = in[k] > 0.0 ? dout[b * stride + k] : 0.0;
                    }
                break;
            case LayerKind::LeakyReLU:
                if (din)
                    for (std::size_t b = 0; b < n; ++b) {
                        const double* in = act(i, b);
                        for (std::size_t k = 0; k < n_in; ++k)
                            din[b * stride + k] =
                                in[k] > 0.0 ? dout[b * stride + k] : kLeakySlope * dout[b * stride + k];
                    }
                break;
            case LayerKind::Sigmoid:
                if (din)
                    for (std::size_t b = 0; b < n; ++b) {
                        const double* out = act(i + 1, b);
                        for (std::size_t k = 0; k < n_in; ++k)
                            din[b * stride + k] = dout[b * stride + k] * out[k] * (1.0 - out[k]);
                    }
                break;
            case LayerKind::Flatten:
                if (din)
                    for (std::size_t b = 0; b < n; ++b) std::copy_n(dout + b * stride, n_in, din + b * stride);
                break;
        }
    }

    void conv_backward(std::size_t i, const double* in, const double* dout, double* din,
                       std::vector<Tensor>& grads) {
        const LayerSpec& l = model_.layers[i];
        const ConvGeometry& g = geometry_[i];
        const double* w = model_.params[i][0].data.data();
        double* gw = grads[0].data.data();
        double* gb = grads[1].data.data();
        const std::size_t fh = l.filter_h, fw = l.filter_w, s = l.stride;
        if (din) std::fill_n(din, sizes_[i], 0.0);
        for (std::size_t oc = 0; oc < g.out_c; ++oc) {
            for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                    const double d = dout[(oc * g.out_h + oy) * g.out_w + ox];
                    if (d == 0.0) continue;
                    gb[oc] += d;
                    for (std::size_t ic = 0; ic < g.in_c; ++ic) {
                        const std::size_t wbase = ((oc * g.in_c + ic) * fh) * fw;
                        const std::size_t pbase = ic * g.in_h * g.in_w;
                        for (std::size_t ky = 0; ky < fh; ++ky) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) -
                                                      static_cast<std::ptrdiff_t>(g.pad_top);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                            const std::size_t rbase = pbase + static_cast<std::size_t>(iy) * g.in_w;
                            for (std::size_t kx = 0; kx < fw; ++kx) {
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s + kx) -
                                                          static_cast<std::ptrdiff_t>(g.pad_left);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                                const std::size_t src = rbase + static_cast<std::size_t>(ix);
                                gw[wbase + ky * fw + kx] += d * in[src];
                                if (din) din[src] += d * w[wbase + ky * fw + kx];
                            }
                        }
                    }
                }
            }
        }
    }

    const NetworkModel& model_;
    std::size_t batch_;
    std::vector<Shape> shapes_;
    std::vector<std::size_t> sizes_;  // per-sample width of acts_[i]
    std::vector<ConvGeometry> geometry_;
    std::vector<std::vector<double>> acts_;
    std::size_t max_width_ = 0;
    std::vector<double> delta_a_;
    std::vector<double> delta_b_;
};

std::vector<std::vector<Tensor>> zero_like(const NetworkModel& model) {
    std::vector<std::vector<Tensor>> g;
    for (const auto& p : model.params) {
        std::vector<Tensor> layer;
        for (const auto& t : p) layer.emplace_back(t.shape);
        g.push_back(std::move(layer));
    }
    return g;
}

}  // namespace

double forward(const NetworkModel& model, const Tensor& input) {
    Engine engine(model);
    const auto out = engine.run(input, model.layers.size());
    if (out.size() != 1)
        throw ShapeError(model.layers.size() - 1, "network output is not scalar: " +
                                                      shape_to_string(engine.output_shape(model.layers.size() - 1)));
    return out[0];
}

double forward_logit(const NetworkModel& model, const Tensor& input) {
    Engine engine(model);
    return engine.logit(input);
}

Tensor forward_until(const NetworkModel& model, const Tensor& input, std::size_t layer) {
    if (layer >= model.layers.size()) throw ShapeError(layer, "no such layer");
    Engine engine(model);
    const auto out = engine.run(input, layer + 1);
    return Tensor(engine.output_shape(layer), std::vector<double>(out.begin(), out.end()));
}

double sample_loss(const NetworkModel& model, const Sample& sample) {
    Engine engine(model);
    return bce_from_logit(engine.logit(sample.input), sample.label);
}

double mean_loss(const NetworkModel& model, std::span<const Sample> samples) {
    if (samples.empty()) return 0.0;
    Engine engine(model);
    double total = 0.0;
    for (const auto& s : samples) total += bce_from_logit(engine.logit(s.input), s.label);
    return total / static_cast<double>(samples.size());
}

std::vector<std::vector<Tensor>> gradient(const NetworkModel& model, const Sample& sample) {
    Engine engine(model);
    auto grads = zero_like(model);
    engine.accumulate_gradient(sample, grads);
    return grads;
}

TrainResult train(const NetworkModel& model, std::span<const Sample> samples, const TrainConfig& config) {
    if (samples.empty()) throw ArgumentError("train: no samples");
    if (config.epochs < 1) throw ArgumentError("train: epochs must be >= 1");
    if (config.batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
    if (!(config.learning_rate >= 0.0)) throw ArgumentError("train: learning_rate must be non-negative");
    for (const auto& s : samples)
        if (s.label != 0.0 && s.label != 1.0) throw ArgumentError("train: labels must be 0 or 1");

    TrainResult result{model, {}};
    NetworkModel& m = result.model;
    Engine engine(m, std::min(config.batch_size, samples.size()));
    engine.require_sigmoid_head();
    std::vector<const Sample*> batch;

    auto grads = zero_like(m);
    auto velocity = zero_like(m);
    std::vector<double> losses(samples.size());
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(config.seed);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            for (auto& p : grads)
                for (auto& t : p) std::fill(t.data.begin(), t.data.end(), 0.0);
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(&samples[order[k]]);
            std::vector<double> batch_losses(batch.size());
            engine.accumulate_gradient(batch, grads, batch_losses.data());
            for (std::size_t k = start; k < end; ++k) {
                if (!std::isfinite(batch_losses[k - start])) throw TrainingDiverged(epoch);
                losses[order[k]] = batch_losses[k - start];
            }
            const double scale = config.learning_rate / static_cast<double>(end - start);
            for (std::size_t i = 0; i < m.params.size(); ++i) {
                for (std::size_t j = 0; j < m.params[i].size(); ++j) {
                    auto& w = m.params[i][j].data;
                    const auto& g = grads[i][j].data;
                    if (config.optimizer == Optimizer::Momentum) {
                        auto& v = velocity[i][j].data;
                        for (std::size_t k = 0; k < w.size(); ++k) {
                            v[k] = config.momentum * v[k] - scale * g[k];
                            w[k] += v[k];
                        }
                    } else {
                        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= scale * g[k];
                    }
                }
            }
        }
        double total = 0.0;
        for (double l : losses) total += l;
        const double mean = total / static_cast<double>(losses.size());
        if (!std::isfinite(mean)) throw TrainingDiverged(epoch);
        result.loss_history.push_back(mean);
    }
    m.metadata.seed = config.seed;
    m.metadata.epochs += config.epochs;
    return result;
}

namespace {

// Straightforward extended-precision forward pass, with one parameter offset
// by `delta`. Serves as the finite-difference side of gradient_check.
long double reference_loss(const NetworkModel& m, const std::vector<Shape>& shapes, const Sample& sample,
                           std::size_t pl, std::size_t pj, std::size_t pk, long double delta) {
    auto param = [&](std::size_t l, std::size_t j, std::size_t k) {
        long double v = m.params[l][j].data[k];
        if (l == pl && j == pj && k == pk) v += delta;
        return v;
    };
    std::vector<long double> cur(sample.input.data.begin(), sample.input.data.end());
    Shape in = m.input_shape;
    for (std::size_t i = 0; i + 1 < m.layers.size(); ++i) {
        const LayerSpec& l = m.layers[i];
        std::vector<long double> out(shape_size(shapes[i]));
        switch (l.kind) {
            case LayerKind::Dense:
                for (std::size_t o = 0; o < l.out_units; ++o) {
                    long double sum = param(i, 1, o);
                    for (std::size_t k = 0; k < l.in_units; ++k) sum += param(i, 0, o * l.in_units + k) * cur[k];
                    out[o] = sum;
                }
                break;
            case LayerKind::Conv2D: {
                const std::size_t ih = in[1], iw = in[2], oh = shapes[i][1], ow = shapes[i][2];
                const auto pt = static_cast<std::ptrdiff_t>(pad_before(ih, l.filter_h, l.stride, l.padding));
                const auto pw = static_cast<std::ptrdiff_t>(pad_before(iw, l.filter_w, l.stride, l.padding));
                for (std::size_t oc = 0; oc < l.out_channels; ++oc)
                    for (std::size_t oy = 0; oy < oh; ++oy)
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            long double sum = param(i, 1, oc);
                            for (std::size_t ic = 0; ic < l.in_channels; ++ic)
                                for (std::size_t ky = 0; ky < l.filter_h; ++ky)
                                    for (std::size_t kx = 0; kx < l.filter_w; ++kx) {
                                        const auto y = static_cast<std::ptrdiff_t>(oy * l.stride + ky) - pt;
                                        const auto x = static_cast<std::ptrdiff_t>(ox * l.stride + kx) - pw;
                                        if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(ih) ||
                                            x >= static_cast<std::ptrdiff_t>(iw))
                                            continue;
                                        sum += param(i, 0, ((oc * l.in_channels + ic) * l.filter_h + ky) * l.filter_w + kx) *
                                               cur[(ic * ih + static_cast<std::size_t>(y)) * iw + static_cast<std::size_t>(x)];
                                    }
                            out[(oc * oh + oy) * ow + ox] = sum;
                        }
                break;
            }
            case LayerKind::ReLU:
                for (std::size_t k = 0; k < cur.size(); ++k) out[k] = cur[k] > 0 ? cur[k] : 0.0L;
                break;
            case LayerKind::LeakyReLU:
                for (std::size_t k = 0; k < cur.size(); ++k)
                    out[k] = cur[k] > 0 ? cur[k] : static_cast<long double>(kLeakySlope) * cur[k];
                break;
            case LayerKind::Sigmoid:
                for (std::size_t k = 0; k < cur.size(); ++k) out[k] = 1.0L / (1.0L + std::exp(-cur[k]));
                break;
            case LayerKind::Flatten:
                out = cur;
                break;
        }
        cur = std::move(out);
        in = shapes[i];
    }
    const long double z = cur[0], y = sample.label;
    return std::max(z, 0.0L) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

double gradient_check(const NetworkModel& model, const Sample& sample, double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) throw ArgumentError("gradient_check: epsilon must be in [1e-7, 1e-3]");
    const auto analytic = gradient(model, sample);
    const auto shapes = infer_shapes(model.input_shape, model.layers);
    const long double eps = epsilon;
    double worst = 0.0;
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        for (std::size_t j = 0; j < model.params[i].size(); ++j) {
            for (std::size_t k = 0; k < model.params[i][j].size(); ++k) {
                const long double up = reference_loss(model, shapes, sample, i, j, k, eps);
                const long double down = reference_loss(model, shapes, sample, i, j, k, -eps);
                const double numeric = static_cast<double>((up - down) / (2.0L * eps));
                const double a = analytic[i][j].data[k];
                const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
                worst = std::max(worst, std::abs(a - numeric) / denom);
            }
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[5] = {'T', 'N', 'E', 'T', '1'};

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "Dense";
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::LeakyReLU: return "LeakyReLU";
        case LayerKind::Sigmoid: return "Sigmoid";
        case LayerKind::Flatten: return "Flatten";
    }
    return "?";
}

LayerKind kind_from_name(const std::string& s) {
    for (auto k : {LayerKind::Dense, LayerKind::Conv2D, LayerKind::ReLU, LayerKind::LeakyReLU, LayerKind::Sigmoid,
                   LayerKind::Flatten})
        if (s == kind_name(k)) return k;
    throw ModelFormatError("unknown layer kind '" + s + "'");
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw ModelFormatError("truncated model file");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw ModelFormatError("truncated model file");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

}  // namespace

json layer_to_json(const LayerSpec& l) {
    json j{{"kind", kind_name(l.kind)}};
    if (l.kind == LayerKind::Dense) {
        j["in_units"] = l.in_units;
        j["out_units"] = l.out_units;
    } else if (l.kind == LayerKind::Conv2D) {
        j["in_channels"] = l.in_channels;
        j["out_channels"] = l.out_channels;
        j["filter_h"] = l.filter_h;
        j["filter_w"] = l.filter_w;
        j["stride"] = l.stride;
        j["padding"] = l.padding == Padding::Same ? "same" : "valid";
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    LayerSpec l{kind_from_name(j.at("kind").get<std::string>())};
    if (l.kind == LayerKind::Dense) {
        l.in_units = j.at("in_units").get<std::size_t>();
        l.out_units = j.at("out_units").get<std::size_t>();
    } else if (l.kind == LayerKind::Conv2D) {
        l.in_channels = j.at("in_channels").get<std::size_t>();
        l.out_channels = j.at("out_channels").get<std::size_t>();
        l.filter_h = j.at("filter_h").get<std::size_t>();
        l.filter_w = j.at("filter_w").get<std::size_t>();
        l.stride = j.at("stride").get<std::size_t>();
        l.padding = j.at("padding").get<std::string>() == "same" ? Padding::Same : Padding::Valid;
    }
    return l;
}

void save_model(std::ostream& out, const NetworkModel& model) {
    json header;
    header["input_shape"] = model.input_shape;
    header["layers"] = json::array();
    for (const auto& l : model.layers) header["layers"].push_back(layer_to_json(l));
    header["metadata"] = {{"architecture", model.metadata.architecture},
                          {"seed", model.metadata.seed},
                          {"epochs", model.metadata.epochs},
                          {"extra", model.metadata.extra}};
    json shapes = json::array();
    for (const auto& p : model.params) {
        json layer = json::array();
        for (const auto& t : p) layer.push_back(t.shape);
        shapes.push_back(layer);
    }
    header["param_shapes"] = shapes;
    const std::string text = header.dump();

    out.write(kMagic, sizeof kMagic);
    put_u32(out, kModelFormatVersion);
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.params) {
        for (const auto& t : p) {
            put_u64(out, t.size());
            for (double v : t.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
        }
    }
}

void save_model(const std::filesystem::path& path, const NetworkModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    save_model(out, model);
}

NetworkModel load_model(std::istream& in) {
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (in.gcount() != sizeof magic || !std::equal(magic, magic + sizeof magic, kMagic))
        throw ModelFormatError("not a model file (bad magic)");
    const std::uint32_t version = get_u32(in);
    if (version != kModelFormatVersion) throw UnsupportedVersionError(version);
    const std::uint64_t header_len = get_u64(in);
    if (header_len > (1u << 26)) throw ModelFormatError("implausible header length");
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (static_cast<std::uint64_t>(in.gcount()) != header_len) throw ModelFormatError("truncated model header");

    NetworkModel m;
    try {
        const json header = json::parse(text);
        m.input_shape = header.at("input_shape").get<Shape>();
        for (const auto& lj : header.at("layers")) m.layers.push_back(layer_from_json(lj));
        const json& meta = header.at("metadata");
        m.metadata.architecture = meta.at("architecture").get<std::string>();
        m.metadata.seed = meta.at("seed").get<std::uint64_t>();
        m.metadata.epochs = meta.at("epochs").get<std::size_t>();
        m.metadata.extra = meta.at("extra");
        for (const auto& layer : header.at("param_shapes")) {
            std::vector<Tensor> p;
            for (const auto& s : layer) p.emplace_back(s.get<Shape>());
            m.params.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw ModelFormatError(std::string("bad model header: ") + e.what());
    }
    if (m.params.size() != m.layers.size()) throw ModelFormatError("parameter/layer count mismatch");
    try {
        infer_shapes(m.input_shape, m.layers);
    } catch (const ShapeError& e) {
        throw ModelFormatError(std::string("inconsistent architecture: ") + e.what());
    }
    for (auto& p : m.params) {
        for (auto& t : p) {
            const std::uint64_t n = get_u64(in);
            if (n != t.size()) throw ModelFormatError("weight blob length mismatch");
            for (double& v : t.data) v = std::bit_cast<double>(get_u64(in));
        }
    }
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        std::vector<Shape> actual;
        for (const auto& t : m.params[i]) actual.push_back(t.shape);
        if (actual != param_shapes(m.layers[i]))
            throw ModelFormatError("parameter shape mismatch in layer " + std::to_string(i));
    }
    return m;
}

NetworkModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError("cannot open model " + path.string());
    return load_model(in);
}

}  // namespace robophoto::tinynet
