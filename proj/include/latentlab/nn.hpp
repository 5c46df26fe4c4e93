#pragma once

// Dense-network substrate: layers, batched forward/backward with an explicit
// activation trace, gradient tapes, Adam, and a central finite-difference
// gradient checker.
//
// Batches are column-major: one sample per column.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latentlab/error.hpp"

namespace latentlab::nn {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Activation : std::uint8_t { linear = 0, relu = 1, sigmoid = 2 };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "unknown";
}

inline Activation activation_from_tag(std::uint8_t tag) {
    if (tag > 2) throw ParseError("unknown activation tag " + std::to_string(tag));
    return static_cast<Activation>(tag);
}

template <class T>
T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
}

/// log(1 + exp(x)) without overflow.
template <class T>
T softplus(T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class Derived>
void activate_in_place(Eigen::MatrixBase<Derived>& m, Activation a) {
    using T = typename Derived::Scalar;
    switch (a) {
        case Activation::linear: break;
        case Activation::relu: m = m.cwiseMax(T(0)); break;
        case Activation::sigmoid: m = m.unaryExpr([](T v) { return sigmoid(v); }); break;
    }
}

/// d(activation)/d(preactivation), expressed through the activation output.
template <class T>
Matrix<T> activation_derivative(const Matrix<T>& output, Activation a) {
    switch (a) {
        case Activation::linear: return Matrix<T>::Ones(output.rows(), output.cols());
        case Activation::relu: return (output.array() > T(0)).template cast<T>().matrix();
        case Activation::sigmoid: return (output.array() * (T(1) - output.array())).matrix();
    }
    return {};
}

template <class T>
struct DenseLayer {
    Matrix<T> weights;  // out x in
    Vector<T> bias;
    Activation activation = Activation::linear;

    DenseLayer() = default;
    DenseLayer(Eigen::Index in, Eigen::Index out, Activation act)
        : weights(Matrix<T>::Zero(out, in)), bias(Vector<T>::Zero(out)), activation(act) {}

    [[nodiscard]] Eigen::Index in_dim() const { return weights.cols(); }
    [[nodiscard]] Eigen::Index out_dim() const { return weights.rows(); }
    [[nodiscard]] std::size_t parameter_count() const {
        return static_cast<std::size_t>(weights.size() + bias.size());
    }

    /// Uniform in +-sqrt(6 / (fan_in + fan_out)); bias zero. Draw order is row-major.
    void init_uniform(std::mt19937_64& rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index r = 0; r < weights.rows(); ++r)
            for (Eigen::Index c = 0; c < weights.cols(); ++c) weights(r, c) = static_cast<T>(dist(rng));
        bias.setZero();
    }

    template <class U>
    [[nodiscard]] DenseLayer<U> cast() const {
        DenseLayer<U> out;
        out.weights = weights.template cast<U>();
        out.bias = bias.template cast<U>();
        out.activation = activation;
        return out;
    }

    /// Batched forward. Returns the post-activation; `pre` receives the
    /// preactivation when non-null.
    Matrix<T> forward_batch(const Matrix<T>& input, Matrix<T>* pre = nullptr) const {
        if (input.rows() != in_dim())
            throw DimensionError("dense layer expects input of " + std::to_string(in_dim()) + " rows, got " +
                                 std::to_string(input.rows()) + "x" + std::to_string(input.cols()));
        Matrix<T> z = weights * input;
        z.colwise() += bias;
        if (pre) *pre = z;
        activate_in_place(z, activation);
        return z;
    }
};

template <class T>
Vector<T> forward(const DenseLayer<T>& layer, const Vector<T>& input) {
    if (input.size() != layer.in_dim())
        throw DimensionError("forward: layer is " + std::to_string(layer.out_dim()) + "x" +
                             std::to_string(layer.in_dim()) + ", input has length " + std::to_string(input.size()));
    Vector<T> z = layer.weights * input + layer.bias;
    activate_in_place(z, layer.activation);
    return z;
}

template <class T>
struct LayerGradient {
    Matrix<T> weights;
    Vector<T> bias;
};

/// Per-parameter gradient buffers shaped like the layers they belong to.
template <class T>
struct GradientTape {
    std::vector<LayerGradient<T>> layers;

    GradientTape() = default;
    explicit GradientTape(std::span<const DenseLayer<T>> shape_of) {
        layers.reserve(shape_of.size());
        for (const auto& l : shape_of)
            layers.push_back({Matrix<T>::Zero(l.out_dim(), l.in_dim()), Vector<T>::Zero(l.out_dim())});
    }

    void zero() {
        for (auto& g : layers) {
            g.weights.setZero();
            g.bias.setZero();
        }
    }

    [[nodiscard]] bool matches(std::span<const DenseLayer<T>> params) const {
        if (params.size() != layers.size()) return false;
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (layers[i].weights.rows() != params[i].weights.rows() ||
                layers[i].weights.cols() != params[i].weights.cols() ||
                layers[i].bias.size() != params[i].bias.size())
                return false;
        }
        return true;
    }
};

/// Activations recorded by a forward pass and consumed by backward.
template <class T>
struct Trace {
    std::vector<Matrix<T>> inputs;
    std::vector<Matrix<T>> outputs;
    Matrix<T> last_preactivation;
    bool recorded = false;
};

/// A plain stack of dense layers.
template <class T>
class Network {
public:
    Network() = default;
    explicit Network(std::vector<DenseLayer<T>> layers) : layers_(std::move(layers)) {
        for (std::size_t i = 1; i < layers_.size(); ++i) {
            if (layers_[i].in_dim() != layers_[i - 1].out_dim())
                throw DimensionError("layer " + std::to_string(i) + " expects " +
                                     std::to_string(layers_[i].in_dim()) + " inputs but layer " +
                                     std::to_string(i - 1) + " produces " + std::to_string(layers_[i - 1].out_dim()));
        }
    }

    [[nodiscard]] std::span<const DenseLayer<T>> layers() const { return layers_; }
    [[nodiscard]] std::span<DenseLayer<T>> layers() { return layers_; }
    [[nodiscard]] bool empty() const { return layers_.empty(); }
    [[nodiscard]] Eigen::Index in_dim() const { return layers_.front().in_dim(); }
    [[nodiscard]] Eigen::Index out_dim() const { return layers_.back().out_dim(); }

    [[nodiscard]] Vector<T> forward(const Vector<T>& input) const {
        Vector<T> x = input;
        for (const auto& l : layers_) x = latentlab::nn::forward(l, x);
        return x;
    }

    /// Batched forward that records everything backward needs.
    Matrix<T> forward(const Matrix<T>& input, Trace<T>& trace) const {
        trace.inputs.resize(layers_.size());
        trace.outputs.resize(layers_.size());
        Matrix<T> x = input;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            trace.inputs[i] = x;
            const bool last = i + 1 == layers_.size();
            x = layers_[i].forward_batch(x, last ? &trace.last_preactivation : nullptr);
            trace.outputs[i] = x;
        }
        trace.recorded = true;
        return x;
    }

    [[nodiscard]] Matrix<T> forward_batch(const Matrix<T>& input) const {
        Matrix<T> x = input;
        for (const auto& l : layers_) x = l.forward_batch(x);
        return x;
    }

    /// Accumulates dLoss/dParam into `tape` and returns dLoss/dInput (empty
    /// when `need_input_gradient` is false). When `upstream_is_preactivation`
    /// is set, `upstream` is taken as the gradient w.r.t. the last layer's
    /// preactivation, which lets callers fuse a sigmoid with its loss.
    Matrix<T> backward(const Trace<T>& trace, const Matrix<T>& upstream, GradientTape<T>& tape,
                       bool upstream_is_preactivation = false, bool need_input_gradient = true) const {
        if (!trace.recorded) throw StateError("backward called without a recorded forward pass");
        if (trace.inputs.size() != layers_.size()) throw StateError("trace was recorded by a different network");
        if (!tape.matches(layers_)) throw DimensionError("gradient tape does not match network parameter shapes");
        const Matrix<T>& top = trace.outputs.back();
        if (upstream.rows() != top.rows() || upstream.cols() != top.cols())
            throw DimensionError("upstream gradient is " + std::to_string(upstream.rows()) + "x" +
                                 std::to_string(upstream.cols()) + ", network output is " +
                                 std::to_string(top.rows()) + "x" + std::to_string(top.cols()));

        Matrix<T> grad = upstream;
        for (std::size_t idx = layers_.size(); idx-- > 0;) {
            const auto& layer = layers_[idx];
            Matrix<T> dz;
            if (idx + 1 == layers_.size() && upstream_is_preactivation)
                dz = std::move(grad);
            else
                dz = grad.cwiseProduct(activation_derivative(trace.outputs[idx], layer.activation));
            tape.layers[idx].weights.noalias() += dz * trace.inputs[idx].transpose();
            tape.layers[idx].bias += dz.rowwise().sum();
            if (idx > 0 || need_input_gradient) grad = layer.weights.transpose() * dz;
            else grad = Matrix<T>();
        }
        return grad;
    }

    GradientTape<T> backward(const Trace<T>& trace, const Matrix<T>& upstream) const {
        GradientTape<T> tape(layers());
        backward(trace, upstream, tape);
        return tape;
    }

private:
    std::vector<DenseLayer<T>> layers_;
};

/// A named, flat window onto one parameter (or gradient) tensor.
template <class T>
struct ParameterView {
    std::string name;
    std::span<T> values;
};

template <class T>
void append_views(std::vector<ParameterView<T>>& out, DenseLayer<T>& layer, const std::string& prefix) {
    out.push_back({prefix + ".weights", std::span<T>(layer.weights.data(), static_cast<std::size_t>(layer.weights.size()))});
    out.push_back({prefix + ".bias", std::span<T>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()))});
}

template <class T>
void append_views(std::vector<ParameterView<T>>& out, LayerGradient<T>& grad, const std::string& prefix) {
    out.push_back({prefix + ".weights", std::span<T>(grad.weights.data(), static_cast<std::size_t>(grad.weights.size()))});
    out.push_back({prefix + ".bias", std::span<T>(grad.bias.data(), static_cast<std::size_t>(grad.bias.size()))});
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are allocated on the first step
/// and shaped after the parameters seen then.
template <class T>
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    void step(std::span<const ParameterView<T>> params, std::span<const ParameterView<T>> grads) {
        if (params.size() != grads.size())
            throw DimensionError("adam: " + std::to_string(params.size()) + " parameter tensors but " +
                                 std::to_string(grads.size()) + " gradient tensors");
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].values.size() != grads[i].values.size())
                throw DimensionError("adam: gradient for " + params[i].name + " has " +
                                     std::to_string(grads[i].values.size()) + " values, parameter has " +
                                     std::to_string(params[i].values.size()));
            for (std::size_t j = 0; j < grads[i].values.size(); ++j) {
                if (!std::isfinite(grads[i].values[j]))
                    throw NumericalError("adam: non-finite gradient in " + params[i].name + "[" + std::to_string(j) +
                                         "]");
            }
        }
        if (first_.empty()) {
            for (const auto& p : params) {
                first_.emplace_back(Eigen::Array<T, Eigen::Dynamic, 1>::Zero(static_cast<Eigen::Index>(p.values.size())));
                second_.emplace_back(Eigen::Array<T, Eigen::Dynamic, 1>::Zero(static_cast<Eigen::Index>(p.values.size())));
            }
        } else if (first_.size() != params.size()) {
            throw DimensionError("adam: parameter set changed between steps");
        }

        ++steps_;
        const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
        const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
        const T b1 = static_cast<T>(config_.beta1);
        const T b2 = static_cast<T>(config_.beta2);
        const T lr = static_cast<T>(config_.learning_rate / bc1);
        const T inv_bc2 = static_cast<T>(1.0 / bc2);
        const T eps = static_cast<T>(config_.epsilon);

        using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto n = static_cast<Eigen::Index>(params[i].values.size());
            if (first_[i].size() != n) throw DimensionError("adam: shape of " + params[i].name + " changed");
            ArrayMap p(params[i].values.data(), n);
            ArrayMap g(grads[i].values.data(), n);
            first_[i] = b1 * first_[i] + (T(1) - b1) * g;
            second_[i] = b2 * second_[i] + (T(1) - b2) * g.square();
            p -= lr * first_[i] / ((second_[i] * inv_bc2).sqrt() + eps);
        }
    }

    [[nodiscard]] long steps() const { return steps_; }
    [[nodiscard]] const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    long steps_ = 0;
    std::vector<Eigen::Array<T, Eigen::Dynamic, 1>> first_;
    std::vector<Eigen::Array<T, Eigen::Dynamic, 1>> second_;
};

struct FiniteDifferenceReport {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    std::size_t checked = 0;
};

/// Compares analytic gradients against central differences
/// (L(t+h) - L(t-h)) / 2h for every parameter entry. Relative error is
/// |a - n| / max(|a|, |n|, 1e-12). Parameters are restored bit-exactly.
/// A loss returning long double is differenced without first rounding to double.
template <class T, class LossFn>
FiniteDifferenceReport finite_difference_check(LossFn&& loss, std::span<const ParameterView<T>> parameters,
                                               std::span<const ParameterView<T>> analytic, T step) {
    if (!(step > T(0))) throw ArgumentError("finite difference step must be positive");
    if (parameters.size() != analytic.size())
        throw DimensionError("finite difference check: parameter/gradient tensor counts differ");
    FiniteDifferenceReport report;
    auto eval = [&]() {
        const long double v = static_cast<long double>(loss());
        if (!std::isfinite(v)) throw NumericalError("finite difference check: loss is not finite");
        return v;
    };
    eval();
    for (std::size_t t = 0; t < parameters.size(); ++t) {
        const auto& p = parameters[t];
        if (p.values.size() != analytic[t].values.size())
            throw DimensionError("finite difference check: gradient shape differs for " + p.name);
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            const T original = p.values[i];
            p.values[i] = original + step;
            const long double up = eval();
            p.values[i] = original - step;
            const long double down = eval();
            p.values[i] = original;
            // The perturbed parameter may not be exactly original +- step.
            const long double span = static_cast<long double>(original + step) - static_cast<long double>(original - step);
            const double numeric = static_cast<double>((up - down) / span);
            const double a = static_cast<double>(analytic[t].values[i]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
            const double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (report.checked == 1 || rel > report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst_parameter = p.name;
                report.worst_index = i;
                report.analytic_at_worst = a;
                report.numeric_at_worst = numeric;
            }
        }
    }
    return report;
}

}  // namespace latentlab::nn
