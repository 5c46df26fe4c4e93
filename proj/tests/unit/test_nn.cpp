#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "latentlab/nn.hpp"

using namespace latentlab;
using namespace latentlab::nn;

namespace {

DenseLayer<double> random_layer(Eigen::Index in, Eigen::Index out, Activation act, std::uint64_t seed) {
    DenseLayer<double> l(in, out, act);
    std::mt19937_64 rng(seed);
    l.init_uniform(rng);
    std::uniform_real_distribution<double> b(-0.5, 0.5);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = b(rng);
    return l;
}

}  // namespace

TEST(Forward, IdentityLinear) {
    DenseLayer<double> l(3, 3, Activation::linear);
    l.weights.setIdentity();
    Vector<double> x(3);
    x << 1, 2, 3;
    const auto y = forward(l, x);
    EXPECT_EQ(y, x);
}

TEST(Forward, ZeroInputReluGivesZero) {
    auto l = random_layer(5, 4, Activation::relu, 3);
    l.bias.setZero();
    const auto y = forward(l, Vector<double>::Zero(5).eval());
    for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], 0.0);
}

TEST(Forward, MatchesHandMultiplication) {
    const auto l = random_layer(3, 4, Activation::linear, 11);
    Vector<double> x(3);
    x << 0.3, -1.2, 2.0;
    const auto y = forward(l, x);
    for (Eigen::Index r = 0; r < 4; ++r) {
        double s = l.bias[r];
        for (Eigen::Index c = 0; c < 3; ++c) s += l.weights(r, c) * x[c];
        EXPECT_NEAR(y[r], s, 1e-15);
    }
}

TEST(Forward, ShapeMismatchNamesBothShapes) {
    DenseLayer<double> l(3, 4, Activation::linear);
    try {
        forward(l, Vector<double>::Zero(5).eval());
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("4x3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("5"), std::string::npos) << msg;
    }
}

TEST(Forward, Deterministic) {
    const auto l = random_layer(16, 8, Activation::sigmoid, 5);
    const Vector<double> x = Vector<double>::LinSpaced(16, -2, 2);
    EXPECT_EQ(forward(l, x), forward(l, x));
}

TEST(Activations, RangeProperties) {
    std::mt19937_64 rng(1);
    // Beyond |x| ~ 37 the double sigmoid rounds to exactly 0 or 1.
    std::uniform_real_distribution<double> u(-30, 30);
    Matrix<double> m(1, 1000);
    for (Eigen::Index i = 0; i < m.cols(); ++i) m(0, i) = u(rng);
    Matrix<double> r = m, s = m;
    activate_in_place(r, Activation::relu);
    activate_in_place(s, Activation::sigmoid);
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
        EXPECT_GE(r(0, i), 0.0);
        EXPECT_GT(s(0, i), 0.0);
        EXPECT_LT(s(0, i), 1.0);
    }
    EXPECT_EQ(sigmoid(-1000.0), 0.0);  // underflows but stays finite
    EXPECT_TRUE(std::isfinite(softplus(1000.0)));
}

TEST(Backward, SingleLinearNeuron) {
    DenseLayer<double> l(1, 1, Activation::linear);
    l.weights(0, 0) = 0.7;
    Network<double> net({l});
    Trace<double> trace;
    Matrix<double> x(1, 1);
    x(0, 0) = 2.0;
    net.forward(x, trace);
    const auto tape = net.backward(trace, Matrix<double>::Ones(1, 1));
    EXPECT_DOUBLE_EQ(tape.layers[0].weights(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(tape.layers[0].bias[0], 1.0);
}

TEST(Backward, SigmoidLocalGradientAtZero) {
    DenseLayer<double> l(1, 1, Activation::sigmoid);
    Network<double> net({l});
    Trace<double> trace;
    net.forward(Matrix<double>::Zero(1, 1), trace);
    const auto tape = net.backward(trace, Matrix<double>::Ones(1, 1));
    EXPECT_DOUBLE_EQ(tape.layers[0].bias[0], 0.25);
}

TEST(Backward, WithoutForwardIsStateError) {
    Network<double> net({DenseLayer<double>(2, 2, Activation::linear)});
    Trace<double> trace;
    EXPECT_THROW(net.backward(trace, Matrix<double>::Ones(2, 1)), StateError);
}

TEST(Backward, TwoLayerMatchesFiniteDifferences) {
    Network<double> net({random_layer(4, 6, Activation::sigmoid, 21), random_layer(6, 3, Activation::linear, 22)});
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0, 1);
    Matrix<double> x(4, 5), target(3, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = n(rng);

    // loss = 0.5 * ||net(x) - target||^2
    auto loss = [&] { return 0.5 * (net.forward_batch(x) - target).squaredNorm(); };
    Trace<double> trace;
    const Matrix<double> out = net.forward(x, trace);
    auto tape = net.backward(trace, out - target);

    std::vector<ParameterView<double>> params, grads;
    for (std::size_t i = 0; i < 2; ++i) {
        append_views(params, net.layers()[i], "layer" + std::to_string(i));
        append_views(grads, tape.layers[i], "layer" + std::to_string(i));
    }
    const auto report = finite_difference_check<double>(loss, params, grads, 1e-5);
    EXPECT_EQ(report.checked, std::size_t{4 * 6 + 6 + 6 * 3 + 3});
    EXPECT_LE(report.max_relative_error, 1e-4) << report.worst_parameter << "[" << report.worst_index << "]";
}

TEST(Backward, ReluLayerMatchesFiniteDifferences) {
    Network<double> net({random_layer(3, 8, Activation::relu, 31), random_layer(8, 2, Activation::sigmoid, 32)});
    Matrix<double> x(3, 4);
    x << 0.5, -1.0, 1.5, 0.2, 1.1, 0.3, -0.7, 0.9, -0.4, 0.8, 0.6, -1.3;
    auto loss = [&] { return net.forward_batch(x).sum(); };
    Trace<double> trace;
    net.forward(x, trace);
    auto tape = net.backward(trace, Matrix<double>::Ones(2, 4));
    std::vector<ParameterView<double>> params, grads;
    for (std::size_t i = 0; i < 2; ++i) {
        append_views(params, net.layers()[i], "l" + std::to_string(i));
        append_views(grads, tape.layers[i], "l" + std::to_string(i));
    }
    EXPECT_LE(finite_difference_check<double>(loss, params, grads, 1e-6).max_relative_error, 1e-4);
}

TEST(FiniteDifference, QuadraticIsExact) {
    std::vector<double> theta{3.0};
    std::vector<double> grad{3.0};
    std::vector<ParameterView<double>> p{{"theta", theta}}, g{{"theta", grad}};
    const auto r = finite_difference_check<double>([&] { return 0.5 * theta[0] * theta[0]; }, p, g, 1e-4);
    EXPECT_NEAR(r.numeric_at_worst, 3.0, 1e-9);
    EXPECT_LT(r.max_relative_error, 1e-9);
    EXPECT_EQ(theta[0], 3.0);  // restored
}

TEST(FiniteDifference, ConstantLossZeroError) {
    std::vector<double> theta{1.0, -2.0};
    std::vector<double> grad{0.0, 0.0};
    std::vector<ParameterView<double>> p{{"theta", theta}}, g{{"theta", grad}};
    EXPECT_EQ(finite_difference_check<double>([] { return 4.0; }, p, g, 1e-3).max_relative_error, 0.0);
}

TEST(FiniteDifference, NonFiniteLossAndBadStep) {
    std::vector<double> theta{1.0};
    std::vector<double> grad{0.0};
    std::vector<ParameterView<double>> p{{"theta", theta}}, g{{"theta", grad}};
    EXPECT_THROW(finite_difference_check<double>([] { return std::nan(""); }, p, g, 1e-3), NumericalError);
    EXPECT_THROW(finite_difference_check<double>([] { return 1.0; }, p, g, 0.0), ArgumentError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    std::vector<double> theta{1.5, -2.0};
    std::vector<double> grad{0.0, 0.0};
    std::vector<ParameterView<double>> p{{"theta", theta}}, g{{"theta", grad}};
    Adam<double> adam;
    for (int i = 0; i < 5; ++i) adam.step(p, g);
    EXPECT_EQ(theta[0], 1.5);
    EXPECT_EQ(theta[1], -2.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    for (double gval : {0.01, 1.0, 250.0}) {
        std::vector<double> theta{0.0};
        std::vector<double> grad{gval};
        std::vector<ParameterView<double>> p{{"theta", theta}}, g{{"theta", grad}};
        Adam<double> adam;
        adam.step(p, g);
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        EXPECT_NEAR(theta[0], -1e-3 * gval / (gval + 1e-8), 1e-15);
        EXPECT_EQ(adam.steps(), 1);
    }
}

TEST(Adam, ConvergesOnQuadratic) {
    std::vector<double> theta{1.0};
    std::vector<double> grad{0.0};
    std::vector<ParameterView<double>> p{{"theta", theta}}, g{{"theta", grad}};
    Adam<double> adam(AdamConfig{.learning_rate = 0.1});
    for (int i = 0; i < 100; ++i) {
        grad[0] = theta[0];
        adam.step(p, g);
    }
    EXPECT_LT(std::abs(theta[0]), 0.1);
}

TEST(Adam, NanGradientNamesParameter) {
    std::vector<double> a{1.0}, b{1.0, 2.0};
    std::vector<double> ga{0.1}, gb{0.2, std::numeric_limits<double>::quiet_NaN()};
    std::vector<ParameterView<double>> p{{"first", a}, {"second", b}}, g{{"first", ga}, {"second", gb}};
    Adam<double> adam;
    try {
        adam.step(p, g);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("second"), std::string::npos) << e.what();
    }
    EXPECT_EQ(a[0], 1.0);  // nothing applied
}

TEST(Init, GlorotBoundsAndSeeded) {
    DenseLayer<float> a(100, 50, Activation::relu), b(100, 50, Activation::relu);
    std::mt19937_64 r1(9), r2(9);
    a.init_uniform(r1);
    b.init_uniform(r2);
    EXPECT_EQ(a.weights, b.weights);
    const float limit = std::sqrt(6.0f / 150.0f);
    EXPECT_LE(a.weights.cwiseAbs().maxCoeff(), limit);
    EXPECT_GT(a.weights.cwiseAbs().maxCoeff(), 0.9f * limit);
    EXPECT_TRUE(a.bias.isZero());
}

TEST(Network, RejectsIncompatibleLayers) {
    EXPECT_THROW(Network<double>({DenseLayer<double>(3, 4, Activation::relu), DenseLayer<double>(5, 2, Activation::linear)}),
                 DimensionError);
}
