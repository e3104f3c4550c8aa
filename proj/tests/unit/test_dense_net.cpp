#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rebalance/classifier.hpp"
#include "rebalance/dense_net.hpp"
#include "rebalance/error.hpp"
#include "rebalance/random.hpp"

using namespace rebalance;

namespace {

DenseNetwork single(std::vector<double> w, std::vector<double> b, std::size_t in, std::size_t out, Activation act) {
    return DenseNetwork({DenseLayer{in, out, std::move(w), std::move(b), act}});
}

double ce_loss(const DenseNetwork& net, std::span<const double> x, std::size_t label) {
    return softmax_cross_entropy(forward(net, x), label).loss;
}

}  // namespace

TEST(Forward, ZeroAndIdentityNets) {
    const auto zero = single(std::vector<double>(6, 0.0), {0, 0}, 3, 2, Activation::ReLU);
    const double x[] = {1.5, -2.0, 7.0};
    EXPECT_EQ(forward(zero, x), (std::vector<double>{0.0, 0.0}));
    const auto id = single({1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}, 3, 3, Activation::Identity);
    EXPECT_EQ(forward(id, x), (std::vector<double>{1.5, -2.0, 7.0}));
}

TEST(Forward, ScalarReluExample) {
    const double x[] = {3.0};
    EXPECT_EQ(forward(single({2.0}, {1.0}, 1, 1, Activation::ReLU), x), (std::vector<double>{7.0}));
}

TEST(Forward, RejectsShapeMismatch) {
    const auto net = single({1, 2}, {0}, 2, 1, Activation::Identity);
    const double x[] = {1.0};
    EXPECT_THROW(forward(net, x), PreconditionError);
    EXPECT_THROW(single({1, 2, 3}, {0}, 2, 1, Activation::Identity), PreconditionError);
    DenseLayer a{2, 3, std::vector<double>(6), std::vector<double>(3), Activation::ReLU};
    DenseLayer b{2, 1, std::vector<double>(2), std::vector<double>(1), Activation::ReLU};
    EXPECT_THROW(DenseNetwork({a, b}), PreconditionError);
}

TEST(Backward, MatchesFiniteDifferences) {
    Rng rng(1);
    const Activation kinds[] = {Activation::ReLU, Activation::Softplus, Activation::Identity};
    for (int t = 0; t < 25; ++t) {
        const std::size_t d = 1 + rng.index(5), h = 1 + rng.index(8), c = 2 + rng.index(3);
        const std::size_t widths[] = {d, h, c};
        const Activation acts[] = {kinds[t % 3], Activation::Identity};
        auto net = DenseNetwork::glorot(widths, acts, 100 + t);
        std::vector<double> x(d);
        for (auto& v : x) v = rng.normal();
        const std::size_t label = rng.index(c);

        const auto trace = forward_trace(net, x);
        const auto ce = softmax_cross_entropy(trace.output(), label);
        const auto grads = backward(net, trace, ce.gradient).parameters;
        for (std::size_t l = 0; l < net.depth(); ++l) {
            auto& layer = net.layer(l);
            for (std::size_t p = 0; p < layer.weights.size(); ++p) {
                const double fd = oracle::central_difference([&] { return ce_loss(net, x, label); }, layer.weights[p]);
                const double g = grads.layers[l].weights[p];
                EXPECT_LT(std::abs(g - fd) / std::max(1.0, std::abs(g)), 1e-4) << "layer " << l << " w" << p;
            }
            for (std::size_t p = 0; p < layer.bias.size(); ++p) {
                const double fd = oracle::central_difference([&] { return ce_loss(net, x, label); }, layer.bias[p]);
                const double g = grads.layers[l].bias[p];
                EXPECT_LT(std::abs(g - fd) / std::max(1.0, std::abs(g)), 1e-4) << "layer " << l << " b" << p;
            }
        }
    }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    const std::size_t widths[] = {3, 4, 2};
    const Activation acts[] = {Activation::ReLU, Activation::Identity};
    const auto net = DenseNetwork::glorot(widths, acts, 5);
    const double x[] = {0.1, -0.2, 0.3};
    const double up[] = {0.0, 0.0};
    const auto r = backward(net, forward_trace(net, x), up);
    for (const auto& l : r.parameters.layers) {
        for (double g : l.weights) EXPECT_EQ(g, 0.0);
        for (double g : l.bias) EXPECT_EQ(g, 0.0);
    }
}

TEST(Backward, NegativeReluPreactivationBlocksGradient) {
    // Hidden unit 0 has pre-activation -1, unit 1 has +1.
    DenseLayer hidden{1, 2, {1.0, 1.0}, {-2.0, 0.0}, Activation::ReLU};
    DenseLayer out{2, 1, {1.0, 1.0}, {0.0}, Activation::Identity};
    const DenseNetwork net({hidden, out});
    const double x[] = {1.0};
    const double up[] = {1.0};
    const auto r = backward(net, forward_trace(net, x), up);
    EXPECT_EQ(r.parameters.layers[0].weights[0], 0.0);
    EXPECT_EQ(r.parameters.layers[0].bias[0], 0.0);
    EXPECT_EQ(r.parameters.layers[0].weights[1], 1.0);
}

TEST(Sgd, StepArithmetic) {
    const auto net = single({1.0}, {0.0}, 1, 1, Activation::Identity);
    Gradients g = Gradients::zeros_like(net);
    EXPECT_EQ(sgd_step(net, g, 0.1), net);
    g.layers[0].weights[0] = 0.5;
    EXPECT_DOUBLE_EQ(sgd_step(net, g, 0.1).layers()[0].weights[0], 0.95);
}

TEST(Sgd, RejectsNonFiniteResult) {
    auto net = single({1.0}, {0.0}, 1, 1, Activation::Identity);
    Gradients g = Gradients::zeros_like(net);
    g.layers[0].weights[0] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(apply_sgd(net, g, 0.1), PreconditionError);
}

TEST(Sgd, QuadraticLossDecreasesMonotonically) {
    // L(w) = 0.5 * (w*x - y)^2 with x = 2, y = 3; gradient through backward().
    auto net = single({-4.0}, {0.0}, 1, 1, Activation::Identity);
    const double x[] = {2.0};
    double last = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 100; ++step) {
        const auto trace = forward_trace(net, x);
        const double r = trace.output()[0] - 3.0;
        const double loss = 0.5 * r * r;
        EXPECT_LE(loss, last);
        last = loss;
        const double up[] = {r};
        apply_sgd(net, backward(net, trace, up).parameters, 0.05);
    }
    EXPECT_LT(last, 1e-3);
}

TEST(SoftmaxCe, UniformLogitsGiveLogC) {
    for (std::size_t c : {2u, 4u, 10u}) {
        const std::vector<double> z(c, 0.3);
        EXPECT_NEAR(softmax_cross_entropy(z, 1).loss, std::log(static_cast<double>(c)), 1e-12);
    }
    const double z4[] = {0, 0, 0, 0};
    EXPECT_NEAR(softmax_cross_entropy(z4, 0).loss, 1.3862943611198906, 1e-12);
}

TEST(SoftmaxCe, StableForLargeLogitsAndGradientSumsToZero) {
    const double z[] = {1000.0, 0.0};
    const auto r = softmax_cross_entropy(z, 0);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_NEAR(r.loss, 0.0, 1e-12);
    const auto wrong = softmax_cross_entropy(z, 1);
    EXPECT_NEAR(wrong.loss, 1000.0, 1e-9);
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> logits(2 + rng.index(6));
        for (auto& v : logits) v = 10.0 * rng.normal();
        const auto g = softmax_cross_entropy(logits, rng.index(logits.size())).gradient;
        double s = 0.0;
        for (double v : g) s += v;
        EXPECT_NEAR(s, 0.0, 1e-12);
    }
    EXPECT_THROW(softmax_cross_entropy(z, 2), PreconditionError);
}

TEST(Checkpoint, JsonRoundTripIsExact) {
    const std::size_t widths[] = {4, 7, 3};
    const Activation acts[] = {Activation::ReLU, Activation::Identity};
    const auto net = DenseNetwork::glorot(widths, acts, 9);
    const auto back = network_from_json(nlohmann::json::parse(to_json(net).dump()));
    EXPECT_EQ(back, net);
    EXPECT_THROW(network_from_json(nlohmann::json{{"format", "other"}}), FormatError);
}

TEST(Classifier, LearnsSeparableClustersAndRoundTrips) {
    Rng rng(3);
    std::vector<double> v;
    std::vector<int> l;
    for (int i = 0; i < 200; ++i) {
        const int c = i % 2;
        v.push_back(rng.normal() + 4.0 * c);
        v.push_back(rng.normal());
        l.push_back(c);
    }
    const EmbeddingDataset train(2, 2, v, l);
    ClassifierOptions opts;
    opts.hidden_units = 16;
    opts.train.max_epochs = 50;
    opts.standardize = true;
    TrainHistory h;
    const auto model = train_classifier(train, &train, opts, &h);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < train.size(); ++i)
        correct += model.predict(train.row(i)) == static_cast<std::size_t>(train.label(i)) ? 1 : 0;
    EXPECT_GT(correct, 190u);
    EXPECT_LT(h.train_loss.back(), h.train_loss.front());

    const auto back = classifier_from_json(nlohmann::json::parse(to_json(model).dump()));
    EXPECT_EQ(back, model);
    EXPECT_EQ(train_classifier(train, &train, opts), model);
}

TEST(Classifier, RejectsBadConfig) {
    const EmbeddingDataset ds(1, 2, {0.0, 1.0}, {0, 1});
    ClassifierOptions opts;
    opts.train.batch_size = 0;
    EXPECT_THROW(train_classifier(ds, nullptr, opts), PreconditionError);
    opts = {};
    opts.train.learning_rate = -1.0;
    EXPECT_THROW(train_classifier(ds, nullptr, opts), PreconditionError);
}
