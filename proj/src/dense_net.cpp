#include "rebalance/dense_net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rebalance/error.hpp"
#include "rebalance/random.hpp"

namespace rebalance {

namespace {

double activate(Activation act, double x) {
    switch (act) {
        case Activation::ReLU: return x > 0.0 ? x : 0.0;
        case Activation::Identity: return x;
        case Activation::Softplus: return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }
    return x;
}

double activate_derivative(Activation act, double pre) {
    switch (act) {
        case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Identity: return 1.0;
        case Activation::Softplus: return 1.0 / (1.0 + std::exp(-pre));
    }
    return 1.0;
}

const char* activation_name(Activation act) {
    switch (act) {
        case Activation::ReLU: return "relu";
        case Activation::Identity: return "identity";
        case Activation::Softplus: return "softplus";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "identity") return Activation::Identity;
    if (name == "softplus") return Activation::Softplus;
    throw FormatError("unknown activation '" + name + "'");
}

// out = W x + b
void affine(const DenseLayer& layer, std::span<const double> x, std::vector<double>& out) {
    out.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t o = 0; o < layer.out; ++o) {
        const double* w = layer.weights.data() + o * layer.in;
        double acc = 0.0;
        for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * x[i];
        out[o] += acc;
    }
}

}  // namespace

DenseNetwork::DenseNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw PreconditionError("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.in == 0 || layer.out == 0)
            throw PreconditionError("layer " + std::to_string(l) + " has a zero dimension");
        if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out)
            throw PreconditionError("layer " + std::to_string(l) + " parameter sizes do not match " +
                                    std::to_string(layer.out) + "x" + std::to_string(layer.in));
        if (l > 0 && layers_[l - 1].out != layer.in)
            throw PreconditionError("layer " + std::to_string(l) + " input " + std::to_string(layer.in) +
                                    " does not chain with previous output " +
                                    std::to_string(layers_[l - 1].out));
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
            !std::all_of(layer.bias.begin(), layer.bias.end(), finite))
            throw PreconditionError("layer " + std::to_string(l) + " has non-finite parameters");
    }
}

DenseNetwork DenseNetwork::glorot(std::span<const std::size_t> widths,
                                  std::span<const Activation> activations, std::uint64_t seed) {
    if (widths.size() != activations.size() + 1)
        throw PreconditionError("glorot: need one more width than activations");
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < activations.size(); ++l) {
        DenseLayer layer{widths[l], widths[l + 1], {}, {}, activations[l]};
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        layer.weights.resize(layer.in * layer.out);
        for (auto& w : layer.weights) w = (2.0 * rng.uniform() - 1.0) * limit;
        layer.bias.assign(layer.out, 0.0);
        layers.push_back(std::move(layer));
    }
    return DenseNetwork(std::move(layers));
}

std::size_t DenseNetwork::input_dim() const {
    if (layers_.empty()) throw PreconditionError("empty network");
    return layers_.front().in;
}

std::size_t DenseNetwork::output_dim() const {
    if (layers_.empty()) throw PreconditionError("empty network");
    return layers_.back().out;
}

std::size_t DenseNetwork::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

Gradients Gradients::zeros_like(const DenseNetwork& net) {
    Gradients g;
    for (const auto& l : net.layers())
        g.layers.push_back({std::vector<double>(l.weights.size(), 0.0), std::vector<double>(l.bias.size(), 0.0)});
    return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
    if (other.layers.size() != layers.size()) throw PreconditionError("gradient shape mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& a = layers[l];
        const auto& b = other.layers[l];
        if (a.weights.size() != b.weights.size() || a.bias.size() != b.bias.size())
            throw PreconditionError("gradient shape mismatch at layer " + std::to_string(l));
        for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += b.weights[i];
        for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += b.bias[i];
    }
    return *this;
}

Gradients& Gradients::operator*=(double factor) {
    for (auto& l : layers) {
        for (auto& w : l.weights) w *= factor;
        for (auto& b : l.bias) b *= factor;
    }
    return *this;
}

ForwardTrace forward_trace(const DenseNetwork& net, std::span<const double> input) {
    if (input.size() != net.input_dim())
        throw PreconditionError("forward: input has " + std::to_string(input.size()) +
                                " values, network expects " + std::to_string(net.input_dim()));
    ForwardTrace trace;
    trace.activations.reserve(net.depth() + 1);
    trace.pre_activations.reserve(net.depth());
    trace.activations.emplace_back(input.begin(), input.end());
    for (const auto& layer : net.layers()) {
        std::vector<double> pre;
        affine(layer, trace.activations.back(), pre);
        std::vector<double> post(pre.size());
        std::transform(pre.begin(), pre.end(), post.begin(),
                       [&](double z) { return activate(layer.activation, z); });
        trace.pre_activations.push_back(std::move(pre));
        trace.activations.push_back(std::move(post));
    }
    return trace;
}

std::vector<double> forward(const DenseNetwork& net, std::span<const double> input) {
    if (input.size() != net.input_dim())
        throw PreconditionError("forward: input has " + std::to_string(input.size()) +
                                " values, network expects " + std::to_string(net.input_dim()));
    std::vector<double> x(input.begin(), input.end());
    std::vector<double> pre;
    for (const auto& layer : net.layers()) {
        affine(layer, x, pre);
        x.resize(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) x[i] = activate(layer.activation, pre[i]);
    }
    return x;
}

BackwardResult backward(const DenseNetwork& net, const ForwardTrace& trace,
                        std::span<const double> upstream) {
    if (trace.activations.size() != net.depth() + 1 || trace.pre_activations.size() != net.depth())
        throw PreconditionError("backward: trace does not match network depth");
    if (upstream.size() != net.output_dim())
        throw PreconditionError("backward: upstream gradient has " + std::to_string(upstream.size()) +
                                " values, network output is " + std::to_string(net.output_dim()));

    BackwardResult result{Gradients::zeros_like(net), {}};
    std::vector<double> delta(upstream.begin(), upstream.end());
    for (std::size_t l = net.depth(); l-- > 0;) {
        const auto& layer = net.layers()[l];
        const auto& pre = trace.pre_activations[l];
        const auto& x = trace.activations[l];
        for (std::size_t o = 0; o < layer.out; ++o) delta[o] *= activate_derivative(layer.activation, pre[o]);

        auto& g = result.parameters.layers[l];
        for (std::size_t o = 0; o < layer.out; ++o) {
            g.bias[o] = delta[o];
            double* gw = g.weights.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) gw[i] = delta[o] * x[i];
        }
        std::vector<double> below(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* w = layer.weights.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) below[i] += w[i] * delta[o];
        }
        delta = std::move(below);
    }
    result.input = std::move(delta);
    return result;
}

void apply_sgd(DenseNetwork& net, const Gradients& gradients, double learning_rate) {
    if (gradients.layers.size() != net.depth()) throw PreconditionError("sgd: gradient depth mismatch");
    for (std::size_t l = 0; l < net.depth(); ++l) {
        const auto& g = gradients.layers[l];
        const auto& layer = net.layers()[l];
        if (g.weights.size() != layer.weights.size() || g.bias.size() != layer.bias.size())
            throw PreconditionError("sgd: gradient shape mismatch at layer " + std::to_string(l));
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(g.weights.begin(), g.weights.end(), finite) ||
            !std::all_of(g.bias.begin(), g.bias.end(), finite))
            throw PreconditionError("sgd: non-finite gradient in layer " + std::to_string(l));
    }
    for (std::size_t l = 0; l < net.depth(); ++l) {
        auto& layer = net.layer(l);
        const auto& g = gradients.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= learning_rate * g.weights[i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= learning_rate * g.bias[i];
    }
}

DenseNetwork sgd_step(DenseNetwork net, const Gradients& gradients, double learning_rate) {
    apply_sgd(net, gradients, learning_rate);
    return net;
}

LossAndGradient softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size())
        throw PreconditionError("softmax_cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(logits.size()) + " logits");
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - peak);
    const double log_sum = peak + std::log(sum);
    LossAndGradient out{log_sum - logits[label], std::vector<double>(logits.size())};
    for (std::size_t c = 0; c < logits.size(); ++c) out.gradient[c] = std::exp(logits[c] - log_sum);
    out.gradient[label] -= 1.0;
    return out;
}

void check_train_config(const TrainConfig& config) {
    if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate))
        throw PreconditionError("learning_rate must be positive");
    if (config.batch_size == 0) throw PreconditionError("batch_size must be at least 1");
    if (config.max_epochs == 0) throw PreconditionError("max_epochs must be at least 1");
}

nlohmann::json to_json(const DenseNetwork& net) {
    auto layers = nlohmann::json::array();
    for (const auto& l : net.layers())
        layers.push_back({{"in", l.in},
                          {"out", l.out},
                          {"activation", activation_name(l.activation)},
                          {"weights", l.weights},
                          {"bias", l.bias}});
    return {{"format", "dense-net"}, {"version", 1}, {"layers", std::move(layers)}};
}

DenseNetwork network_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "dense-net")
            throw FormatError("checkpoint is not a dense-net document");
        std::vector<DenseLayer> layers;
        for (const auto& jl : doc.at("layers"))
            layers.push_back({jl.at("in").get<std::size_t>(), jl.at("out").get<std::size_t>(),
                              jl.at("weights").get<std::vector<double>>(),
                              jl.at("bias").get<std::vector<double>>(),
                              activation_from_name(jl.at("activation").get<std::string>())});
        return DenseNetwork(std::move(layers));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed network checkpoint: ") + e.what());
    } catch (const PreconditionError& e) {
        throw FormatError(std::string("invalid network checkpoint: ") + e.what());
    }
}

nlohmann::json to_json(const TrainConfig& config) {
    return {{"learning_rate", config.learning_rate},
            {"batch_size", config.batch_size},
            {"max_epochs", config.max_epochs},
            {"seed", config.seed},
            {"early_stop_patience", config.early_stop_patience}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig defaults) {
    auto out = defaults;
    out.learning_rate = doc.value("learning_rate", out.learning_rate);
    out.batch_size = doc.value("batch_size", out.batch_size);
    out.max_epochs = doc.value("max_epochs", out.max_epochs);
    out.seed = doc.value("seed", out.seed);
    out.early_stop_patience = doc.value("early_stop_patience", out.early_stop_patience);
    check_train_config(out);
    return out;
}

}  // namespace rebalance
