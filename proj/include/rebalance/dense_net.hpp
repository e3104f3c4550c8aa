#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

namespace rebalance {

enum class Activation { ReLU, Identity, Softplus };

/// Fully connected layer; `weights` is out x in, row-major.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;
    std::vector<double> bias;
    Activation activation = Activation::Identity;

    bool operator==(const DenseLayer&) const = default;
};

/// Feed-forward stack of dense layers. Construction checks that shapes chain.
class DenseNetwork {
public:
    DenseNetwork() = default;
    explicit DenseNetwork(std::vector<DenseLayer> layers);

    /// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases, seeded.
    /// `widths` has one more entry than `activations`.
    static DenseNetwork glorot(std::span<const std::size_t> widths,
                               std::span<const Activation> activations, std::uint64_t seed);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t parameter_count() const noexcept;

    std::span<const DenseLayer> layers() const noexcept { return layers_; }
    /// Mutable access for optimizers and perturbation tests. Shapes must be
    /// left alone.
    DenseLayer& layer(std::size_t i) { return layers_.at(i); }

    bool operator==(const DenseNetwork&) const = default;

private:
    std::vector<DenseLayer> layers_;
};

/// Per-layer activations kept for the backward pass. `activations[0]` is the
/// input, `activations[l + 1]` the output of layer l; `pre_activations[l]` is
/// layer l's affine output.
struct ForwardTrace {
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre_activations;

    std::span<const double> output() const { return activations.back(); }
};

struct LayerGradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

/// Gradients shaped like a network's parameters.
struct Gradients {
    std::vector<LayerGradient> layers;

    static Gradients zeros_like(const DenseNetwork& net);
    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double factor);
};

struct BackwardResult {
    Gradients parameters;
    std::vector<double> input;
};

std::vector<double> forward(const DenseNetwork& net, std::span<const double> input);
ForwardTrace forward_trace(const DenseNetwork& net, std::span<const double> input);

/// Reverse-mode pass: given dLoss/dOutput, returns dLoss/dParameters and
/// dLoss/dInput.
BackwardResult backward(const DenseNetwork& net, const ForwardTrace& trace,
                        std::span<const double> upstream);

/// theta <- theta - learning_rate * g. Throws PreconditionError naming the
/// layer when a gradient is non-finite.
DenseNetwork sgd_step(DenseNetwork net, const Gradients& gradients, double learning_rate);
/// In-place variant used by the training loops.
void apply_sgd(DenseNetwork& net, const Gradients& gradients, double learning_rate);

struct LossAndGradient {
    double loss;
    std::vector<double> gradient;
};

/// -log softmax(logits)[label] via log-sum-exp, with gradient
/// softmax(logits) - one_hot(label).
LossAndGradient softmax_cross_entropy(std::span<const double> logits, std::size_t label);

/// Hyper-parameters shared by every gradient-trained model.
struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    std::uint64_t seed = 0;
    std::size_t early_stop_patience = 10;  // 0 disables early stopping
};

void check_train_config(const TrainConfig& config);

nlohmann::json to_json(const DenseNetwork& net);
DenseNetwork network_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig defaults = {});

}  // namespace rebalance
