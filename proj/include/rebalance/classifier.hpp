#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rebalance/dataset.hpp"
#include "rebalance/dense_net.hpp"

namespace rebalance {

/// Per-feature (x - mean) / scale, fitted on a training split.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const EmbeddingDataset& data);
    std::vector<double> apply(std::span<const double> x) const;

    bool operator==(const Standardizer&) const = default;
};

/// Single-hidden-layer MLP over embeddings plus its optional input transform.
struct Classifier {
    DenseNetwork network;
    std::optional<Standardizer> standardizer;

    std::size_t input_dim() const { return network.input_dim(); }
    std::size_t class_count() const { return network.output_dim(); }
    std::vector<double> logits(std::span<const double> x) const;
    /// argmax of the logits; ties go to the lowest class id.
    std::size_t predict(std::span<const double> x) const;

    bool operator==(const Classifier&) const = default;
};

struct ClassifierOptions {
    std::size_t hidden_units = 128;
    bool standardize = false;
    TrainConfig train;
};

struct TrainHistory {
    std::vector<double> train_loss;  // mean per epoch
    std::vector<double> valid_loss;  // empty without a validation set
    std::size_t best_epoch = 0;
};

/// Mini-batch SGD on mean softmax cross-entropy. With a non-empty validation
/// set, keeps the parameters with the lowest validation loss and stops after
/// `early_stop_patience` epochs without improvement.
Classifier train_classifier(const EmbeddingDataset& train, const EmbeddingDataset* valid,
                            const ClassifierOptions& options, TrainHistory* history = nullptr);

/// Mean cross-entropy of the classifier over a dataset.
double mean_loss(const Classifier& model, const EmbeddingDataset& data);

nlohmann::json to_json(const Classifier& model);
Classifier classifier_from_json(const nlohmann::json& doc);
void save_classifier(const Classifier& model, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace rebalance
