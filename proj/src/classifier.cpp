#include "rebalance/classifier.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "rebalance/error.hpp"
#include "rebalance/random.hpp"

namespace rebalance {

Standardizer Standardizer::fit(const EmbeddingDataset& data) {
    const std::size_t d = data.dim();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    if (data.empty()) return s;
    const auto n = static_cast<double>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto r = data.row(i);
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    for (auto& m : s.mean) m /= n;
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto r = data.row(i);
        for (std::size_t j = 0; j < d; ++j) var[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
    }
    for (std::size_t j = 0; j < d; ++j) {
        const double sd = std::sqrt(var[j] / n);
        s.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    if (x.size() != mean.size()) throw PreconditionError("standardizer: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
    return out;
}

std::vector<double> Classifier::logits(std::span<const double> x) const {
    if (standardizer) return forward(network, standardizer->apply(x));
    return forward(network, x);
}

std::size_t Classifier::predict(std::span<const double> x) const {
    const auto z = logits(x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c)
        if (z[c] > z[best]) best = c;
    return best;
}

double mean_loss(const Classifier& model, const EmbeddingDataset& data) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        total += softmax_cross_entropy(model.logits(data.row(i)), static_cast<std::size_t>(data.label(i))).loss;
    return total / static_cast<double>(data.size());
}

Classifier train_classifier(const EmbeddingDataset& train, const EmbeddingDataset* valid,
                            const ClassifierOptions& options, TrainHistory* history) {
    check_train_config(options.train);
    if (train.empty()) throw PreconditionError("train_classifier: empty training set");
    if (options.hidden_units == 0) throw PreconditionError("train_classifier: hidden_units must be positive");
    if (valid && (valid->dim() != train.dim() || valid->class_count() != train.class_count()))
        throw PreconditionError("train_classifier: validation set shape differs from training set");
    const auto& cfg = options.train;

    const std::size_t widths[] = {train.dim(), options.hidden_units, train.class_count()};
    const Activation acts[] = {Activation::ReLU, Activation::Identity};
    Classifier model{DenseNetwork::glorot(widths, acts, derive_seed(cfg.seed, "classifier-init")),
                     std::nullopt};
    if (options.standardize) model.standardizer = Standardizer::fit(train);

    // Inputs are transformed once up front.
    std::vector<std::vector<double>> inputs(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        inputs[i] = model.standardizer ? model.standardizer->apply(train.row(i))
                                       : std::vector<double>(train.row(i).begin(), train.row(i).end());

    const bool use_valid = valid && !valid->empty();
    Classifier best = model;
    double best_valid = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    TrainHistory local;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "classifier-epoch", epoch));
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            auto grads = Gradients::zeros_like(model.network);
            for (std::size_t b = start; b < stop; ++b) {
                const auto i = order[b];
                const auto trace = forward_trace(model.network, inputs[i]);
                const auto ce = softmax_cross_entropy(trace.output(), static_cast<std::size_t>(train.label(i)));
                epoch_loss += ce.loss;
                grads += backward(model.network, trace, ce.gradient).parameters;
            }
            grads *= 1.0 / static_cast<double>(stop - start);
            apply_sgd(model.network, grads, cfg.learning_rate);
        }
        local.train_loss.push_back(epoch_loss / static_cast<double>(train.size()));

        if (!use_valid) {
            local.best_epoch = epoch;
            continue;
        }
        const double v = mean_loss(model, *valid);
        local.valid_loss.push_back(v);
        if (v < best_valid) {
            best_valid = v;
            best = model;
            local.best_epoch = epoch;
            since_best = 0;
        } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    if (history) *history = std::move(local);
    return use_valid ? best : model;
}

nlohmann::json to_json(const Classifier& model) {
    nlohmann::json doc{{"format", "rebalance-classifier"}, {"version", 1}, {"network", to_json(model.network)}};
    if (model.standardizer)
        doc["standardizer"] = {{"mean", model.standardizer->mean}, {"scale", model.standardizer->scale}};
    else
        doc["standardizer"] = nullptr;
    return doc;
}

Classifier classifier_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "rebalance-classifier")
            throw FormatError("checkpoint is not a classifier document");
        Classifier model{network_from_json(doc.at("network")), std::nullopt};
        const auto& js = doc.at("standardizer");
        if (!js.is_null()) {
            Standardizer s{js.at("mean").get<std::vector<double>>(), js.at("scale").get<std::vector<double>>()};
            if (s.mean.size() != model.input_dim() || s.scale.size() != model.input_dim())
                throw FormatError("standardizer size does not match network input");
            model.standardizer = std::move(s);
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed classifier checkpoint: ") + e.what());
    }
}

void save_classifier(const Classifier& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_json(model).dump() << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

Classifier load_classifier(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    return classifier_from_json(doc);
}

}  // namespace rebalance
