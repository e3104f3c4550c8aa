#include <cmath>
#include <limits>
#include <string>

#include "rebalance/error.hpp"
#include "rebalance/experiment.hpp"
#include "rebalance/random.hpp"

namespace rebalance {

Metrics metrics_from_predictions(std::span<const int> truth, std::span<const std::size_t> predicted,
                                 std::size_t class_count) {
    if (truth.size() != predicted.size()) throw PreconditionError("metrics: truth/prediction length mismatch");
    if (truth.empty()) throw PreconditionError("metrics: empty test set");
    Metrics m;
    m.confusion.assign(class_count, std::vector<std::size_t>(class_count, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = static_cast<std::size_t>(truth[i]);
        if (t >= class_count || predicted[i] >= class_count)
            throw PreconditionError("metrics: label outside class range");
        ++m.confusion[t][predicted[i]];
        if (t == predicted[i]) ++correct;
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

    const double nan = std::numeric_limits<double>::quiet_NaN();
    double f1_sum = 0.0;
    std::size_t f1_classes = 0;
    for (std::size_t c = 0; c < class_count; ++c) {
        std::size_t support = 0, predicted_as = 0;
        for (std::size_t o = 0; o < class_count; ++o) {
            support += m.confusion[c][o];
            predicted_as += m.confusion[o][c];
        }
        const auto tp = static_cast<double>(m.confusion[c][c]);
        const double fn = static_cast<double>(support) - tp;
        const double fp = static_cast<double>(predicted_as) - tp;
        m.per_class_recall.push_back(support > 0 ? tp / static_cast<double>(support) : nan);
        if (support == 0 && predicted_as == 0) {
            m.per_class_f1.push_back(nan);
            continue;
        }
        const double f1 = 2.0 * tp / (2.0 * tp + fp + fn);
        m.per_class_f1.push_back(f1);
        f1_sum += f1;
        ++f1_classes;
    }
    m.macro_f1 = f1_sum / static_cast<double>(f1_classes);
    return m;
}

Metrics evaluate(const Classifier& classifier, const EmbeddingDataset& test) {
    if (test.empty()) throw PreconditionError("evaluate: empty test set");
    if (classifier.input_dim() != test.dim())
        throw PreconditionError("evaluate: classifier expects dimension " + std::to_string(classifier.input_dim()) +
                                ", test set has " + std::to_string(test.dim()));
    if (classifier.class_count() != test.class_count())
        throw PreconditionError("evaluate: classifier has " + std::to_string(classifier.class_count()) +
                                " outputs, test set declares " + std::to_string(test.class_count()) + " classes");
    std::vector<std::size_t> predicted(test.size());
    const auto n = static_cast<std::ptrdiff_t>(test.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        predicted[static_cast<std::size_t>(i)] = classifier.predict(test.row(static_cast<std::size_t>(i)));
    return metrics_from_predictions(test.labels(), predicted, test.class_count());
}

nlohmann::json to_json(const Metrics& m) {
    auto nullable = [](const std::vector<double>& v) {
        auto arr = nlohmann::json::array();
        for (double x : v) arr.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
        return arr;
    };
    return {{"accuracy", m.accuracy},
            {"macro_f1", m.macro_f1},
            {"per_class_recall", nullable(m.per_class_recall)},
            {"per_class_f1", nullable(m.per_class_f1)},
            {"confusion", m.confusion}};
}

EmbeddingDataset make_synthetic_benchmark(const ClusterSpec& spec) {
    if (spec.means.size() < 2) throw PreconditionError("benchmark: need at least 2 classes");
    if (spec.counts.size() != spec.means.size())
        throw PreconditionError("benchmark: one count per class mean is required");
    if (!(spec.variance >= 0.0) || !std::isfinite(spec.variance))
        throw PreconditionError("benchmark: variance must be finite and non-negative");
    const std::size_t dim = spec.means.front().size();
    if (dim == 0) throw PreconditionError("benchmark: dimension must be positive");
    for (std::size_t c = 0; c < spec.means.size(); ++c) {
        if (spec.means[c].size() != dim) throw PreconditionError("benchmark: class means differ in length");
        if (spec.counts[c] == 0) throw PreconditionError("benchmark: class counts must be at least 1");
    }
    const double sd = std::sqrt(spec.variance);
    std::vector<double> values;
    std::vector<int> labels;
    for (std::size_t c = 0; c < spec.means.size(); ++c) {
        Rng rng(derive_seed(spec.seed, "cluster", c));
        for (std::size_t i = 0; i < spec.counts[c]; ++i) {
            for (std::size_t j = 0; j < dim; ++j) values.push_back(spec.means[c][j] + sd * rng.normal());
            labels.push_back(static_cast<int>(c));
        }
    }
    return {dim, spec.means.size(), std::move(values), std::move(labels)};
}

ClusterSpec separated_clusters(std::size_t dim, std::vector<std::size_t> counts, double separation_sd,
                               double variance, std::uint64_t seed) {
    if (dim == 0) throw PreconditionError("benchmark: dimension must be positive");
    const double sd = std::sqrt(variance);
    ClusterSpec spec{{}, std::move(counts), variance, seed};
    for (std::size_t c = 0; c < spec.counts.size(); ++c) {
        std::vector<double> mean(dim, 0.0);
        if (c > 0) mean[(c - 1) % dim] = separation_sd * sd * static_cast<double>((c - 1) / dim + 1);
        spec.means.push_back(std::move(mean));
    }
    return spec;
}

}  // namespace rebalance
