#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rebalance/classifier.hpp"
#include "rebalance/dataset.hpp"
#include "rebalance/resample.hpp"

namespace rebalance {

// --- evaluation -------------------------------------------------------------

struct Metrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> per_class_recall;  // NaN for classes absent from the test set
    std::vector<double> per_class_f1;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

/// Metrics from (true, predicted) label pairs over `class_count` classes.
/// Macro-F1 averages over classes that occur in the truth or the predictions;
/// a class that occurs but is never correctly predicted scores 0.
Metrics metrics_from_predictions(std::span<const int> truth, std::span<const std::size_t> predicted,
                                 std::size_t class_count);

/// Argmax predictions on every test row (parallel over rows).
Metrics evaluate(const Classifier& classifier, const EmbeddingDataset& test);

nlohmann::json to_json(const Metrics& m);

// --- synthetic benchmark ------------------------------------------------------

struct ClusterSpec {
    std::vector<std::vector<double>> means;  // one mean per class, each of length dim
    std::vector<std::size_t> counts;         // samples per class
    double variance = 1.0;                   // isotropic covariance variance * I
    std::uint64_t seed = 0;
};

/// Isotropic Gaussian cluster per class, deterministic per seed.
EmbeddingDataset make_synthetic_benchmark(const ClusterSpec& spec);

/// Class 0 at the origin; class c >= 1 at `separation_sd` standard deviations
/// along axis (c - 1) mod dim (further out each time the axes wrap around).
ClusterSpec separated_clusters(std::size_t dim, std::vector<std::size_t> counts, double separation_sd,
                               double variance, std::uint64_t seed);

// --- projection -----------------------------------------------------------

struct ProjectedPoint {
    double x;
    double y;
    int label;
    Origin origin;
};

struct Projection {
    std::vector<ProjectedPoint> points;
    std::vector<std::string> warnings;
};

/// Projection onto the top two principal components of the sample covariance.
/// Each component's largest-magnitude entry is made positive.
Projection project_2d(const EmbeddingDataset& dataset);
void save_projection_csv(const Projection& projection, const std::filesystem::path& path);

// --- protocol -------------------------------------------------------------

/// A sweep arm: "none" (no rebalancing) or a resampler.
struct ArmSpec {
    std::string name;  // "none" or a method name
    std::optional<ResamplerConfig> resampler;
};

ArmSpec baseline_arm();
ArmSpec resampler_arm(ResamplerConfig config);

struct ProtocolOptions {
    SplitSpec split{0.8, 0.1, 0.1, 0, true};
    ClassifierOptions classifier;
};

struct CellKey {
    std::string method;
    std::size_t size = 0;
    std::size_t fold = 0;

    auto operator<=>(const CellKey&) const = default;
};

struct CellResult {
    CellKey key;
    bool ok = false;
    std::string error;
    std::map<int, std::size_t> train_histogram;  // after rebalancing
    std::size_t synthetic_in_eval = 0;           // synthetic rows found in valid + test
    Metrics metrics;
    double wall_time_s = 0.0;
    std::vector<std::string> warnings;
};

/// Seeds used by one cell; all derived from a fold seed so arms within a
/// fold share split, downsample and initialization.
struct CellSeeds {
    std::uint64_t split;
    std::uint64_t downsample;
    std::uint64_t resample;
    std::uint64_t classifier;
};
CellSeeds cell_seeds(std::uint64_t fold_seed, std::size_t size);

/// downsample each minority class of `train` to `size` -> rebalance with the
/// arm -> train on it with `valid` for early stopping -> evaluate on `test`.
/// Never throws for a method failure; the cell is marked failed instead.
CellResult run_on_partitions(const EmbeddingDataset& train, const EmbeddingDataset& valid,
                             const EmbeddingDataset& test, const std::vector<int>& minority_classes,
                             std::size_t size, const ArmSpec& arm, const CellSeeds& seeds,
                             const ProtocolOptions& options);

/// Stratified split of `dataset` under seeds.split, then run_on_partitions.
CellResult run_single(const EmbeddingDataset& dataset, const std::vector<int>& minority_classes,
                      std::size_t size, const ArmSpec& arm, std::uint64_t fold_seed,
                      const ProtocolOptions& options);

struct SweepSpec {
    std::vector<int> minority_classes{1};
    std::vector<std::size_t> sizes{8, 16, 32, 64, 128, 256, 512, 1024};
    std::vector<ArmSpec> arms;  // baseline is added if missing
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    ProtocolOptions protocol;
};

/// Validates sizes (strictly increasing, >= 2), folds and classes; puts the
/// baseline arm first.
SweepSpec normalize_sweep(SweepSpec spec);
SweepSpec sweep_spec_from_json(const nlohmann::json& doc);

struct Aggregate {
    std::string method;
    std::size_t size = 0;
    std::size_t ok_folds = 0;
    double mean_accuracy = 0.0;
    double sd_accuracy = 0.0;
    double mean_macro_f1 = 0.0;
    double sd_macro_f1 = 0.0;
};

struct ExperimentReport {
    SweepSpec spec;
    std::uint64_t dataset_fingerprint = 0;
    std::vector<CellResult> cells;  // ordered by (arm order, size, fold)
    std::vector<Aggregate> aggregates;

    bool all_ok() const;
};

/// Full (arm x size x fold) grid. Cells run on up to `jobs` threads; results
/// do not depend on `jobs`.
ExperimentReport run_sweep(const EmbeddingDataset& dataset, const SweepSpec& spec, std::size_t jobs = 1);

/// Mean and sample standard deviation over ok folds.
std::vector<Aggregate> aggregate_cells(const std::vector<CellResult>& cells, const std::vector<ArmSpec>& arms,
                                       const std::vector<std::size_t>& sizes);

nlohmann::json to_json(const ExperimentReport& report);
/// Checks a report document against schema_version 1; returns the problems
/// found (empty when valid).
std::vector<std::string> validate_report(const nlohmann::json& doc);

}  // namespace rebalance
