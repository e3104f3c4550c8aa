#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rebalance/dataset.hpp"
#include "rebalance/neighbors.hpp"
#include "rebalance/vae.hpp"

namespace rebalance {

enum class Method { Smote, BorderlineSmote, Adasyn, RandomOversample, Vae };

std::string_view method_name(Method m) noexcept;
/// Accepts smote | borderline | adasyn | ros | vae.
Method method_from_name(std::string_view name);
Origin origin_for(Method m) noexcept;

struct ResamplerConfig {
    Method method = Method::Smote;
    std::size_t k = 5;
    std::uint64_t seed = 0;
    /// Per-class target counts; classes not listed are raised to N_maj.
    std::optional<std::map<int, std::size_t>> target_per_class;
    Metric metric = Metric::Euclidean;
    /// Borderline-SMOTE only: a class without DANGER samples is oversampled
    /// with plain SMOTE (and a warning) instead of failing.
    bool borderline_fallback = false;
    VaeOptions vae;
};

/// One record per synthetic sample.
struct Provenance {
    Method method;
    int label;
    std::size_t output_index;                 // row in the returned dataset
    std::optional<std::size_t> base_index;    // input row it was built from
    std::optional<std::size_t> neighbor_index;
    std::optional<double> lambda;
    std::uint64_t seed;
};

struct ResampleResult {
    EmbeddingDataset dataset;
    std::vector<Provenance> provenance;
    std::vector<std::string> warnings;
};

/// Per-base quotas: base_indices[i] receives quotas[i] synthetic samples.
struct ResamplePlan {
    std::vector<std::size_t> base_indices;
    std::vector<std::size_t> quotas;
    std::size_t total = 0;
};

/// Round-robin plan: `total` spread over `bases` so quotas differ by at most 1.
ResamplePlan round_robin_plan(std::span<const std::size_t> bases, std::size_t total);

struct DifficultyScores {
    std::vector<std::size_t> sample_indices;     // minority samples, ascending
    std::vector<std::size_t> majority_neighbors; // k_i
    std::vector<double> raw;                     // r_i = k_i / k
    std::vector<double> normalized;              // sums to 1
    std::size_t k = 0;
};

enum class BorderlineKind { Safe, Danger, Noise };

/// DANGER when ceil(k/2) <= k_i < k, NOISE when k_i == k, SAFE otherwise.
BorderlineKind classify_borderline(std::size_t majority_neighbors, std::size_t k) noexcept;

/// f_i + lambda (f_nn - f_i), coordinate-wise.
std::vector<double> interpolate(std::span<const double> f_i, std::span<const double> f_nn, double lambda);

/// Target count per class: config override, else N_maj. Throws when a target
/// is below the current count.
std::map<int, std::size_t> resolve_targets(const EmbeddingDataset& dataset, const ResamplerConfig& config);

/// ADASYN difficulty scores for class `label` against everything else.
DifficultyScores adasyn_scores(const EmbeddingDataset& dataset, int label, const ResamplerConfig& config);

/// Largest-remainder quotas proportional to the normalized scores.
ResamplePlan adasyn_plan(const DifficultyScores& scores, std::size_t total);

/// Borderline kinds of every member of class `label` (ascending index order).
std::vector<BorderlineKind> borderline_kinds(const EmbeddingDataset& dataset, int label,
                                             const ResamplerConfig& config);

ResampleResult smote(const EmbeddingDataset& dataset, const ResamplerConfig& config);
ResampleResult borderline_smote(const EmbeddingDataset& dataset, const ResamplerConfig& config);
ResampleResult adasyn(const EmbeddingDataset& dataset, const ResamplerConfig& config);
ResampleResult random_oversample(const EmbeddingDataset& dataset, const ResamplerConfig& config);
/// One VAE per class with a deficit, trained on that class's real samples.
ResampleResult vae_oversample(const EmbeddingDataset& dataset, const ResamplerConfig& config);

/// Dispatches on config.method. Each non-majority class is treated one-vs-rest
/// and raised to its target; real samples come first, untouched, followed by
/// synthetic samples grouped by class.
ResampleResult balance(const EmbeddingDataset& dataset, const ResamplerConfig& config);

nlohmann::json to_json(const Provenance& record);
nlohmann::json provenance_to_json(std::span<const Provenance> records);
void save_provenance(std::span<const Provenance> records, const std::filesystem::path& path);
nlohmann::json to_json(const ResamplerConfig& config);
/// Reads {"method": ..., "k": ..., "seed": ..., "metric": ..., "latent_dim": ...}.
ResamplerConfig resampler_config_from_json(const nlohmann::json& doc, ResamplerConfig defaults = {});

}  // namespace rebalance
