#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rebalance/dataset.hpp"

namespace rebalance {

enum class Metric { Euclidean, Cosine };

/// Euclidean: sqrt(sum (a_j - b_j)^2). Cosine: 1 - a.b / (|a||b|); throws
/// PreconditionError on a zero vector.
double distance(std::span<const double> a, std::span<const double> b, Metric metric);

struct Neighbor {
    std::size_t index;  // dataset index
    double distance;

    bool operator==(const Neighbor&) const = default;
};

/// Ordering used for every neighbor list: ascending distance, then ascending
/// dataset index.
constexpr bool neighbor_less(const Neighbor& a, const Neighbor& b) noexcept {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

/// k nearest pool members of each query, self excluded.
class NeighborTable {
public:
    NeighborTable(std::vector<std::size_t> queries, std::size_t k, std::vector<Neighbor> entries)
        : queries_(std::move(queries)), k_(k), entries_(std::move(entries)) {}

    std::size_t k() const noexcept { return k_; }
    std::size_t size() const noexcept { return queries_.size(); }
    std::span<const std::size_t> queries() const noexcept { return queries_; }
    /// Neighbors of the q-th query (position in queries(), not dataset index).
    std::span<const Neighbor> neighbors(std::size_t q) const noexcept {
        return {entries_.data() + q * k_, k_};
    }

    bool operator==(const NeighborTable&) const = default;

private:
    std::vector<std::size_t> queries_;
    std::size_t k_;
    std::vector<Neighbor> entries_;
};

/// Exact k-NN. Queries run in parallel (OpenMP) against a packed copy of the
/// pool with a bounded per-query selection; output is identical to
/// knn_serial for any thread count.
NeighborTable knn(const EmbeddingDataset& dataset, std::span<const std::size_t> queries,
                  std::span<const std::size_t> pool, std::size_t k, Metric metric);

/// Serial reference: full distance list per query, sorted, truncated to k.
NeighborTable knn_serial(const EmbeddingDataset& dataset, std::span<const std::size_t> queries,
                         std::span<const std::size_t> pool, std::size_t k, Metric metric);

/// Number of the sample's k nearest neighbors (whole dataset, self excluded)
/// whose label differs from `minority_label`.
std::size_t majority_neighbor_count(const EmbeddingDataset& dataset, std::size_t sample,
                                    std::size_t k, Metric metric, int minority_label);

/// majority_neighbor_count for many samples with one search.
std::vector<std::size_t> majority_neighbor_counts(const EmbeddingDataset& dataset,
                                                  std::span<const std::size_t> samples,
                                                  std::size_t k, Metric metric, int minority_label);

}  // namespace rebalance
