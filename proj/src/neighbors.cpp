#include "rebalance/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rebalance/error.hpp"

namespace rebalance {

namespace {

constexpr std::size_t kQueryBlock = 16;
constexpr std::size_t kPoolTile = 512;

// Both kernels go through this so their distances agree bit for bit.
inline double pair_distance(const double* a, const double* b, std::size_t dim, Metric metric) {
    if (metric == Metric::Euclidean) {
        double sum = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double diff = a[j] - b[j];
            sum += diff * diff;
        }
        return std::sqrt(sum);
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        dot += a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
    }
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

bool is_zero(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

void validate(const EmbeddingDataset& dataset, std::span<const std::size_t> queries,
              std::span<const std::size_t> pool, std::size_t k, Metric metric) {
    if (k == 0) throw PreconditionError("knn: k must be positive");
    std::vector<bool> in_pool(dataset.size(), false);
    for (auto p : pool) {
        if (p >= dataset.size())
            throw PreconditionError("knn: pool index " + std::to_string(p) + " out of range");
        if (in_pool[p]) throw PreconditionError("knn: duplicate pool index " + std::to_string(p));
        in_pool[p] = true;
        if (metric == Metric::Cosine && is_zero(dataset.row(p)))
            throw PreconditionError("knn: zero vector at index " + std::to_string(p) +
                                    " under cosine metric");
    }
    for (auto q : queries) {
        if (q >= dataset.size())
            throw PreconditionError("knn: query index " + std::to_string(q) + " out of range");
        const std::size_t available = pool.size() - (in_pool[q] ? 1 : 0);
        if (k > available)
            throw PreconditionError("knn: k=" + std::to_string(k) + " exceeds the " +
                                    std::to_string(available) + " pool members available to query " +
                                    std::to_string(q));
        if (metric == Metric::Cosine && is_zero(dataset.row(q)))
            throw PreconditionError("knn: zero vector at index " + std::to_string(q) +
                                    " under cosine metric");
    }
}

}  // namespace

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
    if (a.size() != b.size()) throw PreconditionError("distance: dimension mismatch");
    if (metric == Metric::Cosine && (is_zero(a) || is_zero(b)))
        throw PreconditionError("distance: cosine undefined for a zero vector");
    return pair_distance(a.data(), b.data(), a.size(), metric);
}

NeighborTable knn_serial(const EmbeddingDataset& dataset, std::span<const std::size_t> queries,
                         std::span<const std::size_t> pool, std::size_t k, Metric metric) {
    validate(dataset, queries, pool, k, metric);
    const std::size_t dim = dataset.dim();
    std::vector<Neighbor> entries;
    entries.reserve(queries.size() * k);
    std::vector<Neighbor> all;
    for (auto q : queries) {
        all.clear();
        const double* qv = dataset.row(q).data();
        for (auto p : pool) {
            if (p == q) continue;
            all.push_back({p, pair_distance(qv, dataset.row(p).data(), dim, metric)});
        }
        std::sort(all.begin(), all.end(), neighbor_less);
        entries.insert(entries.end(), all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return {std::vector<std::size_t>(queries.begin(), queries.end()), k, std::move(entries)};
}

NeighborTable knn(const EmbeddingDataset& dataset, std::span<const std::size_t> queries,
                  std::span<const std::size_t> pool, std::size_t k, Metric metric) {
    validate(dataset, queries, pool, k, metric);
    const std::size_t dim = dataset.dim();
    const std::size_t n_pool = pool.size();
    const std::size_t n_query = queries.size();

    // Packed, contiguous copy of the pool rows.
    std::vector<double> packed(n_pool * dim);
    for (std::size_t p = 0; p < n_pool; ++p) {
        auto r = dataset.row(pool[p]);
        std::copy(r.begin(), r.end(), packed.begin() + static_cast<std::ptrdiff_t>(p * dim));
    }

    std::vector<Neighbor> entries(n_query * k);
    const auto n_blocks = static_cast<std::ptrdiff_t>((n_query + kQueryBlock - 1) / kQueryBlock);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t block = 0; block < n_blocks; ++block) {
        const std::size_t q_begin = static_cast<std::size_t>(block) * kQueryBlock;
        const std::size_t q_end = std::min(n_query, q_begin + kQueryBlock);
        // One max-heap (worst neighbor on top) per query in the block.
        std::vector<std::vector<Neighbor>> heaps(q_end - q_begin);
        for (auto& h : heaps) h.reserve(k + 1);

        for (std::size_t t_begin = 0; t_begin < n_pool; t_begin += kPoolTile) {
            const std::size_t t_end = std::min(n_pool, t_begin + kPoolTile);
            for (std::size_t q = q_begin; q < q_end; ++q) {
                const std::size_t query = queries[q];
                const double* qv = dataset.row(query).data();
                auto& heap = heaps[q - q_begin];
                for (std::size_t p = t_begin; p < t_end; ++p) {
                    if (pool[p] == query) continue;
                    const Neighbor cand{pool[p], pair_distance(qv, packed.data() + p * dim, dim, metric)};
                    if (heap.size() < k) {
                        heap.push_back(cand);
                        std::push_heap(heap.begin(), heap.end(), neighbor_less);
                    } else if (neighbor_less(cand, heap.front())) {
                        std::pop_heap(heap.begin(), heap.end(), neighbor_less);
                        heap.back() = cand;
                        std::push_heap(heap.begin(), heap.end(), neighbor_less);
                    }
                }
            }
        }
        for (std::size_t q = q_begin; q < q_end; ++q) {
            auto& heap = heaps[q - q_begin];
            std::sort_heap(heap.begin(), heap.end(), neighbor_less);
            std::copy(heap.begin(), heap.end(), entries.begin() + static_cast<std::ptrdiff_t>(q * k));
        }
    }
    return {std::vector<std::size_t>(queries.begin(), queries.end()), k, std::move(entries)};
}

std::vector<std::size_t> majority_neighbor_counts(const EmbeddingDataset& dataset,
                                                  std::span<const std::size_t> samples,
                                                  std::size_t k, Metric metric, int minority_label) {
    for (auto s : samples)
        if (s < dataset.size() && dataset.label(s) != minority_label)
            throw PreconditionError("majority_neighbor_count: sample " + std::to_string(s) +
                                    " is not in minority class " + std::to_string(minority_label));
    std::vector<std::size_t> everyone(dataset.size());
    for (std::size_t i = 0; i < everyone.size(); ++i) everyone[i] = i;
    const auto table = knn(dataset, samples, everyone, k, metric);
    std::vector<std::size_t> counts(samples.size(), 0);
    for (std::size_t q = 0; q < samples.size(); ++q)
        for (const auto& nb : table.neighbors(q))
            if (dataset.label(nb.index) != minority_label) ++counts[q];
    return counts;
}

std::size_t majority_neighbor_count(const EmbeddingDataset& dataset, std::size_t sample,
                                    std::size_t k, Metric metric, int minority_label) {
    const std::size_t one[] = {sample};
    return majority_neighbor_counts(dataset, one, k, metric, minority_label).front();
}

}  // namespace rebalance
