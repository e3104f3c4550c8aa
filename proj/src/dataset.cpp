#include "rebalance/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "rebalance/error.hpp"
#include "rebalance/random.hpp"

namespace rebalance {

std::string_view origin_name(Origin o) noexcept {
    switch (o) {
        case Origin::Real: return "real";
        case Origin::Synthetic: return "synthetic";
        case Origin::Smote: return "smote";
        case Origin::Borderline: return "borderline";
        case Origin::Adasyn: return "adasyn";
        case Origin::Ros: return "ros";
        case Origin::Vae: return "vae";
    }
    return "unknown";
}

EmbeddingDataset::EmbeddingDataset(std::size_t dim, std::size_t class_count)
    : EmbeddingDataset(dim, class_count, {}, {}, {}) {}

EmbeddingDataset::EmbeddingDataset(std::size_t dim, std::size_t class_count,
                                   std::vector<double> values, std::vector<int> labels)
    : EmbeddingDataset(dim, class_count, std::move(values), labels,
                       std::vector<Origin>(labels.size(), Origin::Real)) {}

EmbeddingDataset::EmbeddingDataset(std::size_t dim, std::size_t class_count,
                                   std::vector<double> values, std::vector<int> labels,
                                   std::vector<Origin> origins)
    : dim_(dim),
      class_count_(class_count),
      values_(std::move(values)),
      labels_(std::move(labels)),
      origins_(std::move(origins)) {
    validate();
}

void EmbeddingDataset::validate() const {
    if (dim_ == 0) throw PreconditionError("dataset dimension must be positive");
    if (class_count_ < 2) throw PreconditionError("dataset needs at least 2 declared classes");
    if (origins_.size() != labels_.size())
        throw PreconditionError("origin count does not match label count");
    if (values_.size() != labels_.size() * dim_)
        throw PreconditionError("value count " + std::to_string(values_.size()) +
                                " is not n*d = " + std::to_string(labels_.size() * dim_));
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= class_count_)
            throw PreconditionError("sample " + std::to_string(i) + ": label " +
                                    std::to_string(labels_[i]) + " outside [0, " +
                                    std::to_string(class_count_) + ")");
        for (double v : row(i))
            if (!std::isfinite(v))
                throw PreconditionError("sample " + std::to_string(i) + ": non-finite coordinate");
    }
}

std::vector<std::size_t> EmbeddingDataset::indices_of(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == label) out.push_back(i);
    return out;
}

EmbeddingDataset EmbeddingDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<double> values;
    values.reserve(indices.size() * dim_);
    std::vector<int> labels;
    labels.reserve(indices.size());
    std::vector<Origin> origins;
    origins.reserve(indices.size());
    for (auto i : indices) {
        if (i >= size()) throw PreconditionError("subset index " + std::to_string(i) + " out of range");
        auto r = row(i);
        values.insert(values.end(), r.begin(), r.end());
        labels.push_back(labels_[i]);
        origins.push_back(origins_[i]);
    }
    return {dim_, class_count_, std::move(values), std::move(labels), std::move(origins)};
}

EmbeddingDataset EmbeddingDataset::concat(const EmbeddingDataset& tail) const {
    if (tail.dim_ != dim_ || tail.class_count_ != class_count_)
        throw PreconditionError("concat: datasets differ in dim or class count");
    auto values = values_;
    values.insert(values.end(), tail.values_.begin(), tail.values_.end());
    auto labels = labels_;
    labels.insert(labels.end(), tail.labels_.begin(), tail.labels_.end());
    auto origins = origins_;
    origins.insert(origins.end(), tail.origins_.begin(), tail.origins_.end());
    return {dim_, class_count_, std::move(values), std::move(labels), std::move(origins)};
}

std::map<int, std::size_t> class_histogram(const EmbeddingDataset& dataset) {
    std::map<int, std::size_t> hist;
    for (std::size_t c = 0; c < dataset.class_count(); ++c) hist[static_cast<int>(c)] = 0;
    for (int label : dataset.labels()) ++hist[label];
    return hist;
}

std::vector<std::size_t> apportion_largest_remainder(std::span<const double> weights,
                                                     std::size_t total) {
    if (weights.empty()) {
        if (total != 0) throw PreconditionError("cannot apportion a positive total over no parts");
        return {};
    }
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw PreconditionError("apportionment weights must be finite and non-negative");
        sum += w;
    }
    if (!(sum > 0.0)) throw PreconditionError("apportionment weights sum to zero");

    std::vector<std::size_t> parts(weights.size());
    std::vector<double> remainder(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = weights[i] / sum * static_cast<double>(total);
        const double whole = std::floor(exact);
        parts[i] = static_cast<std::size_t>(whole);
        remainder[i] = exact - whole;
        assigned += parts[i];
    }
    // Rounding in the quotient can push the floors past total by a hair.
    while (assigned > total) {
        auto it = std::max_element(parts.begin(), parts.end());
        --*it;
        --assigned;
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t r = 0; assigned < total; r = (r + 1) % order.size()) {
        ++parts[order[r]];
        ++assigned;
    }
    return parts;
}

namespace {

void check_split_spec(const SplitSpec& spec) {
    const double f[] = {spec.train_fraction, spec.valid_fraction, spec.test_fraction};
    for (double x : f)
        if (!(x > 0.0 && x < 1.0))
            throw PreconditionError("split fractions must each lie in (0, 1)");
    if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
        throw PreconditionError("split fractions must sum to 1");
}

// Sizes of (train, valid, test) for `count` items. In stratified mode every
// partition gets at least one item, taken from the largest partition.
std::array<std::size_t, 3> partition_sizes(std::size_t count, const SplitSpec& spec,
                                           bool require_all, int label) {
    const double w[] = {spec.train_fraction, spec.valid_fraction, spec.test_fraction};
    auto parts = apportion_largest_remainder(w, count);
    std::array<std::size_t, 3> sizes{parts[0], parts[1], parts[2]};
    if (require_all) {
        if (count < 3)
            throw PreconditionError("class " + std::to_string(label) + " has " +
                                    std::to_string(count) +
                                    " samples, too few to stratify into 3 partitions");
        for (auto& s : sizes) {
            if (s == 0) {
                auto largest = std::max_element(sizes.begin(), sizes.end());
                --*largest;
                s = 1;
            }
        }
    }
    return sizes;
}

}  // namespace

SplitResult split(const EmbeddingDataset& dataset, const SplitSpec& spec) {
    check_split_spec(spec);
    if (dataset.empty()) throw PreconditionError("cannot split an empty dataset");

    std::array<std::vector<std::size_t>, 3> members;
    auto deal = [&](std::vector<std::size_t> pool, std::uint64_t seed, bool require_all, int label) {
        Rng rng(seed);
        rng.shuffle(pool);
        const auto sizes = partition_sizes(pool.size(), spec, require_all, label);
        std::size_t at = 0;
        for (std::size_t p = 0; p < 3; ++p)
            for (std::size_t j = 0; j < sizes[p]; ++j) members[p].push_back(pool[at++]);
    };

    if (spec.stratified) {
        for (std::size_t c = 0; c < dataset.class_count(); ++c) {
            const int label = static_cast<int>(c);
            auto pool = dataset.indices_of(label);
            if (pool.empty()) continue;
            deal(std::move(pool), derive_seed(spec.seed, "split-class", c), true, label);
        }
    } else {
        std::vector<std::size_t> pool(dataset.size());
        std::iota(pool.begin(), pool.end(), 0);
        deal(std::move(pool), derive_seed(spec.seed, "split"), false, -1);
    }
    for (auto& m : members) std::sort(m.begin(), m.end());
    return {dataset.subset(members[0]), dataset.subset(members[1]), dataset.subset(members[2])};
}

EmbeddingDataset downsample_class(const EmbeddingDataset& dataset, int label, std::size_t target,
                                  std::uint64_t seed) {
    if (label < 0 || static_cast<std::size_t>(label) >= dataset.class_count())
        throw PreconditionError("downsample: unknown label " + std::to_string(label));
    if (target == 0) throw PreconditionError("downsample: target must be at least 1");
    auto members = dataset.indices_of(label);
    if (target > members.size())
        throw PreconditionError("downsample: target " + std::to_string(target) + " exceeds class " +
                                std::to_string(label) + " size " + std::to_string(members.size()));
    Rng rng(derive_seed(seed, "downsample", static_cast<std::uint64_t>(label)));
    rng.shuffle(members);
    std::vector<bool> drop(dataset.size(), false);
    for (std::size_t j = target; j < members.size(); ++j) drop[members[j]] = true;
    std::vector<std::size_t> keep;
    keep.reserve(dataset.size() - (members.size() - target));
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (!drop[i]) keep.push_back(i);
    return dataset.subset(keep);
}

std::uint64_t fingerprint(const EmbeddingDataset& dataset) {
    const auto bytes = encode_binary(dataset);
    std::uint64_t h = fnv1a64(bytes);
    // Binary storage is f32; fold in the full-precision values too.
    h = fnv1a64(std::as_bytes(dataset.values()), h);
    return h;
}

}  // namespace rebalance
