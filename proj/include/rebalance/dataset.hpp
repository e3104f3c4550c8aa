#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

namespace rebalance {

/// Where a sample came from. Everything loaded from disk is Real (or the
/// generic Synthetic when the file's origin flag says so); the named
/// synthetic kinds are only produced by resamplers.
enum class Origin : std::uint8_t {
    Real = 0,
    Synthetic,  // synthetic, generating method unknown (e.g. read back from file)
    Smote,
    Borderline,
    Adasyn,
    Ros,
    Vae,
};

constexpr bool is_synthetic(Origin o) noexcept { return o != Origin::Real; }
std::string_view origin_name(Origin o) noexcept;

/// n labeled d-dimensional vectors, stored row-major. Immutable once built:
/// every manipulation returns a new dataset.
class EmbeddingDataset {
public:
    /// Empty dataset. Throws PreconditionError if dim == 0 or class_count < 2.
    EmbeddingDataset(std::size_t dim, std::size_t class_count);

    /// Validates every invariant (finite values, labels in range, sizes).
    EmbeddingDataset(std::size_t dim, std::size_t class_count, std::vector<double> values,
                     std::vector<int> labels, std::vector<Origin> origins);

    /// Same as above with every origin Real.
    EmbeddingDataset(std::size_t dim, std::size_t class_count, std::vector<double> values,
                     std::vector<int> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t class_count() const noexcept { return class_count_; }

    std::span<const double> row(std::size_t i) const noexcept {
        return {values_.data() + i * dim_, dim_};
    }
    int label(std::size_t i) const noexcept { return labels_[i]; }
    Origin origin(std::size_t i) const noexcept { return origins_[i]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<const int> labels() const noexcept { return labels_; }
    std::span<const Origin> origins() const noexcept { return origins_; }

    /// Indices of every sample with the given label, ascending.
    std::vector<std::size_t> indices_of(int label) const;

    /// Rows at `indices`, in that order.
    EmbeddingDataset subset(std::span<const std::size_t> indices) const;

    /// This dataset followed by `tail`. Shapes must agree.
    EmbeddingDataset concat(const EmbeddingDataset& tail) const;

    bool operator==(const EmbeddingDataset&) const = default;

private:
    void validate() const;

    std::size_t dim_;
    std::size_t class_count_;
    std::vector<double> values_;
    std::vector<int> labels_;
    std::vector<Origin> origins_;
};

/// Per-class sample counts over every declared class (absent classes map to 0).
std::map<int, std::size_t> class_histogram(const EmbeddingDataset& dataset);

struct SplitSpec {
    double train_fraction = 0.8;
    double valid_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct SplitResult {
    EmbeddingDataset train;
    EmbeddingDataset valid;
    EmbeddingDataset test;
};

/// Seeded three-way partition. Each partition keeps the input order of its
/// members. Stratified mode apportions every class separately.
SplitResult split(const EmbeddingDataset& dataset, const SplitSpec& spec);

/// Keeps exactly `target` uniformly chosen samples of class `label`; every
/// other sample is kept. Input order is preserved.
EmbeddingDataset downsample_class(const EmbeddingDataset& dataset, int label, std::size_t target,
                                  std::uint64_t seed);

/// Splits `total` into integer parts proportional to `weights` using the
/// largest-remainder method; the parts sum to `total` exactly. Ties in the
/// remainder go to the lower index. Weights must be non-negative with a
/// positive sum.
std::vector<std::size_t> apportion_largest_remainder(std::span<const double> weights,
                                                     std::size_t total);

/// 64-bit content hash of (dim, class_count, labels, origins, values).
std::uint64_t fingerprint(const EmbeddingDataset& dataset);

// --- on-disk formats -------------------------------------------------------

enum class FileFormat { Binary, Csv };

/// Binary for anything except a `.csv` extension.
FileFormat format_from_path(const std::filesystem::path& path);

EmbeddingDataset load_dataset(const std::filesystem::path& path, FileFormat format);
EmbeddingDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path,
                  FileFormat format);
void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path);

/// In-memory EMB1 codec; the file functions are thin wrappers over these.
std::vector<std::byte> encode_binary(const EmbeddingDataset& dataset);
EmbeddingDataset decode_binary(std::span<const std::byte> bytes);

}  // namespace rebalance
