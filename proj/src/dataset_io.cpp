#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "rebalance/dataset.hpp"
#include "rebalance/error.hpp"

namespace rebalance {

namespace {

constexpr std::byte kMagic[4] = {std::byte{0x45}, std::byte{0x4D}, std::byte{0x42}, std::byte{0x31}};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 4 + 8 + 4 + 4 + 1;

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::byte>(bits & 0xFF));
        if constexpr (sizeof(T) > 1) bits >>= 8;
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what, std::optional<std::size_t> record) {
        using U = std::make_unsigned_t<T>;
        if (bytes_.size() - pos_ < sizeof(T))
            throw FormatError(std::string("truncated file while reading ") + what, record, pos_);
        U bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bits |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return static_cast<T>(bits);
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> bytes(raw.size());
    std::memcpy(bytes.data(), raw.data(), raw.size());
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const char> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Origin origin_from_flag(std::uint8_t flag, std::size_t record, std::size_t offset) {
    switch (flag) {
        case 0: return Origin::Real;
        case 1: return Origin::Synthetic;
        default: throw FormatError("origin byte must be 0 or 1", record, offset);
    }
}

// --- CSV ------------------------------------------------------------------

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

EmbeddingDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("missing CSV header");
    const auto header = split_fields(trim(line));
    if (header.size() < 2 || trim(header[0]) != "label")
        throw FormatError("CSV header must be label,f0,...,f{d-1}");
    const std::size_t dim = header.size() - 1;
    for (std::size_t j = 0; j < dim; ++j)
        if (trim(header[j + 1]) != "f" + std::to_string(j))
            throw FormatError("CSV header column " + std::to_string(j + 1) + " must be f" +
                              std::to_string(j));

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t record = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_fields(trim(line));
        if (fields.size() != dim + 1)
            throw FormatError("expected " + std::to_string(dim + 1) + " fields, got " +
                                  std::to_string(fields.size()),
                              record);
        auto lf = trim(fields[0]);
        int label = 0;
        auto [lp, lec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
        if (lec != std::errc{} || lp != lf.data() + lf.size() || label < 0)
            throw FormatError("bad label '" + std::string(lf) + "'", record);
        labels.push_back(label);
        for (std::size_t j = 0; j < dim; ++j) {
            auto f = trim(fields[j + 1]);
            double v = 0.0;
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc{} || p != f.data() + f.size())
                throw FormatError("bad number '" + std::string(f) + "'", record);
            if (!std::isfinite(v)) throw FormatError("non-finite value", record);
            values.push_back(v);
        }
        ++record;
    }
    int max_label = 1;
    for (int l : labels) max_label = std::max(max_label, l);
    return {dim, static_cast<std::size_t>(max_label) + 1, std::move(values), std::move(labels)};
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void save_csv(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
    std::string text = "label";
    for (std::size_t j = 0; j < dataset.dim(); ++j) text += ",f" + std::to_string(j);
    text += '\n';
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        text += std::to_string(dataset.label(i));
        for (double v : dataset.row(i)) {
            text += ',';
            text += format_double(v);
        }
        text += '\n';
    }
    write_file(path, text);
}

}  // namespace

std::vector<std::byte> encode_binary(const EmbeddingDataset& dataset) {
    const bool flagged = std::any_of(dataset.origins().begin(), dataset.origins().end(), is_synthetic);
    std::vector<std::byte> out;
    out.reserve(kHeaderSize + dataset.size() * (4 + (flagged ? 1 : 0) + 4 * dataset.dim()));
    for (auto b : kMagic) out.push_back(b);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint64_t>(out, dataset.size());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.dim()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.class_count()));
    put_le<std::uint8_t>(out, flagged ? 1 : 0);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        put_le<std::int32_t>(out, dataset.label(i));
        if (flagged) put_le<std::uint8_t>(out, is_synthetic(dataset.origin(i)) ? 1 : 0);
        for (double v : dataset.row(i))
            put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

EmbeddingDataset decode_binary(std::span<const std::byte> bytes) {
    Reader in(bytes);
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw FormatError("bad magic, expected EMB1", std::nullopt, 0);
    in.get<std::uint32_t>("magic", std::nullopt);
    const auto version = in.get<std::uint32_t>("version", std::nullopt);
    if (version != kVersion)
        throw FormatError("unsupported version " + std::to_string(version), std::nullopt, 4);
    const auto n = in.get<std::uint64_t>("record count", std::nullopt);
    const auto dim = in.get<std::uint32_t>("dimension", std::nullopt);
    const auto class_count = in.get<std::uint32_t>("class count", std::nullopt);
    const auto flag_offset = in.pos();
    const auto flagged = in.get<std::uint8_t>("origin flag", std::nullopt);
    if (dim == 0) throw FormatError("dimension must be positive", std::nullopt, 16);
    if (class_count < 2) throw FormatError("class count must be at least 2", std::nullopt, 20);
    if (flagged > 1) throw FormatError("origin flag must be 0 or 1", std::nullopt, flag_offset);

    const std::size_t record_size = 4 + (flagged ? 1 : 0) + 4 * static_cast<std::size_t>(dim);
    if (n > in.remaining() / record_size + 1)
        throw FormatError("header declares " + std::to_string(n) + " records but file holds at most " +
                              std::to_string(in.remaining() / record_size),
                          std::nullopt, bytes.size());

    std::vector<double> values;
    values.reserve(n * dim);
    std::vector<int> labels;
    labels.reserve(n);
    std::vector<Origin> origins;
    origins.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto label_offset = in.pos();
        const auto label = in.get<std::int32_t>("label", r);
        if (label < 0 || static_cast<std::uint32_t>(label) >= class_count)
            throw FormatError("label " + std::to_string(label) + " not below class count " +
                                  std::to_string(class_count),
                              r, label_offset);
        labels.push_back(label);
        if (flagged) {
            const auto at = in.pos();
            origins.push_back(origin_from_flag(in.get<std::uint8_t>("origin", r), r, at));
        } else {
            origins.push_back(Origin::Real);
        }
        for (std::uint32_t j = 0; j < dim; ++j) {
            const auto at = in.pos();
            const float v = std::bit_cast<float>(in.get<std::uint32_t>("coordinate", r));
            if (!std::isfinite(v)) throw FormatError("non-finite coordinate", r, at);
            values.push_back(v);
        }
    }
    if (in.remaining() != 0)
        throw FormatError(std::to_string(in.remaining()) + " trailing bytes after last record",
                          std::nullopt, in.pos());
    return {dim, class_count, std::move(values), std::move(labels), std::move(origins)};
}

FileFormat format_from_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".csv" ? FileFormat::Csv : FileFormat::Binary;
}

EmbeddingDataset load_dataset(const std::filesystem::path& path, FileFormat format) {
    if (format == FileFormat::Csv) return load_csv(path);
    return decode_binary(read_file(path));
}

EmbeddingDataset load_dataset(const std::filesystem::path& path) {
    return load_dataset(path, format_from_path(path));
}

void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path,
                  FileFormat format) {
    if (format == FileFormat::Csv) return save_csv(dataset, path);
    const auto bytes = encode_binary(dataset);
    write_file(path, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
    save_dataset(dataset, path, format_from_path(path));
}

}  // namespace rebalance
