#include "rebalance/resample.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <string>

#include "rebalance/error.hpp"
#include "rebalance/random.hpp"

namespace rebalance {

std::string_view method_name(Method m) noexcept {
    switch (m) {
        case Method::Smote: return "smote";
        case Method::BorderlineSmote: return "borderline";
        case Method::Adasyn: return "adasyn";
        case Method::RandomOversample: return "ros";
        case Method::Vae: return "vae";
    }
    return "unknown";
}

Method method_from_name(std::string_view name) {
    if (name == "smote") return Method::Smote;
    if (name == "borderline" || name == "borderline-smote" || name == "borderline_smote")
        return Method::BorderlineSmote;
    if (name == "adasyn") return Method::Adasyn;
    if (name == "ros" || name == "random" || name == "random-oversample") return Method::RandomOversample;
    if (name == "vae") return Method::Vae;
    throw PreconditionError("unknown resampling method '" + std::string(name) + "'");
}

Origin origin_for(Method m) noexcept {
    switch (m) {
        case Method::Smote: return Origin::Smote;
        case Method::BorderlineSmote: return Origin::Borderline;
        case Method::Adasyn: return Origin::Adasyn;
        case Method::RandomOversample: return Origin::Ros;
        case Method::Vae: return Origin::Vae;
    }
    return Origin::Synthetic;
}

std::vector<double> interpolate(std::span<const double> f_i, std::span<const double> f_nn, double lambda) {
    if (f_i.size() != f_nn.size()) throw PreconditionError("interpolate: dimension mismatch");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw PreconditionError("interpolate: lambda outside [0, 1]");
    std::vector<double> out(f_i.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = f_i[j] + lambda * (f_nn[j] - f_i[j]);
    return out;
}

BorderlineKind classify_borderline(std::size_t majority_neighbors, std::size_t k) noexcept {
    if (majority_neighbors >= k) return BorderlineKind::Noise;
    if (majority_neighbors >= (k + 1) / 2) return BorderlineKind::Danger;
    return BorderlineKind::Safe;
}

ResamplePlan round_robin_plan(std::span<const std::size_t> bases, std::size_t total) {
    if (bases.empty() && total > 0) throw PreconditionError("round_robin_plan: no bases");
    ResamplePlan plan{{bases.begin(), bases.end()}, std::vector<std::size_t>(bases.size(), 0), total};
    if (bases.empty()) return plan;
    const std::size_t each = total / bases.size();
    const std::size_t extra = total % bases.size();
    for (std::size_t i = 0; i < bases.size(); ++i) plan.quotas[i] = each + (i < extra ? 1 : 0);
    return plan;
}

std::map<int, std::size_t> resolve_targets(const EmbeddingDataset& dataset, const ResamplerConfig& config) {
    const auto hist = class_histogram(dataset);
    std::size_t n_maj = 0;
    for (const auto& [label, count] : hist) n_maj = std::max(n_maj, count);
    std::map<int, std::size_t> targets;
    for (const auto& [label, count] : hist) targets[label] = n_maj;
    if (config.target_per_class) {
        for (const auto& [label, target] : *config.target_per_class) {
            if (!hist.contains(label))
                throw PreconditionError("target given for unknown class " + std::to_string(label));
            targets[label] = target;
        }
    }
    for (const auto& [label, target] : targets)
        if (target < hist.at(label))
            throw PreconditionError("class " + std::to_string(label) + ": target " + std::to_string(target) +
                                    " is below its current count " + std::to_string(hist.at(label)));
    return targets;
}

namespace {

struct ClassJob {
    int label;
    std::vector<std::size_t> members;
    std::size_t deficit;
};

// Classes that need synthetic samples, ascending by label. Empty classes are
// skipped with a warning unless explicitly targeted.
std::vector<ClassJob> class_jobs(const EmbeddingDataset& dataset, const ResamplerConfig& config,
                                 std::vector<std::string>& warnings) {
    const auto targets = resolve_targets(dataset, config);
    std::vector<ClassJob> jobs;
    for (const auto& [label, target] : targets) {
        auto members = dataset.indices_of(label);
        if (target <= members.size()) continue;
        if (members.empty()) {
            const bool explicit_target = config.target_per_class && config.target_per_class->contains(label);
            if (explicit_target)
                throw PreconditionError(std::string(method_name(config.method)) + ": class " +
                                        std::to_string(label) + " is empty and cannot be oversampled");
            warnings.push_back("class " + std::to_string(label) + " is empty; left at 0 samples");
            continue;
        }
        const std::size_t deficit = target - members.size();
        jobs.push_back({label, std::move(members), deficit});
    }
    return jobs;
}

struct ClassSynthesis {
    int label = 0;
    std::vector<double> values;
    std::vector<Provenance> records;
};

ResampleResult assemble(const EmbeddingDataset& dataset, std::vector<ClassSynthesis> parts,
                        std::vector<std::string> warnings) {
    std::vector<double> values(dataset.values().begin(), dataset.values().end());
    std::vector<int> labels(dataset.labels().begin(), dataset.labels().end());
    std::vector<Origin> origins(dataset.origins().begin(), dataset.origins().end());
    std::vector<Provenance> provenance;
    for (auto& part : parts) {
        for (auto& rec : part.records) {
            rec.output_index = labels.size();
            labels.push_back(part.label);
            origins.push_back(origin_for(rec.method));
            provenance.push_back(rec);
        }
        values.insert(values.end(), part.values.begin(), part.values.end());
    }
    return {EmbeddingDataset(dataset.dim(), dataset.class_count(), std::move(values), std::move(labels),
                             std::move(origins)),
            std::move(provenance), std::move(warnings)};
}

std::size_t clamp_k(std::size_t k, std::size_t available, int label, const char* what,
                    std::vector<std::string>& warnings) {
    if (k == 0) throw PreconditionError("k must be at least 1");
    if (k <= available) return k;
    warnings.push_back("class " + std::to_string(label) + ": " + what + " k clamped from " + std::to_string(k) +
                       " to " + std::to_string(available));
    return available;
}

void require_pair(const ClassJob& job, Method method) {
    if (job.members.size() < 2)
        throw PreconditionError(std::string(method_name(method)) + ": class " + std::to_string(job.label) +
                                " has " + std::to_string(job.members.size()) +
                                " sample(s); at least 2 are needed to find a neighbor");
}

// Interpolates toward minority neighbors following `plan`. `table` must hold
// the neighbors of plan.base_indices in the same order. Draws are keyed by
// (seed, base index, sequence number), so bases run in parallel.
ClassSynthesis synthesize_interpolated(const EmbeddingDataset& dataset, int label, const ResamplePlan& plan,
                                       const NeighborTable& table, Method method, std::uint64_t seed) {
    const std::size_t dim = dataset.dim();
    std::vector<std::size_t> offsets(plan.quotas.size() + 1, 0);
    std::partial_sum(plan.quotas.begin(), plan.quotas.end(), offsets.begin() + 1);
    const std::size_t total = offsets.back();

    ClassSynthesis out;
    out.label = label;
    out.values.resize(total * dim);
    out.records.resize(total);
    const std::uint64_t stream = derive_seed(seed, "interpolate");
    const auto n_bases = static_cast<std::ptrdiff_t>(plan.base_indices.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < n_bases; ++b) {
        const auto bi = static_cast<std::size_t>(b);
        const std::size_t base = plan.base_indices[bi];
        const auto f_i = dataset.row(base);
        const auto nbrs = table.neighbors(bi);
        for (std::size_t s = 0; s < plan.quotas[bi]; ++s) {
            const auto pick = counter_index(stream, base, s, nbrs.size());
            const std::size_t nn = nbrs[pick].index;
            const double lambda = counter_uniform(stream, base, s);
            const auto f_nn = dataset.row(nn);
            const std::size_t slot = offsets[bi] + s;
            double* dst = out.values.data() + slot * dim;
            for (std::size_t j = 0; j < dim; ++j) dst[j] = f_i[j] + lambda * (f_nn[j] - f_i[j]);
            out.records[slot] = Provenance{method, label, 0, base, nn, lambda, seed};
        }
    }
    return out;
}

std::size_t detection_k(const EmbeddingDataset& dataset, const ResamplerConfig& config, int label,
                        std::vector<std::string>& warnings) {
    if (dataset.size() < 2) throw PreconditionError("dataset too small for neighbor search");
    return clamp_k(config.k, dataset.size() - 1, label, "detection", warnings);
}

ClassSynthesis smote_class(const EmbeddingDataset& dataset, const ClassJob& job, const ResamplerConfig& config,
                           Method method, std::vector<std::string>& warnings) {
    require_pair(job, method);
    const auto k = clamp_k(config.k, job.members.size() - 1, job.label, "neighbor", warnings);
    const auto table = knn(dataset, job.members, job.members, k, config.metric);
    const auto plan = round_robin_plan(job.members, job.deficit);
    return synthesize_interpolated(dataset, job.label, plan, table, method, config.seed);
}

std::vector<BorderlineKind> kinds_for(const EmbeddingDataset& dataset, const ClassJob& job,
                                      const ResamplerConfig& config, std::vector<std::string>& warnings) {
    const auto k = detection_k(dataset, config, job.label, warnings);
    const auto counts = majority_neighbor_counts(dataset, job.members, k, config.metric, job.label);
    std::vector<BorderlineKind> kinds(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) kinds[i] = classify_borderline(counts[i], k);
    return kinds;
}

DifficultyScores scores_for(const EmbeddingDataset& dataset, const ClassJob& job, const ResamplerConfig& config,
                            std::vector<std::string>& warnings) {
    DifficultyScores s;
    s.k = detection_k(dataset, config, job.label, warnings);
    s.sample_indices = job.members;
    s.majority_neighbors = majority_neighbor_counts(dataset, job.members, s.k, config.metric, job.label);
    double sum = 0.0;
    for (auto ki : s.majority_neighbors) {
        s.raw.push_back(static_cast<double>(ki) / static_cast<double>(s.k));
        sum += s.raw.back();
    }
    const auto n = static_cast<double>(s.raw.size());
    for (double r : s.raw) s.normalized.push_back(sum > 0.0 ? r / sum : 1.0 / n);
    return s;
}

ClassJob single_class_job(const EmbeddingDataset& dataset, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= dataset.class_count())
        throw PreconditionError("unknown class " + std::to_string(label));
    auto members = dataset.indices_of(label);
    if (members.empty()) throw PreconditionError("class " + std::to_string(label) + " is empty");
    return {label, std::move(members), 0};
}

template <typename PerClass>
ResampleResult run_per_class(const EmbeddingDataset& dataset, const ResamplerConfig& config, PerClass&& per_class) {
    std::vector<std::string> warnings;
    const auto jobs = class_jobs(dataset, config, warnings);
    std::vector<ClassSynthesis> parts;
    for (const auto& job : jobs) parts.push_back(per_class(job, warnings));
    return assemble(dataset, std::move(parts), std::move(warnings));
}

}  // namespace

DifficultyScores adasyn_scores(const EmbeddingDataset& dataset, int label, const ResamplerConfig& config) {
    std::vector<std::string> ignored;
    return scores_for(dataset, single_class_job(dataset, label), config, ignored);
}

ResamplePlan adasyn_plan(const DifficultyScores& scores, std::size_t total) {
    return {scores.sample_indices, apportion_largest_remainder(scores.normalized, total), total};
}

std::vector<BorderlineKind> borderline_kinds(const EmbeddingDataset& dataset, int label,
                                             const ResamplerConfig& config) {
    std::vector<std::string> ignored;
    return kinds_for(dataset, single_class_job(dataset, label), config, ignored);
}

ResampleResult smote(const EmbeddingDataset& dataset, const ResamplerConfig& config) {
    return run_per_class(dataset, config, [&](const ClassJob& job, auto& warnings) {
        return smote_class(dataset, job, config, Method::Smote, warnings);
    });
}

ResampleResult borderline_smote(const EmbeddingDataset& dataset, const ResamplerConfig& config) {
    std::vector<std::string> warnings;
    const auto jobs = class_jobs(dataset, config, warnings);
    std::vector<ClassSynthesis> parts;
    for (const auto& job : jobs) {
        require_pair(job, Method::BorderlineSmote);
        const auto kinds = kinds_for(dataset, job, config, warnings);
        std::vector<std::size_t> danger;
        for (std::size_t i = 0; i < kinds.size(); ++i)
            if (kinds[i] == BorderlineKind::Danger) danger.push_back(job.members[i]);
        if (danger.empty()) {
            if (!config.borderline_fallback) throw NoDangerSamplesError(job.label);
            warnings.push_back("class " + std::to_string(job.label) +
                               ": no DANGER samples, fell back to smote");
            parts.push_back(smote_class(dataset, job, config, Method::Smote, warnings));
            continue;
        }
        const auto k = clamp_k(config.k, job.members.size() - 1, job.label, "neighbor", warnings);
        const auto table = knn(dataset, danger, job.members, k, config.metric);
        const auto plan = round_robin_plan(danger, job.deficit);
        parts.push_back(synthesize_interpolated(dataset, job.label, plan, table, Method::BorderlineSmote, config.seed));
    }
    return assemble(dataset, std::move(parts), std::move(warnings));
}

ResampleResult adasyn(const EmbeddingDataset& dataset, const ResamplerConfig& config) {
    return run_per_class(dataset, config, [&](const ClassJob& job, auto& warnings) {
        require_pair(job, Method::Adasyn);
        const auto scores = scores_for(dataset, job, config, warnings);
        const auto plan = adasyn_plan(scores, job.deficit);
        const auto k = clamp_k(config.k, job.members.size() - 1, job.label, "neighbor", warnings);
        const auto table = knn(dataset, plan.base_indices, job.members, k, config.metric);
        return synthesize_interpolated(dataset, job.label, plan, table, Method::Adasyn, config.seed);
    });
}

ResampleResult random_oversample(const EmbeddingDataset& dataset, const ResamplerConfig& config) {
    return run_per_class(dataset, config, [&](const ClassJob& job, auto&) {
        const std::uint64_t stream = derive_seed(config.seed, "ros");
        ClassSynthesis out;
        out.label = job.label;
        for (std::size_t j = 0; j < job.deficit; ++j) {
            const auto source = job.members[counter_index(stream, static_cast<std::uint64_t>(job.label), j,
                                                          job.members.size())];
            auto r = dataset.row(source);
            out.values.insert(out.values.end(), r.begin(), r.end());
            out.records.push_back({Method::RandomOversample, job.label, 0, source, std::nullopt, std::nullopt,
                                   config.seed});
        }
        return out;
    });
}

ResampleResult vae_oversample(const EmbeddingDataset& dataset, const ResamplerConfig& config) {
    return run_per_class(dataset, config, [&](const ClassJob& job, auto&) {
        std::vector<std::size_t> real;
        for (auto i : job.members)
            if (dataset.origin(i) == Origin::Real) real.push_back(i);
        if (real.size() < 2)
            throw PreconditionError("vae: class " + std::to_string(job.label) + " has " +
                                    std::to_string(real.size()) + " real sample(s); at least 2 are needed");
        auto options = config.vae;
        options.train.seed = derive_seed(config.seed, "vae-class", static_cast<std::uint64_t>(job.label));
        const auto trained = train_vae(dataset.subset(real), options);
        const auto samples = generate(trained.model, job.deficit,
                                      derive_seed(config.seed, "vae-sample", static_cast<std::uint64_t>(job.label)));
        ClassSynthesis out;
        out.label = job.label;
        for (const auto& s : samples) {
            out.values.insert(out.values.end(), s.begin(), s.end());
            out.records.push_back({Method::Vae, job.label, 0, std::nullopt, std::nullopt, std::nullopt, config.seed});
        }
        return out;
    });
}

ResampleResult balance(const EmbeddingDataset& dataset, const ResamplerConfig& config) {
    const auto hist = class_histogram(dataset);
    const auto non_empty = std::count_if(hist.begin(), hist.end(), [](const auto& kv) { return kv.second > 0; });
    if (non_empty < 2) throw PreconditionError("balance: need at least 2 non-empty classes");
    switch (config.method) {
        case Method::Smote: return smote(dataset, config);
        case Method::BorderlineSmote: return borderline_smote(dataset, config);
        case Method::Adasyn: return adasyn(dataset, config);
        case Method::RandomOversample: return random_oversample(dataset, config);
        case Method::Vae: return vae_oversample(dataset, config);
    }
    throw PreconditionError("balance: unknown method");
}

nlohmann::json to_json(const Provenance& record) {
    nlohmann::json j{{"method", method_name(record.method)},
                     {"label", record.label},
                     {"output_index", record.output_index},
                     {"seed", record.seed}};
    j["base_index"] = record.base_index ? nlohmann::json(*record.base_index) : nlohmann::json(nullptr);
    j["neighbor_index"] = record.neighbor_index ? nlohmann::json(*record.neighbor_index) : nlohmann::json(nullptr);
    j["lambda"] = record.lambda ? nlohmann::json(*record.lambda) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json provenance_to_json(std::span<const Provenance> records) {
    auto arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    return arr;
}

void save_provenance(std::span<const Provenance> records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << provenance_to_json(records).dump(1) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json to_json(const ResamplerConfig& config) {
    nlohmann::json j{{"method", method_name(config.method)},
                     {"k", config.k},
                     {"seed", config.seed},
                     {"metric", config.metric == Metric::Euclidean ? "euclidean" : "cosine"},
                     {"borderline_fallback", config.borderline_fallback}};
    if (config.target_per_class) {
        nlohmann::json t = nlohmann::json::object();
        for (const auto& [label, count] : *config.target_per_class) t[std::to_string(label)] = count;
        j["target_per_class"] = std::move(t);
    }
    if (config.method == Method::Vae)
        j["vae"] = {{"latent_dim", config.vae.latent_dim},
                    {"hidden_units", config.vae.hidden_units},
                    {"train", to_json(config.vae.train)}};
    return j;
}

ResamplerConfig resampler_config_from_json(const nlohmann::json& doc, ResamplerConfig defaults) {
    auto c = defaults;
    if (doc.is_string()) {
        c.method = method_from_name(doc.get<std::string>());
        return c;
    }
    try {
        if (doc.contains("method")) c.method = method_from_name(doc.at("method").get<std::string>());
        c.k = doc.value("k", c.k);
        c.seed = doc.value("seed", c.seed);
        c.borderline_fallback = doc.value("borderline_fallback", c.borderline_fallback);
        if (doc.contains("metric")) {
            const auto m = doc.at("metric").get<std::string>();
            if (m == "euclidean") c.metric = Metric::Euclidean;
            else if (m == "cosine") c.metric = Metric::Cosine;
            else throw PreconditionError("unknown metric '" + m + "'");
        }
        if (doc.contains("target_per_class")) {
            std::map<int, std::size_t> t;
            for (const auto& [key, value] : doc.at("target_per_class").items())
                t[std::stoi(key)] = value.get<std::size_t>();
            c.target_per_class = std::move(t);
        }
        c.vae.latent_dim = doc.value("latent_dim", c.vae.latent_dim);
        if (doc.contains("vae")) {
            const auto& v = doc.at("vae");
            c.vae.latent_dim = v.value("latent_dim", c.vae.latent_dim);
            c.vae.hidden_units = v.value("hidden_units", c.vae.hidden_units);
            if (v.contains("train")) c.vae.train = train_config_from_json(v.at("train"), c.vae.train);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed resampler config: ") + e.what());
    }
    return c;
}

}  // namespace rebalance
