#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <string>

#include "rebalance/error.hpp"
#include "rebalance/experiment.hpp"
#include "rebalance/random.hpp"

namespace rebalance {

ArmSpec baseline_arm() { return {"none", std::nullopt}; }

ArmSpec resampler_arm(ResamplerConfig config) {
    return {std::string(method_name(config.method)), std::move(config)};
}

CellSeeds cell_seeds(std::uint64_t fold_seed, std::size_t size) {
    return {derive_seed(fold_seed, "split"), derive_seed(fold_seed, "downsample", size),
            derive_seed(fold_seed, "resample", size), derive_seed(fold_seed, "classifier", size)};
}

namespace {

std::size_t count_synthetic(const EmbeddingDataset& d) {
    return static_cast<std::size_t>(std::count_if(d.origins().begin(), d.origins().end(), is_synthetic));
}

}  // namespace

CellResult run_on_partitions(const EmbeddingDataset& train, const EmbeddingDataset& valid,
                             const EmbeddingDataset& test, const std::vector<int>& minority_classes,
                             std::size_t size, const ArmSpec& arm, const CellSeeds& seeds,
                             const ProtocolOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    CellResult cell;
    cell.key = {arm.name, size, 0};
    try {
        auto working = train;
        for (int label : minority_classes) working = downsample_class(working, label, size, seeds.downsample);
        if (arm.resampler) {
            auto cfg = *arm.resampler;
            cfg.seed = seeds.resample;
            cfg.borderline_fallback = true;
            auto balanced = balance(working, cfg);
            working = std::move(balanced.dataset);
            cell.warnings = std::move(balanced.warnings);
        }
        cell.train_histogram = class_histogram(working);
        cell.synthetic_in_eval = count_synthetic(valid) + count_synthetic(test);

        auto classifier_options = options.classifier;
        classifier_options.train.seed = seeds.classifier;
        const auto model = train_classifier(working, &valid, classifier_options);
        cell.metrics = evaluate(model, test);
        cell.ok = true;
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
    }
    cell.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return cell;
}

CellResult run_single(const EmbeddingDataset& dataset, const std::vector<int>& minority_classes,
                      std::size_t size, const ArmSpec& arm, std::uint64_t fold_seed,
                      const ProtocolOptions& options) {
    const auto seeds = cell_seeds(fold_seed, size);
    auto split_spec = options.split;
    split_spec.seed = seeds.split;
    try {
        const auto parts = split(dataset, split_spec);
        return run_on_partitions(parts.train, parts.valid, parts.test, minority_classes, size, arm, seeds,
                                 options);
    } catch (const std::exception& e) {
        CellResult cell;
        cell.key = {arm.name, size, 0};
        cell.error = e.what();
        return cell;
    }
}

SweepSpec normalize_sweep(SweepSpec spec) {
    if (spec.folds == 0) throw PreconditionError("sweep: folds must be at least 1");
    if (spec.sizes.empty()) throw PreconditionError("sweep: sizes must not be empty");
    for (std::size_t i = 0; i < spec.sizes.size(); ++i) {
        if (spec.sizes[i] < 2) throw PreconditionError("sweep: every size must be at least 2");
        if (i > 0 && spec.sizes[i] <= spec.sizes[i - 1])
            throw PreconditionError("sweep: sizes must be strictly increasing");
    }
    if (spec.minority_classes.empty()) throw PreconditionError("sweep: no minority classes given");
    std::set<std::string> names;
    std::vector<ArmSpec> arms{baseline_arm()};
    names.insert("none");
    for (auto& arm : spec.arms) {
        if (arm.name == "none" && !arm.resampler) continue;
        if (!names.insert(arm.name).second)
            throw PreconditionError("sweep: duplicate arm name '" + arm.name + "'");
        arms.push_back(std::move(arm));
    }
    spec.arms = std::move(arms);
    return spec;
}

SweepSpec sweep_spec_from_json(const nlohmann::json& doc) {
    SweepSpec spec;
    try {
        if (doc.contains("minority_classes")) spec.minority_classes = doc.at("minority_classes").get<std::vector<int>>();
        if (doc.contains("sizes")) spec.sizes = doc.at("sizes").get<std::vector<std::size_t>>();
        spec.folds = doc.value("folds", spec.folds);
        spec.seed = doc.value("seed", spec.seed);
        for (const auto& jm : doc.value("methods", nlohmann::json::array())) {
            const std::string name = jm.is_string() ? jm.get<std::string>() : jm.value("method", std::string("none"));
            if (name == "none") continue;
            auto cfg = resampler_config_from_json(jm);
            auto arm = resampler_arm(cfg);
            if (jm.is_object() && jm.contains("name")) arm.name = jm.at("name").get<std::string>();
            spec.arms.push_back(std::move(arm));
        }
        if (doc.contains("split")) {
            const auto& js = doc.at("split");
            spec.protocol.split.train_fraction = js.value("train", spec.protocol.split.train_fraction);
            spec.protocol.split.valid_fraction = js.value("valid", spec.protocol.split.valid_fraction);
            spec.protocol.split.test_fraction = js.value("test", spec.protocol.split.test_fraction);
            spec.protocol.split.stratified = js.value("stratified", spec.protocol.split.stratified);
        }
        if (doc.contains("classifier")) {
            const auto& jc = doc.at("classifier");
            auto& c = spec.protocol.classifier;
            c.hidden_units = jc.value("hidden_units", c.hidden_units);
            c.standardize = jc.value("standardize", c.standardize);
            if (jc.contains("train")) c.train = train_config_from_json(jc.at("train"), c.train);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed sweep spec: ") + e.what());
    }
    return normalize_sweep(std::move(spec));
}

bool ExperimentReport::all_ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
}

std::vector<Aggregate> aggregate_cells(const std::vector<CellResult>& cells, const std::vector<ArmSpec>& arms,
                                       const std::vector<std::size_t>& sizes) {
    std::vector<Aggregate> out;
    for (const auto& arm : arms) {
        for (auto size : sizes) {
            Aggregate a{arm.name, size};
            std::vector<double> acc, f1;
            for (const auto& c : cells)
                if (c.ok && c.key.method == arm.name && c.key.size == size) {
                    acc.push_back(c.metrics.accuracy);
                    f1.push_back(c.metrics.macro_f1);
                }
            a.ok_folds = acc.size();
            auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
                mean = sd = 0.0;
                if (v.empty()) return;
                for (double x : v) mean += x;
                mean /= static_cast<double>(v.size());
                if (v.size() < 2) return;
                for (double x : v) sd += (x - mean) * (x - mean);
                sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
            };
            mean_sd(acc, a.mean_accuracy, a.sd_accuracy);
            mean_sd(f1, a.mean_macro_f1, a.sd_macro_f1);
            out.push_back(a);
        }
    }
    return out;
}

ExperimentReport run_sweep(const EmbeddingDataset& dataset, const SweepSpec& input_spec, std::size_t jobs) {
    const auto spec = normalize_sweep(input_spec);
    ExperimentReport report{spec, fingerprint(dataset), {}, {}};

    // Splits are shared by every arm and size within a fold.
    std::vector<std::optional<SplitResult>> splits(spec.folds);
    std::vector<std::string> split_errors(spec.folds);
    for (std::size_t f = 0; f < spec.folds; ++f) {
        auto split_spec = spec.protocol.split;
        split_spec.seed = cell_seeds(derive_seed(spec.seed, "fold", f), 0).split;
        try {
            splits[f] = split(dataset, split_spec);
        } catch (const std::exception& e) {
            split_errors[f] = e.what();
        }
    }

    std::vector<CellKey> keys;
    std::vector<std::size_t> arm_of;
    for (std::size_t a = 0; a < spec.arms.size(); ++a)
        for (auto size : spec.sizes)
            for (std::size_t f = 0; f < spec.folds; ++f) {
                keys.push_back({spec.arms[a].name, size, f});
                arm_of.push_back(a);
            }
    report.cells.resize(keys.size());

    const auto n_cells = static_cast<std::ptrdiff_t>(keys.size());
    const int threads = static_cast<int>(std::max<std::size_t>(1, jobs));
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n_cells; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const auto& key = keys[idx];
        CellResult cell;
        if (!splits[key.fold]) {
            cell.error = "split failed: " + split_errors[key.fold];
        } else {
            try {
                const auto& parts = *splits[key.fold];
                cell = run_on_partitions(parts.train, parts.valid, parts.test, spec.minority_classes, key.size,
                                         spec.arms[arm_of[idx]],
                                         cell_seeds(derive_seed(spec.seed, "fold", key.fold), key.size),
                                         spec.protocol);
            } catch (...) {
                cell.ok = false;
                cell.error = "unexpected failure";
            }
        }
        cell.key = key;
        report.cells[idx] = std::move(cell);
    }
    report.aggregates = aggregate_cells(report.cells, spec.arms, spec.sizes);
    return report;
}

namespace {

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return s;
}

const std::vector<std::string> kCellFields = {"method", "size", "fold", "status", "error",
                                              "train_class_histogram", "test_accuracy", "macro_f1",
                                              "per_class_recall", "synthetic_in_eval", "wall_time_s",
                                              "warnings"};
const std::vector<std::string> kAggregateFields = {"method", "size", "ok_folds", "mean_accuracy",
                                                   "sd_accuracy", "mean_macro_f1", "sd_macro_f1"};

}  // namespace

nlohmann::json to_json(const ExperimentReport& report) {
    const auto& spec = report.spec;
    auto methods = nlohmann::json::array();
    for (const auto& arm : spec.arms) {
        nlohmann::json j{{"name", arm.name}};
        j["resampler"] = arm.resampler ? to_json(*arm.resampler) : nlohmann::json(nullptr);
        methods.push_back(std::move(j));
    }
    nlohmann::json metadata{
        {"dataset_fingerprint", hex64(report.dataset_fingerprint)},
        {"seed", spec.seed},
        {"folds", spec.folds},
        {"sizes", spec.sizes},
        {"minority_classes", spec.minority_classes},
        {"methods", methods},
        {"split",
         {{"train", spec.protocol.split.train_fraction},
          {"valid", spec.protocol.split.valid_fraction},
          {"test", spec.protocol.split.test_fraction},
          {"stratified", spec.protocol.split.stratified}}},
        {"classifier",
         {{"hidden_units", spec.protocol.classifier.hidden_units},
          {"standardize", spec.protocol.classifier.standardize},
          {"train", to_json(spec.protocol.classifier.train)}}},
        {"protocol",
         {{"pipeline", {"stratified_split", "downsample_train_minorities", "balance_train", "train_classifier",
                        "evaluate_test"}},
          {"folds", "repeated stratified splits, re-seeded per fold"},
          {"downsampling", "training partition only; validation and test untouched"},
          {"borderline_without_danger", "falls back to smote per class, noted in cell warnings"},
          {"seed_derivation", "sub = mix64(master ^ mix64(fnv1a64(tag) ^ mix64(index)))"}}}};

    auto cells = nlohmann::json::array();
    for (const auto& c : report.cells) {
        nlohmann::json hist = nlohmann::json::object();
        for (const auto& [label, count] : c.train_histogram) hist[std::to_string(label)] = count;
        nlohmann::json j{{"method", c.key.method},
                         {"size", c.key.size},
                         {"fold", c.key.fold},
                         {"status", c.ok ? "ok" : "failed"},
                         {"error", c.error},
                         {"train_class_histogram", hist},
                         {"synthetic_in_eval", c.synthetic_in_eval},
                         {"wall_time_s", c.wall_time_s},
                         {"warnings", c.warnings}};
        if (c.ok) {
            const auto m = to_json(c.metrics);
            j["test_accuracy"] = m.at("accuracy");
            j["macro_f1"] = m.at("macro_f1");
            j["per_class_recall"] = m.at("per_class_recall");
        } else {
            j["test_accuracy"] = nullptr;
            j["macro_f1"] = nullptr;
            j["per_class_recall"] = nullptr;
        }
        cells.push_back(std::move(j));
    }
    auto aggregates = nlohmann::json::array();
    for (const auto& a : report.aggregates)
        aggregates.push_back({{"method", a.method},
                              {"size", a.size},
                              {"ok_folds", a.ok_folds},
                              {"mean_accuracy", a.mean_accuracy},
                              {"sd_accuracy", a.sd_accuracy},
                              {"mean_macro_f1", a.mean_macro_f1},
                              {"sd_macro_f1", a.sd_macro_f1}});
    return {{"schema_version", 1},
            {"schema",
             {{"cell_fields", kCellFields},
              {"aggregate_fields", kAggregateFields},
              {"cell_order", "method (as listed in metadata.methods), size, fold"},
              {"timing_fields", {"wall_time_s"}}}},
            {"metadata", std::move(metadata)},
            {"cells", std::move(cells)},
            {"aggregates", std::move(aggregates)}};
}

std::vector<std::string> validate_report(const nlohmann::json& doc) {
    std::vector<std::string> problems;
    auto need = [&](const nlohmann::json& obj, const std::string& key, const std::string& where) {
        if (!obj.is_object() || !obj.contains(key)) {
            problems.push_back(where + ": missing '" + key + "'");
            return false;
        }
        return true;
    };
    if (!need(doc, "schema_version", "report")) return problems;
    if (doc.at("schema_version") != 1) {
        problems.push_back("report: unsupported schema_version");
        return problems;
    }
    for (const char* key : {"schema", "metadata", "cells", "aggregates"})
        if (!need(doc, key, "report")) return problems;
    const auto& meta = doc.at("metadata");
    for (const char* key : {"dataset_fingerprint", "seed", "folds", "sizes", "methods", "minority_classes"})
        need(meta, key, "metadata");
    if (!problems.empty()) return problems;

    const auto folds = meta.at("folds").get<std::size_t>();
    const auto n_sizes = meta.at("sizes").size();
    const auto n_methods = meta.at("methods").size();
    const auto& cells = doc.at("cells");
    if (!cells.is_array() || cells.size() != folds * n_sizes * n_methods)
        problems.push_back("cells: expected " + std::to_string(folds * n_sizes * n_methods) + " entries");
    std::set<std::tuple<std::string, std::size_t, std::size_t>> seen;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        const std::string where = "cells[" + std::to_string(i) + "]";
        bool complete = true;
        for (const auto& key : kCellFields) complete = need(c, key, where) && complete;
        if (!complete) continue;
        if (!seen.emplace(c.at("method").get<std::string>(), c.at("size").get<std::size_t>(),
                          c.at("fold").get<std::size_t>())
                 .second)
            problems.push_back(where + ": duplicate cell key");
        const auto status = c.at("status").get<std::string>();
        if (status == "ok") {
            const auto& acc = c.at("test_accuracy");
            if (!acc.is_number() || acc.get<double>() < 0.0 || acc.get<double>() > 1.0)
                problems.push_back(where + ": test_accuracy outside [0, 1]");
        } else if (status != "failed") {
            problems.push_back(where + ": status must be ok or failed");
        }
    }
    for (std::size_t i = 0; i < doc.at("aggregates").size(); ++i)
        for (const auto& key : kAggregateFields)
            need(doc.at("aggregates")[i], key, "aggregates[" + std::to_string(i) + "]");
    return problems;
}

}  // namespace rebalance
