#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "rebalance/classifier.hpp"
#include "rebalance/dataset.hpp"
#include "rebalance/error.hpp"
#include "rebalance/experiment.hpp"
#include "rebalance/resample.hpp"

namespace rebalance::cli {

namespace {

using nlohmann::json;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path + " is not valid JSON: " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

// Fills options that were not given on the command line from a JSON object
// keyed by long option name (dashes or underscores).
void merge_config(CLI::App& sub, const std::string& path) {
    const auto doc = read_json(path);
    if (!doc.is_object()) throw FormatError(path + ": config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        std::string name = key;
        std::replace(name.begin(), name.end(), '_', '-');
        CLI::Option* opt = nullptr;
        try {
            opt = sub.get_option("--" + name);
        } catch (const CLI::OptionNotFound&) {
            throw FormatError(path + ": unknown option '" + key + "' for " + sub.get_name());
        }
        if (opt->count() > 0 || name == "config") continue;
        if (value.is_array()) {
            for (const auto& item : value) opt->add_result(scalar_text(item));
        } else {
            opt->add_result(scalar_text(value));
        }
        opt->run_callback();
    }
}

// Every command echoes its fully resolved parameters before running.
void print_config(const std::string& command, json params) {
    params["command"] = command;
    std::cerr << "config: " << params.dump() << '\n';
}

void log_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) spdlog::warn("{}", w);
}

json histogram_json(const std::map<int, std::size_t>& h) {
    json out = json::object();
    for (const auto& [label, count] : h) out[std::to_string(label)] = count;
    return out;
}

// --- inspect --------------------------------------------------------------

struct InspectArgs {
    std::string in;
};

int run_inspect(const InspectArgs& a) {
    print_config("inspect", {{"in", a.in}});
    const auto data = load_dataset(a.in);
    std::cout << "n=" << data.size() << '\n';
    std::cout << "d=" << data.dim() << '\n';
    std::cout << "class_count=" << data.class_count() << '\n';
    for (const auto& [label, count] : class_histogram(data)) std::cout << "class " << label << ": " << count << '\n';
    std::size_t synthetic = 0;
    for (auto o : data.origins()) synthetic += is_synthetic(o) ? 1 : 0;
    std::cout << "origin real: " << data.size() - synthetic << '\n';
    std::cout << "origin synthetic: " << synthetic << '\n';
    return kOk;
}

// --- balance --------------------------------------------------------------

struct BalanceArgs {
    std::string config;
    std::string method;
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::string in;
    std::string out;
    std::string provenance;
    std::string metric = "euclidean";
    bool fallback = false;
    std::size_t latent_dim = 16;
    std::size_t vae_epochs = 200;
};

int run_balance(const BalanceArgs& a) {
    ResamplerConfig cfg;
    cfg.method = method_from_name(a.method);
    cfg.k = a.k;
    cfg.seed = a.seed;
    cfg.borderline_fallback = a.fallback;
    cfg.metric = a.metric == "cosine" ? Metric::Cosine : Metric::Euclidean;
    cfg.vae.latent_dim = a.latent_dim;
    cfg.vae.train.max_epochs = a.vae_epochs;

    auto params = to_json(cfg);
    params["in"] = a.in;
    params["out"] = a.out;
    params["provenance"] = a.provenance.empty() ? json(nullptr) : json(a.provenance);
    print_config("balance", std::move(params));

    const auto data = load_dataset(a.in);
    const auto result = balance(data, cfg);
    log_warnings(result.warnings);
    save_dataset(result.dataset, a.out);
    if (!a.provenance.empty()) save_provenance(result.provenance, a.provenance);

    json summary{{"n", result.dataset.size()},
                 {"synthetic", result.provenance.size()},
                 {"histogram", histogram_json(class_histogram(result.dataset))},
                 {"warnings", result.warnings}};
    std::cout << summary.dump() << '\n';
    return kOk;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string in;
    std::string valid;
    std::string out;
    std::size_t hidden = 128;
    double lr = 0.01;
    std::size_t batch = 32;
    std::size_t epochs = 200;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    bool standardize = false;
};

int run_train(const TrainArgs& a) {
    ClassifierOptions opts;
    opts.hidden_units = a.hidden;
    opts.standardize = a.standardize;
    opts.train = {a.lr, a.batch, a.epochs, a.seed, a.patience};

    print_config("train", {{"in", a.in},
                           {"valid", a.valid.empty() ? json(nullptr) : json(a.valid)},
                           {"out", a.out},
                           {"hidden_units", opts.hidden_units},
                           {"standardize", opts.standardize},
                           {"train", to_json(opts.train)}});

    const auto train = load_dataset(a.in);
    std::optional<EmbeddingDataset> valid;
    if (!a.valid.empty()) valid = load_dataset(a.valid);
    TrainHistory history;
    const auto model = train_classifier(train, valid ? &*valid : nullptr, opts, &history);
    save_classifier(model, a.out);

    json summary{{"epochs_run", history.train_loss.size()},
                 {"best_epoch", history.best_epoch},
                 {"final_train_loss", history.train_loss.empty() ? 0.0 : history.train_loss.back()}};
    if (!history.valid_loss.empty()) summary["best_valid_loss"] = history.valid_loss[history.best_epoch];
    std::cout << summary.dump() << '\n';
    return kOk;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    std::string config;
    std::string model;
    std::string in;
};

int run_evaluate(const EvaluateArgs& a) {
    print_config("evaluate", {{"model", a.model}, {"in", a.in}});
    const auto model = load_classifier(a.model);
    const auto data = load_dataset(a.in);
    std::cout << to_json(evaluate(model, data)).dump() << '\n';
    return kOk;
}

// --- sweep ----------------------------------------------------------------

struct SweepArgs {
    std::string config;
    std::string in;
    std::string out_report;
    std::size_t jobs = 1;
};

int run_sweep_command(const SweepArgs& a) {
    const auto doc = read_json(a.config);
    std::string in = a.in;
    if (in.empty() && doc.contains("dataset")) {
        const std::filesystem::path p = doc.at("dataset").get<std::string>();
        in = p.is_absolute() ? p.string() : (std::filesystem::path(a.config).parent_path() / p).string();
    }
    if (in.empty()) throw FormatError("sweep: no dataset given (use --in or a \"dataset\" key)");
    if (a.jobs == 0) throw PreconditionError("sweep: --jobs must be at least 1");

    const auto spec = sweep_spec_from_json(doc);
    const auto data = load_dataset(in);
    auto resolved = to_json(ExperimentReport{spec, fingerprint(data), {}, {}}).at("metadata");
    resolved["in"] = in;
    resolved["out_report"] = a.out_report;
    resolved["jobs"] = a.jobs;
    print_config("sweep", std::move(resolved));

    const auto report = run_sweep(data, spec, a.jobs);
    write_text(a.out_report, to_json(report).dump(2) + "\n");

    std::size_t failed = 0;
    for (const auto& c : report.cells) {
        if (c.ok) continue;
        ++failed;
        spdlog::error("cell {}/{}/{} failed: {}", c.key.method, c.key.size, c.key.fold, c.error);
    }
    std::cout << json{{"cells", report.cells.size()}, {"failed", failed}, {"report", a.out_report}}.dump() << '\n';
    return failed == 0 ? kOk : kPartialSweep;
}

// --- project --------------------------------------------------------------

struct ProjectArgs {
    std::string config;
    std::string in;
    std::string out;
};

int run_project(const ProjectArgs& a) {
    print_config("project", {{"in", a.in}, {"out", a.out}});
    const auto data = load_dataset(a.in);
    const auto projection = project_2d(data);
    log_warnings(projection.warnings);
    save_projection_csv(projection, a.out);
    std::cout << json{{"points", projection.points.size()}, {"out", a.out}}.dump() << '\n';
    return kOk;
}

// --- make-benchmark -------------------------------------------------------

struct BenchmarkArgs {
    std::string config;
    std::string out;
    std::size_t dim = 2;
    std::vector<std::size_t> counts{500, 500};
    double separation = 4.0;
    double variance = 1.0;
    std::uint64_t seed = 0;
};

int run_make_benchmark(const BenchmarkArgs& a) {
    print_config("make-benchmark", {{"out", a.out},
                                    {"dim", a.dim},
                                    {"counts", a.counts},
                                    {"separation", a.separation},
                                    {"variance", a.variance},
                                    {"seed", a.seed}});
    const auto spec = separated_clusters(a.dim, a.counts, a.separation, a.variance, a.seed);
    const auto data = make_synthetic_benchmark(spec);
    save_dataset(data, a.out);
    std::cout << json{{"n", data.size()}, {"histogram", histogram_json(class_histogram(data))}}.dump() << '\n';
    return kOk;
}

CLI::Option* add_config(CLI::App* sub, std::string& target) {
    return sub->add_option("--config", target, "JSON file with defaults for options not given explicitly")
        ->check(CLI::ExistingFile);
}

// Stores the handler and, when a config file is present, merges it first.
template <typename Args>
void bind(CLI::App* sub, std::shared_ptr<Args> args, int (*run)(const Args&), Handler& selected,
          bool merge = true) {
    sub->callback([sub, args, run, &selected, merge] {
        if constexpr (requires { args->config; }) {
            if (merge && !args->config.empty()) merge_config(*sub, args->config);
        }
        selected = [args, run] { return run(*args); };
    });
}

}  // namespace

void register_commands(CLI::App& app, Handler& selected) {
    app.require_subcommand(1);

    {
        auto a = std::make_shared<InspectArgs>();
        auto* sub = app.add_subcommand("inspect", "Print size, dimension and histograms of an embedding file");
        sub->add_option("--in,in", a->in, "Embedding file (.csv or EMB1 binary)")->required();
        bind(sub, a, run_inspect, selected);
    }
    {
        auto a = std::make_shared<BalanceArgs>();
        auto* sub = app.add_subcommand("balance", "Oversample every class up to the majority count");
        add_config(sub, a->config);
        sub->add_option("--method", a->method, "smote | borderline | adasyn | ros | vae");
        sub->add_option("--k", a->k, "Neighbors for SMOTE-family methods")->capture_default_str();
        sub->add_option("--seed", a->seed, "Master seed")->capture_default_str();
        sub->add_option("--in", a->in, "Input embedding file");
        sub->add_option("--out", a->out, "Output embedding file");
        sub->add_option("--provenance", a->provenance, "Write a JSON provenance sidecar here");
        sub->add_option("--metric", a->metric, "euclidean | cosine")
            ->check(CLI::IsMember({"euclidean", "cosine"}))
            ->capture_default_str();
        sub->add_flag("--fallback", a->fallback, "Borderline: use SMOTE for classes without DANGER samples");
        sub->add_option("--latent-dim", a->latent_dim, "VAE latent size")->capture_default_str();
        sub->add_option("--vae-epochs", a->vae_epochs, "VAE maximum epochs")->capture_default_str();
        sub->callback([sub, a, &selected] {
            if (!a->config.empty()) merge_config(*sub, a->config);
            for (const char* name : {"--method", "--in", "--out"})
                if (sub->get_option(name)->count() == 0)
                    throw CLI::RequiredError(name);
            selected = [a] { return run_balance(*a); };
        });
    }
    {
        auto a = std::make_shared<TrainArgs>();
        auto* sub = app.add_subcommand("train", "Train the MLP classifier and write a JSON checkpoint");
        add_config(sub, a->config);
        sub->add_option("--in", a->in, "Training embedding file");
        sub->add_option("--valid", a->valid, "Validation file for early stopping");
        sub->add_option("--out", a->out, "Checkpoint path");
        sub->add_option("--hidden", a->hidden, "Hidden units")->capture_default_str();
        sub->add_option("--lr", a->lr, "Learning rate")->capture_default_str();
        sub->add_option("--batch", a->batch, "Mini-batch size")->capture_default_str();
        sub->add_option("--epochs", a->epochs, "Maximum epochs")->capture_default_str();
        sub->add_option("--patience", a->patience, "Early-stop patience (0 disables)")->capture_default_str();
        sub->add_option("--seed", a->seed, "Master seed")->capture_default_str();
        sub->add_flag("--standardize", a->standardize, "Standardize inputs with training statistics");
        sub->callback([sub, a, &selected] {
            if (!a->config.empty()) merge_config(*sub, a->config);
            for (const char* name : {"--in", "--out"})
                if (sub->get_option(name)->count() == 0)
                    throw CLI::RequiredError(name);
            selected = [a] { return run_train(*a); };
        });
    }
    {
        auto a = std::make_shared<EvaluateArgs>();
        auto* sub = app.add_subcommand("evaluate", "Print accuracy, macro-F1 and confusion matrix as JSON");
        add_config(sub, a->config);
        sub->add_option("--model", a->model, "Classifier checkpoint");
        sub->add_option("--in", a->in, "Test embedding file");
        sub->callback([sub, a, &selected] {
            if (!a->config.empty()) merge_config(*sub, a->config);
            for (const char* name : {"--model", "--in"})
                if (sub->get_option(name)->count() == 0)
                    throw CLI::RequiredError(name);
            selected = [a] { return run_evaluate(*a); };
        });
    }
    {
        auto a = std::make_shared<SweepArgs>();
        auto* sub = app.add_subcommand("sweep", "Run the method x size x fold grid and write a JSON report");
        sub->add_option("--config", a->config, "Sweep spec (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--in", a->in, "Embedding file (overrides the spec's \"dataset\")");
        sub->add_option("--out-report", a->out_report, "Report path")->required();
        sub->add_option("--jobs", a->jobs, "Parallel grid cells")->capture_default_str();
        bind(sub, a, run_sweep_command, selected, false);
    }
    {
        auto a = std::make_shared<ProjectArgs>();
        auto* sub = app.add_subcommand("project", "Write a 2-D PCA projection as CSV");
        add_config(sub, a->config);
        sub->add_option("--in", a->in, "Embedding file");
        sub->add_option("--out", a->out, "CSV path (x,y,label,origin)");
        sub->callback([sub, a, &selected] {
            if (!a->config.empty()) merge_config(*sub, a->config);
            for (const char* name : {"--in", "--out"})
                if (sub->get_option(name)->count() == 0)
                    throw CLI::RequiredError(name);
            selected = [a] { return run_project(*a); };
        });
    }
    {
        auto a = std::make_shared<BenchmarkArgs>();
        auto* sub = app.add_subcommand("make-benchmark", "Generate separated Gaussian clusters");
        add_config(sub, a->config);
        sub->add_option("--out", a->out, "Output embedding file");
        sub->add_option("--dim", a->dim, "Dimension")->capture_default_str();
        sub->add_option("--counts", a->counts, "Samples per class, comma separated")
            ->delimiter(',')
            ->capture_default_str();
        sub->add_option("--separation", a->separation, "Distance between adjacent means in standard deviations")
            ->capture_default_str();
        sub->add_option("--variance", a->variance, "Per-coordinate variance")->capture_default_str();
        sub->add_option("--seed", a->seed, "Master seed")->capture_default_str();
        sub->callback([sub, a, &selected] {
            if (!a->config.empty()) merge_config(*sub, a->config);
            if (sub->get_option("--out")->count() == 0) throw CLI::RequiredError("--out");
            selected = [a] { return run_make_benchmark(*a); };
        });
    }
}

}  // namespace rebalance::cli
