#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rebalance/error.hpp"
#include "rebalance/experiment.hpp"
#include "rebalance/random.hpp"

using namespace rebalance;

namespace {

ProtocolOptions quick_protocol() {
    ProtocolOptions p;
    p.classifier.hidden_units = 16;
    p.classifier.train.max_epochs = 15;
    return p;
}

EmbeddingDataset two_clusters(std::size_t per_class, std::uint64_t seed) {
    return make_synthetic_benchmark(separated_clusters(2, {per_class, per_class}, 4.0, 1.0, seed));
}

nlohmann::json strip_wall_time(nlohmann::json doc) {
    for (auto& c : doc["cells"]) c.erase("wall_time_s");
    return doc;
}

}  // namespace

TEST(Metrics, PerfectPredictor) {
    const int truth[] = {0, 1, 2, 1};
    const std::size_t pred[] = {0, 1, 2, 1};
    const auto m = metrics_from_predictions(truth, pred, 3);
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(m.macro_f1, 1.0);
}

TEST(Metrics, ConstantPredictorOnBalancedSet) {
    std::vector<int> truth;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 25; ++i) truth.push_back(c);
    const std::vector<std::size_t> pred(100, 2);
    EXPECT_DOUBLE_EQ(metrics_from_predictions(truth, pred, 4).accuracy, 0.25);
}

TEST(Metrics, HandWorkedConfusion) {
    // Class 0: TP=1 (row 0), FN=1 (row 1), FP=1 (row 2), TN=1 (row 3).
    const int truth[] = {0, 0, 1, 1};
    const std::size_t pred[] = {0, 1, 0, 1};
    const auto m = metrics_from_predictions(truth, pred, 2);
    EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
    EXPECT_DOUBLE_EQ(m.per_class_f1[0], 0.5);  // 2*1 / (2*1 + 1 + 1)
    EXPECT_DOUBLE_EQ(m.per_class_f1[1], 0.5);
    EXPECT_DOUBLE_EQ(m.per_class_recall[0], 0.5);
    EXPECT_EQ(m.confusion, (std::vector<std::vector<std::size_t>>{{1, 1}, {1, 1}}));

    // Three classes, asymmetric:
    //   0: TP 2, FP 0, FN 1 -> F1 = 4/5
    //   1: TP 1, FP 1, FN 1 -> F1 = 1/2
    //   2: TP 1, FP 1, FN 0 -> F1 = 2/3
    const int t3[] = {0, 0, 0, 1, 1, 2};
    const std::size_t p3[] = {0, 0, 1, 1, 2, 2};
    const auto m3 = metrics_from_predictions(t3, p3, 3);
    EXPECT_DOUBLE_EQ(m3.accuracy, 4.0 / 6.0);
    EXPECT_NEAR(m3.per_class_f1[0], 0.8, 1e-15);
    EXPECT_NEAR(m3.per_class_f1[1], 0.5, 1e-15);
    EXPECT_NEAR(m3.per_class_f1[2], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(m3.macro_f1, (0.8 + 0.5 + 2.0 / 3.0) / 3.0, 1e-15);
}

TEST(Metrics, AbsentClassIsNanAndExcluded) {
    const int truth[] = {0, 0, 1};
    const std::size_t pred[] = {0, 0, 1};
    const auto m = metrics_from_predictions(truth, pred, 3);
    EXPECT_TRUE(std::isnan(m.per_class_recall[2]));
    EXPECT_EQ(m.macro_f1, 1.0);
    EXPECT_TRUE(to_json(m)["per_class_recall"][2].is_null());
}

TEST(Benchmark, ShapeMeansAndDeterminism) {
    ClusterSpec spec{{{0.0, 0.0}, {4.0, 0.0}}, {100, 100}, 1.0, 3};
    const auto ds = make_synthetic_benchmark(spec);
    EXPECT_EQ(ds.size(), 200u);
    EXPECT_EQ(ds.dim(), 2u);
    EXPECT_EQ(class_histogram(ds), (std::map<int, std::size_t>{{0, 100}, {1, 100}}));
    for (int c = 0; c < 2; ++c) {
        double m[2] = {0, 0};
        for (auto i : ds.indices_of(c))
            for (int j = 0; j < 2; ++j) m[j] += ds.row(i)[j] / 100.0;
        for (int j = 0; j < 2; ++j) EXPECT_LT(std::abs(m[j] - spec.means[c][j]), 3.0 / std::sqrt(100.0));
    }
    EXPECT_EQ(make_synthetic_benchmark(spec), ds);
}

TEST(Projection, DiagonalCovarianceAlignsWithFirstAxis) {
    Rng rng(4);
    std::vector<double> v;
    for (int i = 0; i < 500; ++i) {
        v.push_back(2.0 * rng.normal());
        v.push_back(rng.normal());
    }
    const EmbeddingDataset ds(2, 2, v, std::vector<int>(500, 0));
    const auto p = project_2d(ds);
    ASSERT_EQ(p.points.size(), 500u);
    double corr_num = 0.0, sx = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < 500; ++i) {
        corr_num += p.points[i].x * ds.row(i)[0];
        sx += p.points[i].x * p.points[i].x;
        vx += ds.row(i)[0] * ds.row(i)[0];
        vy += p.points[i].y * p.points[i].y;
    }
    EXPECT_GT(std::abs(corr_num) / std::sqrt(sx * vx), 0.99);
    EXPECT_GE(sx, vy);
}

TEST(Projection, KeepsLabelsOriginsAndRowCount) {
    const EmbeddingDataset ds(3, 2, {0, 0, 0, 1, 2, 3, -1, 0, 5}, {0, 1, 1},
                              {Origin::Real, Origin::Smote, Origin::Real});
    const auto p = project_2d(ds);
    ASSERT_EQ(p.points.size(), 3u);
    EXPECT_EQ(p.points[1].label, 1);
    EXPECT_EQ(p.points[1].origin, Origin::Smote);
    const auto path = std::filesystem::temp_directory_path() / "rebalance_projection.csv";
    save_projection_csv(p, path);
    std::ifstream in(path);
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    EXPECT_EQ(line, "x,y,label,origin");
    while (std::getline(in, line)) rows += line.empty() ? 0 : 1;
    EXPECT_EQ(rows, 3u);
}

TEST(Protocol, BaselineAtFullSizeEqualsPlainRun) {
    const auto ds = two_clusters(60, 5);
    const auto opts = quick_protocol();
    const std::uint64_t fold_seed = 11;
    const auto seeds = cell_seeds(fold_seed, 48);
    auto split_spec = opts.split;
    split_spec.seed = seeds.split;
    const auto parts = split(ds, split_spec);
    ASSERT_EQ(class_histogram(parts.train)[1], 48u);

    auto copts = opts.classifier;
    copts.train.seed = seeds.classifier;
    const auto model = train_classifier(parts.train, &parts.valid, copts);
    const auto plain = evaluate(model, parts.test);

    const auto cell = run_single(ds, {1}, 48, baseline_arm(), fold_seed, opts);
    ASSERT_TRUE(cell.ok) << cell.error;
    EXPECT_EQ(cell.metrics.accuracy, plain.accuracy);
    EXPECT_EQ(cell.metrics.confusion, plain.confusion);
}

TEST(Protocol, ResampledTrainHistogramIsUniform) {
    const auto ds = two_clusters(80, 6);
    for (auto m : {Method::Smote, Method::BorderlineSmote, Method::Adasyn, Method::RandomOversample}) {
        ResamplerConfig cfg;
        cfg.method = m;
        const auto cell = run_single(ds, {1}, 8, resampler_arm(cfg), 3, quick_protocol());
        ASSERT_TRUE(cell.ok) << cell.error;
        EXPECT_EQ(cell.train_histogram.at(0), cell.train_histogram.at(1)) << method_name(m);
        EXPECT_EQ(cell.synthetic_in_eval, 0u);
    }
}

TEST(Protocol, FailingCellIsRecordedNotThrown) {
    const auto ds = two_clusters(20, 7);
    const auto cell = run_single(ds, {1}, 1024, baseline_arm(), 1, quick_protocol());
    EXPECT_FALSE(cell.ok);
    EXPECT_FALSE(cell.error.empty());
}

TEST(Sweep, GridShapeDeterminismAndValidation) {
    const auto ds = two_clusters(60, 8);
    SweepSpec spec;
    spec.sizes = {8, 16};
    spec.folds = 2;
    spec.seed = 4;
    spec.protocol = quick_protocol();
    ResamplerConfig cfg;
    cfg.method = Method::Smote;
    spec.arms = {resampler_arm(cfg)};
    spec = normalize_sweep(spec);
    ASSERT_EQ(spec.arms.size(), 2u);
    EXPECT_EQ(spec.arms[0].name, "none");

    const auto a = run_sweep(ds, spec, 1);
    EXPECT_EQ(a.cells.size(), 8u);
    EXPECT_TRUE(a.all_ok());
    const auto b = run_sweep(ds, spec, 3);
    const auto ja = to_json(a), jb = to_json(b);
    EXPECT_EQ(strip_wall_time(ja).dump(), strip_wall_time(jb).dump());
    EXPECT_TRUE(validate_report(ja).empty());
    EXPECT_EQ(ja["schema_version"], 1);

    auto broken = ja;
    broken["cells"].erase(0);
    EXPECT_FALSE(validate_report(broken).empty());
    broken = ja;
    broken["cells"][0]["test_accuracy"] = 1.5;
    EXPECT_FALSE(validate_report(broken).empty());
}

TEST(Sweep, SpecFromJson) {
    const auto doc = nlohmann::json::parse(R"({
        "methods": ["none", "smote", {"method": "adasyn", "k": 3, "name": "adasyn-k3"}],
        "sizes": [8, 16], "folds": 3, "seed": 9, "minority_classes": [1],
        "split": {"train": 0.8, "valid": 0.1, "test": 0.1},
        "classifier": {"hidden_units": 32, "train": {"max_epochs": 5}}
    })");
    const auto spec = sweep_spec_from_json(doc);
    ASSERT_EQ(spec.arms.size(), 3u);
    EXPECT_EQ(spec.arms[0].name, "none");
    EXPECT_EQ(spec.arms[2].name, "adasyn-k3");
    EXPECT_EQ(spec.arms[2].resampler->k, 3u);
    EXPECT_EQ(spec.folds, 3u);
    EXPECT_EQ(spec.protocol.classifier.hidden_units, 32u);
    EXPECT_EQ(spec.protocol.classifier.train.max_epochs, 5u);
    EXPECT_THROW(sweep_spec_from_json(nlohmann::json::parse(R"({"sizes": "x"})")), FormatError);
}
