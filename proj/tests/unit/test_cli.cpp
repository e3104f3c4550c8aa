#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rebalance/dataset.hpp"
#include "rebalance/experiment.hpp"

using namespace rebalance;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("rebalance_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    Outcome run(const std::string& args, const std::string& env = "") const {
        const auto out = path("stdout.txt"), err = path("stderr.txt");
        const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + REBALANCE_CLI + "' " + args + " >'" +
                                out.string() + "' 2>'" + err.string() + "'";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

    fs::path dir_;
};

std::string first_error_line(const std::string& err) {
    std::istringstream in(err);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("error:", 0) == 0) return line;
    return "";
}

nlohmann::json without_wall_time(nlohmann::json doc) {
    for (auto& c : doc["cells"]) c.erase("wall_time_s");
    return doc;
}

}  // namespace

TEST_F(Cli, InspectPrintsSortedHistogram) {
    ASSERT_EQ(run("make-benchmark --out b.emb --counts 7,3,5 --dim 2 --seed 1").code, 0);
    const auto r = run("inspect b.emb");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("n=15\nd=2\nclass_count=3\nclass 0: 7\nclass 1: 3\nclass 2: 5\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("origin real: 15"), std::string::npos);
    EXPECT_NE(r.err.find("config: "), std::string::npos);
}

TEST_F(Cli, InspectTruncatedFileExitsTwoWithOffset) {
    ASSERT_EQ(run("make-benchmark --out b.emb --counts 5,5").code, 0);
    const auto bytes = slurp(path("b.emb"));
    std::ofstream(path("t.emb"), std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
    const auto r = run("inspect t.emb");
    EXPECT_EQ(r.code, 2);
    const auto line = first_error_line(r.err);
    EXPECT_EQ(line.rfind("error:format:", 0), 0u) << r.err;
    EXPECT_NE(line.find("byte offset"), std::string::npos);
}

TEST_F(Cli, InspectEmptyDataset) {
    save_dataset(EmbeddingDataset(4, 2), path("empty.emb"));
    const auto r = run("inspect --in empty.emb");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("n=0\n", 0), 0u);
}

TEST_F(Cli, MissingFileIsIoError) {
    const auto r = run("inspect nothere.emb");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(first_error_line(r.err).rfind("error:io:", 0), 0u);
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("balance --in x.emb").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    const auto r = run("balance --method smote --in x.emb --out y.emb --k notanumber");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(first_error_line(r.err).rfind("error:usage:", 0), 0u);
}

TEST_F(Cli, BalanceSmoteAndDeterminism) {
    ASSERT_EQ(run("make-benchmark --out b.emb --counts 100,40 --dim 3 --seed 2").code, 0);
    auto r = run("balance --method smote --k 5 --seed 7 --in b.emb --out s1.emb --provenance p1.json");
    ASSERT_EQ(r.code, 0) << r.err;
    r = run("balance --method smote --k 5 --seed 7 --in b.emb --out s2.emb --provenance p2.json");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(path("s1.emb")), slurp(path("s2.emb")));
    EXPECT_EQ(slurp(path("p1.json")), slurp(path("p2.json")));

    const auto inspect = run("inspect s1.emb");
    EXPECT_NE(inspect.out.find("class 0: 100\nclass 1: 100\n"), std::string::npos) << inspect.out;
    EXPECT_NE(inspect.out.find("origin synthetic: 60"), std::string::npos);
    const auto prov = nlohmann::json::parse(slurp(path("p1.json")));
    EXPECT_EQ(prov.size(), 60u);
}

TEST_F(Cli, BalanceEveryMethod) {
    ASSERT_EQ(run("make-benchmark --out b.csv --counts 50,20 --dim 2 --seed 3").code, 0);
    for (const char* m : {"smote", "borderline", "adasyn", "ros", "vae"}) {
        const auto r = run(std::string("balance --fallback --vae-epochs 5 --method ") + m + " --in b.csv --out o.emb");
        ASSERT_EQ(r.code, 0) << m << r.err;
        EXPECT_NE(run("inspect o.emb").out.find("class 0: 50\nclass 1: 50\n"), std::string::npos) << m;
    }
}

TEST_F(Cli, PreconditionFailuresExitThree) {
    ASSERT_EQ(run("make-benchmark --out one.emb --counts 10,1 --seed 1").code, 0);
    auto r = run("balance --method vae --in one.emb --out x.emb");
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(first_error_line(r.err).rfind("error:method:", 0), 0u) << r.err;
    EXPECT_FALSE(fs::exists(path("x.emb")));
    EXPECT_EQ(run("balance --method bogus --in one.emb --out x.emb").code, 3);

    // Borderline without a fallback on clusters with no DANGER points.
    ASSERT_EQ(run("make-benchmark --out far.emb --counts 40,20 --separation 60 --seed 1").code, 0);
    EXPECT_EQ(run("balance --method borderline --in far.emb --out x.emb").code, 3);
    EXPECT_EQ(run("balance --method borderline --fallback --in far.emb --out x.emb").code, 0);
}

TEST_F(Cli, ConfigFileMergesUnderExplicitFlags) {
    ASSERT_EQ(run("make-benchmark --out b.emb --counts 30,10 --seed 4").code, 0);
    write("cfg.json", R"({"method": "ros", "seed": 9, "k": 3})");
    const auto r = run("balance --config cfg.json --in b.emb --out o.emb --seed 4");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto pos = r.err.find("config: ");
    ASSERT_NE(pos, std::string::npos);
    const auto cfg = nlohmann::json::parse(r.err.substr(pos + 8, r.err.find('\n', pos) - pos - 8));
    EXPECT_EQ(cfg["method"], "ros");
    EXPECT_EQ(cfg["seed"], 4);
    EXPECT_EQ(cfg["k"], 3);

    write("bad.json", R"({"no_such_option": 1})");
    EXPECT_EQ(run("balance --config bad.json --in b.emb --out o.emb --method smote").code, 2);
}

TEST_F(Cli, LogLevelControlsWarnings) {
    ASSERT_EQ(run("make-benchmark --out b.emb --counts 30,3 --seed 5").code, 0);
    const auto info = run("balance --method smote --k 5 --in b.emb --out o.emb", "REBALANCE_LOG=info");
    ASSERT_EQ(info.code, 0);
    EXPECT_NE(info.err.find("clamped"), std::string::npos);
    const auto quiet = run("balance --method smote --k 5 --in b.emb --out o.emb", "REBALANCE_LOG=error");
    ASSERT_EQ(quiet.code, 0);
    EXPECT_EQ(quiet.err.find("warning"), std::string::npos);
    EXPECT_EQ(slurp(path("o.emb")).size() > 0, true);
}

TEST_F(Cli, TrainThenEvaluateOnSeparatedClusters) {
    ASSERT_EQ(run("make-benchmark --out train.emb --counts 300,300 --separation 4 --seed 10").code, 0);
    ASSERT_EQ(run("make-benchmark --out test.emb --counts 200,200 --separation 4 --seed 11").code, 0);
    auto r = run("train --in train.emb --out model.json --epochs 40 --seed 1");
    ASSERT_EQ(r.code, 0) << r.err;
    r = run("evaluate --model model.json --in test.emb");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto metrics = nlohmann::json::parse(r.out);
    EXPECT_GT(metrics["accuracy"].get<double>(), 0.95);

    // Oracle: nearest true mean on the same test set.
    const auto test = load_dataset(path("test.emb"));
    const auto spec = separated_clusters(2, {200, 200}, 4.0, 1.0, 11);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        double best = 1e300;
        int arg = 0;
        for (int c = 0; c < 2; ++c) {
            double d = 0.0;
            for (std::size_t j = 0; j < 2; ++j) d += std::pow(test.row(i)[j] - spec.means[c][j], 2);
            if (d < best) best = d, arg = c;
        }
        correct += arg == test.label(i) ? 1 : 0;
    }
    EXPECT_GT(static_cast<double>(correct) / test.size(), 0.95);
}

TEST_F(Cli, EvaluateDimensionMismatchExitsThree) {
    ASSERT_EQ(run("make-benchmark --out a.emb --counts 20,20 --dim 2").code, 0);
    ASSERT_EQ(run("make-benchmark --out b.emb --counts 20,20 --dim 3").code, 0);
    ASSERT_EQ(run("train --in a.emb --out m.json --epochs 2").code, 0);
    const auto r = run("evaluate --model m.json --in b.emb");
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(first_error_line(r.err).rfind("error:method:", 0), 0u);
    write("junk.json", "{not json");
    EXPECT_EQ(run("evaluate --model junk.json --in b.emb").code, 2);
}

TEST_F(Cli, ProjectThreePoints) {
    write("three.csv", "label,f0,f1,f2\n0,0,0,0\n1,1,2,3\n1,-1,0,5\n");
    const auto r = run("project --in three.csv --out p.csv");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(slurp(path("p.csv")));
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    EXPECT_EQ(line, "x,y,label,origin");
    while (std::getline(in, line)) rows += line.empty() ? 0 : 1;
    EXPECT_EQ(rows, 3u);
}

TEST_F(Cli, SweepReportShapeValidityAndDeterminism) {
    ASSERT_EQ(run("make-benchmark --out b.emb --counts 100,100 --seed 6").code, 0);
    write("spec.json", R"({"dataset": "b.emb", "methods": ["none", "smote"], "sizes": [8, 16], "folds": 2,
                           "seed": 3, "classifier": {"hidden_units": 16, "train": {"max_epochs": 10}}})");
    ASSERT_EQ(run("sweep --config spec.json --out-report r1.json").code, 0);
    ASSERT_EQ(run("sweep --config spec.json --out-report r2.json --jobs 3").code, 0);
    const auto a = nlohmann::json::parse(slurp(path("r1.json")));
    const auto b = nlohmann::json::parse(slurp(path("r2.json")));
    EXPECT_EQ(a["cells"].size(), 8u);
    EXPECT_TRUE(validate_report(a).empty());
    EXPECT_EQ(without_wall_time(a).dump(), without_wall_time(b).dump());
}

TEST_F(Cli, SweepWithFailingCellsExitsFour) {
    ASSERT_EQ(run("make-benchmark --out b.emb --counts 40,40 --seed 6").code, 0);
    write("spec.json", R"({"methods": ["none"], "sizes": [8, 1024], "folds": 1,
                           "classifier": {"hidden_units": 8, "train": {"max_epochs": 3}}})");
    const auto r = run("sweep --config spec.json --in b.emb --out-report r.json");
    EXPECT_EQ(r.code, 4);
    const auto report = nlohmann::json::parse(slurp(path("r.json")));
    EXPECT_EQ(report["cells"].size(), 2u);
    EXPECT_TRUE(validate_report(report).empty());

    write("nodata.json", R"({"methods": ["none"]})");
    EXPECT_EQ(run("sweep --config nodata.json --out-report r.json").code, 2);
}
