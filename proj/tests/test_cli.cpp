// Integration tests driving the built gcpred binary end to end over the
// synthetic fixtures. The binary paths arrive via GCPRED_BIN and
// GCPRED_FIXTURES_BIN (set by CMake).

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gcpred/report.hpp"
#include "test_support.hpp"

using namespace gcpred;
using namespace gcpred::testsupport;
namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* env = std::getenv("GCPRED_BIN");
    if (!env) throw std::runtime_error("GCPRED_BIN not set");
    return env;
}

std::string fixtures_binary() {
    const char* env = std::getenv("GCPRED_FIXTURES_BIN");
    if (!env) throw std::runtime_error("GCPRED_FIXTURES_BIN not set");
    return env;
}

struct RunOutcome {
    int exit_code = -1;
    std::string output;
};

RunOutcome run(const std::string& cmd, const std::string& log_path) {
    const std::string full = cmd + " >" + log_path + " 2>&1";
    const int status = std::system(full.c_str());
    RunOutcome out;
    out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log_path);
    std::stringstream ss;
    ss << in.rdbuf();
    out.output = ss.str();
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream(path, std::ios::trunc) << content;
}

/// Shared workspace: fixtures plus a small fast config (pure-CNN preset).
class CliWorkspace {
public:
    CliWorkspace() : dir_("cli") {
        auto r = run(fixtures_binary() + " --out " + (dir_ / "data") + " --days 200 --seed 7",
                     dir_ / "fixtures.log");
        if (r.exit_code != 0) throw std::runtime_error("fixture generation failed: " + r.output);
        write_file(dir_ / "cfg.json", R"({
  "data_dir": ")" + (dir_ / "data") + R"(",
  "mode": "combined",
  "split": "65-15-20",
  "labeling": "01",
  "window": 16,
  "tau": 0.7,
  "presets": ["2D-CNNpred"],
  "seeds": [1, 2],
  "train": {"batch_size": 32, "max_epochs": 2, "patience": 1, "learning_rate": 0.003},
  "out_dir": ")" + (dir_ / "out") + R"("
})");
    }

    std::string config() const { return dir_ / "cfg.json"; }
    std::string out(const std::string& name) const { return dir_ / ("out/" + name); }
    std::string path(const std::string& name) const { return dir_ / name; }
    const TempDir& dir() const { return dir_; }

private:
    TempDir dir_;
};

CliWorkspace& workspace() {
    static CliWorkspace ws;
    return ws;
}

}  // namespace

TEST(Cli, PrepareIsIdempotent) {
    auto& ws = workspace();
    auto first = run(binary() + " prepare --config " + ws.config(), ws.path("prep1.log"));
    ASSERT_EQ(first.exit_code, 0) << first.output;
    EXPECT_NE(first.output.find("graph:"), std::string::npos);
    const std::string bytes1 = slurp(ws.out("prepared.gcpd"));
    const std::string edges1 = slurp(ws.out("graph_edges.txt"));
    ASSERT_FALSE(bytes1.empty());

    auto second = run(binary() + " prepare --config " + ws.config(), ws.path("prep2.log"));
    ASSERT_EQ(second.exit_code, 0);
    EXPECT_EQ(slurp(ws.out("prepared.gcpd")), bytes1);
    EXPECT_EQ(slurp(ws.out("graph_edges.txt")), edges1);
}

TEST(Cli, TrainProducesResultsAndWeights) {
    auto& ws = workspace();
    auto r = run(binary() + " train --config " + ws.config(), ws.path("train.log"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_TRUE(fs::exists(ws.out("results.csv")));
    EXPECT_TRUE(fs::exists(ws.out("weights_2D-CNNpred_s1.gcw")));
    EXPECT_TRUE(fs::exists(ws.out("weights_2D-CNNpred_s2.gcw")));
    EXPECT_NE(r.output.find("Mean F-measure"), std::string::npos);

    const auto rows = read_results_csv(ws.out("results.csv"));
    ASSERT_EQ(rows.size(), 2u);  // one row per (preset, seed)
    for (const auto& row : rows) {
        EXPECT_TRUE(row.ok);
        EXPECT_EQ(row.preset, "2D-CNNpred");
    }
}

TEST(Cli, PipelineIsByteDeterministic) {
    auto& ws = workspace();
    for (const char* tag : {"det_a", "det_b"}) {
        const std::string out = ws.path(tag);
        auto p = run(binary() + " prepare --config " + ws.config() + " --out " + out,
                     ws.path(std::string(tag) + "_prep.log"));
        ASSERT_EQ(p.exit_code, 0) << p.output;
        auto t = run(binary() + " train --config " + ws.config() + " --out " + out +
                         " --seeds 1",
                     ws.path(std::string(tag) + "_train.log"));
        ASSERT_EQ(t.exit_code, 0) << t.output;
    }
    for (const char* name : {"prepared.gcpd", "results.csv", "weights_2D-CNNpred_s1.gcw",
                             "fmeasure_tables.txt"}) {
        EXPECT_EQ(slurp(ws.path("det_a") + "/" + name), slurp(ws.path("det_b") + "/" + name))
            << name;
    }
}

TEST(Cli, BacktestFromWeightsAndPredictions) {
    auto& ws = workspace();
    // always-long only (no strategies)
    auto base = run(binary() + " backtest --config " + ws.config(), ws.path("bt0.log"));
    ASSERT_EQ(base.exit_code, 0) << base.output;
    EXPECT_NE(base.output.find("Always long"), std::string::npos);

    // from trained weights: writes the inferred prediction CSV
    auto wt = run(binary() + " backtest --config " + ws.config() + " --weights " +
                      ws.out("weights_2D-CNNpred_s1.gcw"),
                  ws.path("bt1.log"));
    ASSERT_EQ(wt.exit_code, 0) << wt.output;
    EXPECT_NE(wt.output.find("2D-CNNpred"), std::string::npos);
    ASSERT_TRUE(fs::exists(ws.out("predictions_2D-CNNpred.csv")));
    const std::string from_weights = slurp(ws.out("backtest.csv"));

    // feeding those predictions back reproduces the same strategy metrics
    auto pd = run(binary() + " backtest --config " + ws.config() + " --predictions " +
                      ws.out("predictions_2D-CNNpred.csv"),
                  ws.path("bt2.log"));
    ASSERT_EQ(pd.exit_code, 0) << pd.output;
    const BacktestReport a = read_backtest_csv(ws.out("backtest.csv"));
    BacktestReport b;
    {
        std::ofstream tmp(ws.path("bt_weights.csv"), std::ios::trunc);
        tmp << from_weights;
    }
    b = read_backtest_csv(ws.path("bt_weights.csv"));
    ASSERT_EQ(a.rows.size(), 2u);
    ASSERT_EQ(b.rows.size(), 2u);
    for (std::size_t c = 0; c <= kIndexCount; ++c) {
        EXPECT_EQ(a.rows[1].cells[c].sharpe.has_value(), b.rows[1].cells[c].sharpe.has_value());
        if (a.rows[1].cells[c].sharpe) {
            EXPECT_DOUBLE_EQ(*a.rows[1].cells[c].sharpe, *b.rows[1].cells[c].sharpe);
        }
    }
}

TEST(Cli, ReportMergesRunArtifacts) {
    auto& ws = workspace();
    auto r = run(binary() + " report --results " + ws.path("out"), ws.path("report.log"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("Mean F-measure"), std::string::npos);
    EXPECT_NE(r.output.find("Sharpe ratio"), std::string::npos);
    EXPECT_TRUE(fs::exists(ws.out("consolidated_report.txt")));
}

TEST(Cli, MissingMarketFileNamesTheMarket) {
    auto& ws = workspace();
    const std::string broken_data = ws.path("broken_data");
    fs::create_directories(broken_data);
    for (const char* m : {"SP500", "DJI", "NASDAQ", "NYSE"}) {  // RUSSELL missing
        fs::copy_file(ws.path("data/" + std::string(m) + ".csv"),
                      broken_data + "/" + std::string(m) + ".csv",
                      fs::copy_options::overwrite_existing);
    }
    write_file(ws.path("broken.json"), R"({"data_dir": ")" + broken_data +
                                           R"(", "window": 16, "out_dir": ")" +
                                           ws.path("broken_out") + R"("})");
    auto r = run(binary() + " prepare --config " + ws.path("broken.json"),
                 ws.path("broken.log"));
    EXPECT_EQ(r.exit_code, 3);  // data error class
    EXPECT_NE(r.output.find("RUSSELL"), std::string::npos) << r.output;
}

TEST(Cli, InconsistentHeadLabelingRejected) {
    auto& ws = workspace();
    write_file(ws.path("bad_head.json"),
               R"({"labeling": "01", "head": "ternary15", "out_dir": "x"})");
    auto r = run(binary() + " prepare --config " + ws.path("bad_head.json"),
                 ws.path("bad_head.log"));
    EXPECT_EQ(r.exit_code, 2);  // config error class
    EXPECT_NE(r.output.find("inconsistent"), std::string::npos) << r.output;
}

TEST(Cli, StalePreparedDataRefused) {
    auto& ws = workspace();
    // prepared.gcpd was built at tau 0.7; asking to train at tau 0.8 must fail
    auto r = run(binary() + " train --config " + ws.config() + " --tau 0.8",
                 ws.path("stale.log"));
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.output.find("stale"), std::string::npos) << r.output;
}

TEST(Cli, BadJsonAndBadFlagsAreConfigErrors) {
    auto& ws = workspace();
    write_file(ws.path("bad.json"), "{ not json");
    auto r = run(binary() + " prepare --config " + ws.path("bad.json"), ws.path("bad1.log"));
    EXPECT_EQ(r.exit_code, 2);

    auto r2 = run(binary() + " prepare --config " + ws.config() + " --tau 1.5",
                  ws.path("bad2.log"));
    EXPECT_EQ(r2.exit_code, 2);

    auto r3 = run(binary() + " nonsense", ws.path("bad3.log"));
    EXPECT_EQ(r3.exit_code, 2);
}
