// Acceptance suite: one line per criterion, PASS / FAIL / SKIP, nonzero
// exit if anything fails. Criteria 8 and 9 need the real five-market
// dataset; point GCPRED_CANONICAL_DATA at a directory of SP500.csv,
// DJI.csv, NASDAQ.csv, NYSE.csv and RUSSELL.csv to enable them, otherwise
// they are reported as skipped and the invariant criteria stand alone.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gcpred/backtest.hpp"
#include "gcpred/config.hpp"
#include "gcpred/fixtures.hpp"
#include "gcpred/gradcheck.hpp"
#include "gcpred/model.hpp"
#include "gcpred/report.hpp"
#include "gcpred/serialize.hpp"
#include "gcpred/trainer.hpp"
#include "test_support.hpp"

using namespace gcpred;
using namespace gcpred::testsupport;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool pass = true;
    bool skipped = false;
    std::string detail;
};

Check pass(std::string detail = "") { return {true, false, std::move(detail)}; }
Check fail(std::string detail) { return {false, false, std::move(detail)}; }
Check skip(std::string detail) { return {true, true, std::move(detail)}; }

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// --- criterion 1: gradient fidelity -----------------------------------------

double layer_fd_error(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                      const std::vector<Array>& leaves) {
    return grad_check(f, leaves);
}

Check criterion_gradients() {
    std::mt19937_64 rng(2024);
    auto graph = random_graph(6, 0.5, rng);
    std::string detail;
    double worst = 0.0;
    auto note = [&](const std::string& name, double err) {
        worst = std::max(worst, err);
        if (err >= 1e-4) detail += name + " err " + fmt("%.2e", err) + "; ";
    };

    // individual layer types (inputs kept away from kinks)
    {
        std::vector<Array> leaves{random_array({10, 3}, rng), random_array({3, 3, 4}, rng),
                                  random_array({4}, rng, 0.3, 1.0)};
        note("conv-block", layer_fd_error(
                               [](Tape& t, const std::vector<Var>& v) {
                                   return vsum(conv_block(v[0], v[1], v[2], 2));
                               },
                               leaves));
    }
    {
        std::vector<Array> leaves{random_array({6, 3}, rng), random_array({3, 4}, rng)};
        note("gcn-layer", layer_fd_error(
                              [&graph](Tape& t, const std::vector<Var>& v) {
                                  return vsum(gcn_layer(v[0], graph, v[1]));
                              },
                              leaves));
    }
    {
        std::vector<Array> leaves{random_array({6, 3}, rng), random_array({3, 4}, rng),
                                  random_array({8}, rng)};
        note("gat-layer", layer_fd_error(
                              [&graph](Tape& t, const std::vector<Var>& v) {
                                  return vsum(gat_layer(v[0], graph, v[1], v[2]));
                              },
                              leaves));
    }
    {
        std::vector<Array> leaves{random_array({6, 4}, rng, 0.1, 1.0)};
        note("pool-mean", layer_fd_error(
                              [](Tape& t, const std::vector<Var>& v) {
                                  return vsum(graph_pool(v[0], PoolKind::Mean));
                              },
                              leaves));
        note("pool-max", layer_fd_error(
                             [](Tape& t, const std::vector<Var>& v) {
                                 return vsum(graph_pool(v[0], PoolKind::Max));
                             },
                             leaves));
    }
    {
        std::vector<Array> leaves{random_array({6, 4}, rng), random_array({6}, rng)};
        note("pool-fc", layer_fd_error(
                            [](Tape& t, const std::vector<Var>& v) {
                                return vsum(graph_pool(v[0], PoolKind::FullyConnected, v[1]));
                            },
                            leaves));
    }
    {
        const std::vector<int> y{1, 0, 1, 1, 0};
        std::vector<Array> leaves{random_array({12}, rng), random_array({12, 5}, rng),
                                  random_array({5}, rng)};
        note("head-binary", layer_fd_error(
                                [&y](Tape& t, const std::vector<Var>& v) {
                                    return bce_loss(sigmoid(dense(v[0], v[1], v[2])), y);
                                },
                                leaves));
    }
    {
        const std::vector<int> y{0, 2, 1, 2, 0};
        std::vector<Array> leaves{random_array({12}, rng), random_array({12, 15}, rng),
                                  random_array({15}, rng)};
        note("head-ternary",
             layer_fd_error(
                 [&y](Tape& t, const std::vector<Var>& v) {
                     return group_ce_loss(softmax(reshape(dense(v[0], v[1], v[2]), {5, 3}), 1),
                                          y);
                 },
                 leaves));
    }

    // full preset networks at d=8, F=6 (structure-preserving toy extents;
    // the literal twin kernel-5 conv chains need d >= 16). Kink-adjacent
    // draws are re-sampled: a certified point is one where the check agrees.
    const std::vector<int> tern_labels{0, 2, 1, 2, 0};
    for (const auto& name : all_preset_names()) {
        double best = std::numeric_limits<double>::infinity();
        for (std::uint64_t draw = 0; draw < 8 && best >= 1e-4; ++draw) {
            std::mt19937_64 draw_rng(4000 * draw + 11);
            auto model =
                build_model(toy_preset(name, HeadKind::Ternary15, 8, 6), graph, 31 + draw);
            const Array input = random_array({8, 6}, draw_rng);
            best = std::min(best, grad_check(
                                      [&](Tape& t, const std::vector<Var>& vars) {
                                          return group_ce_loss(
                                              model_forward(t, model, vars, input), tern_labels);
                                      },
                                      model.params.values));
        }
        note("preset " + name, best);
    }

    if (worst < 1e-4) return pass("max rel err " + fmt("%.2e", worst));
    return fail(detail);
}

// --- criterion 2: dense oracle equivalence ----------------------------------

Check criterion_oracles() {
    std::mt19937_64 rng(7777);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t F = 2 + trial % 11;  // F <= 12
        auto g = random_graph(F, 0.4, rng);
        Array x = random_array({F, 3}, rng);
        Array w = random_array({3, 4}, rng);
        Array a = random_array({8}, rng);
        Tape t;
        const Array& gcn_fast = t.value(gcn_layer(t.leaf(x), g, t.leaf(w)));
        const Array gcn_slow = dense_gcn_oracle(x, g, w);
        const Array& gat_fast = t.value(gat_layer(t.leaf(x), g, t.leaf(w), t.leaf(a)));
        const Array gat_slow = dense_gat_oracle(x, g, w, a);
        for (std::size_t i = 0; i < gcn_fast.numel(); ++i) {
            worst = std::max(worst, std::abs(gcn_fast.data[i] - gcn_slow.data[i]));
            worst = std::max(worst, std::abs(gat_fast.data[i] - gat_slow.data[i]));
        }
    }
    if (worst <= 1e-12) return pass("max abs diff " + fmt("%.2e", worst) + " over 100 graphs");
    return fail("max abs diff " + fmt("%.2e", worst));
}

// --- criterion 3: equivariance ----------------------------------------------

Check criterion_equivariance() {
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t F = 3 + trial % 10;
        auto g = random_graph(F, 0.5, rng);
        Array x = random_array({F, 3}, rng);
        Array w = random_array({3, 2}, rng);
        Array a = random_array({4}, rng);
        std::vector<std::uint32_t> pi(F);
        std::iota(pi.begin(), pi.end(), 0u);
        std::shuffle(pi.begin(), pi.end(), rng);

        std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
        for (auto [u, v] : g.edges) edges.emplace_back(pi[u], pi[v]);
        auto pg = FeatureGraph::from_edges(F, std::move(edges));
        Array px({F, 3});
        for (std::size_t v = 0; v < F; ++v)
            for (std::size_t c = 0; c < 3; ++c) px.at(pi[v], c) = x.at(v, c);

        Tape t;
        const Array& gcn1 = t.value(gcn_layer(t.leaf(x), g, t.leaf(w)));
        const Array& gcn2 = t.value(gcn_layer(t.leaf(px), pg, t.leaf(w)));
        const Array& gat1 = t.value(gat_layer(t.leaf(x), g, t.leaf(w), t.leaf(a)));
        const Array& gat2 = t.value(gat_layer(t.leaf(px), pg, t.leaf(w), t.leaf(a)));
        for (std::size_t v = 0; v < F; ++v)
            for (std::size_t c = 0; c < 2; ++c) {
                if (gcn1.at(v, c) != gcn2.at(pi[v], c)) {
                    return fail("gcn layer not bit-equivariant at trial " +
                                std::to_string(trial));
                }
                if (gat1.at(v, c) != gat2.at(pi[v], c)) {
                    return fail("gat layer not bit-equivariant at trial " +
                                std::to_string(trial));
                }
            }
        Var xa = t.leaf(x), xb = t.leaf(px);
        if (t.value(graph_pool(xa, PoolKind::Mean)).data !=
                t.value(graph_pool(xb, PoolKind::Mean)).data ||
            t.value(graph_pool(xa, PoolKind::Max)).data !=
                t.value(graph_pool(xb, PoolKind::Max)).data) {
            return fail("pooling not bit-invariant at trial " + std::to_string(trial));
        }
    }
    return pass("100 random instances, bit-level");
}

// --- criterion 4: shape ledger ----------------------------------------------

Check criterion_shapes() {
    auto graph = ring_graph(138);
    struct Expect {
        const char* name;
        std::size_t flattened;
    };
    const Expect expects[] = {
        {"GAT-CNNpred", 96}, {"CNN-GAT", 120}, {"CNN-GAT-CNN", 96},
        {"GCN-CNNpred", 96}, {"CNN-GCN", 60},  {"CNN-GCN-CNN", 96},
    };
    std::mt19937_64 rng(5);
    for (const auto& e : expects) {
        auto cfg = preset_config(e.name, 60, 138, HeadKind::Ternary15);
        const auto ledger = infer_shapes(cfg);
        if (ledger.flattened != e.flattened) {
            return fail(std::string(e.name) + ": inferred flatten width " +
                        std::to_string(ledger.flattened) + ", expected " +
                        std::to_string(e.flattened));
        }
        // model_forward checks each observed stage shape against the ledger
        // and throws on the first mismatch
        auto model = build_model(cfg, graph, 1);
        const Array out = infer(model, random_array({60, 138}, rng, 0.0, 0.1));
        if (out.shape != std::vector<std::size_t>{5, 3}) {
            return fail(std::string(e.name) + ": head shape " + shape_str(out.shape));
        }
    }
    // the derived hybrid time extents 60 -> 28 -> 12
    const auto ledger = infer_shapes(preset_config("GAT-CNNpred", 60, 138, HeadKind::Binary5));
    if (ledger.after_stage[1].dims() != std::vector<std::size_t>{60, 10} ||
        ledger.after_stage[2].dims() != std::vector<std::size_t>{28, 8} ||
        ledger.after_stage[3].dims() != std::vector<std::size_t>{12, 8}) {
        return fail("hybrid time extents do not follow 60 -> 28 -> 12");
    }
    return pass("six presets at d=60, F=138; conv chain 60->28->12");
}

// --- criterion 5: pipeline determinism ----------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

Check criterion_determinism() {
    const char* bin = std::getenv("GCPRED_BIN");
    TempDir dir("accept5");
    fs::create_directories(dir / "data");
    fixtures::write_fixture_set(dir / "data", 200, 7);
    {
        std::ofstream cfg(dir / "cfg.json", std::ios::trunc);
        cfg << "{\n  \"data_dir\": \"" << (dir / "data") << "\",\n  \"window\": 16,\n"
            << "  \"labeling\": \"01\",\n  \"presets\": [\"2D-CNNpred\"],\n  \"seeds\": [1],\n"
            << "  \"train\": {\"batch_size\": 32, \"max_epochs\": 2, \"patience\": 1},\n"
            << "  \"out_dir\": \"unused\"\n}\n";
    }
    const char* artifacts[] = {"prepared.gcpd", "results.csv", "weights_2D-CNNpred_s1.gcw"};

    if (bin) {
        for (const char* tag : {"a", "b"}) {
            const std::string out = dir / ("run_" + std::string(tag));
            const std::string log = dir / (std::string(tag) + ".log");
            const std::string base = std::string(bin) + " --config " + (dir / "cfg.json") +
                                     " --out " + out + " >> " + log + " 2>&1";
            if (std::system(("\"" + std::string(bin) + "\" prepare --config " +
                             (dir / "cfg.json") + " --out " + out + " > " + log + " 2>&1")
                                .c_str()) != 0) {
                return fail("prepare failed; see " + log);
            }
            if (std::system(("\"" + std::string(bin) + "\" train --config " +
                             (dir / "cfg.json") + " --out " + out + " >> " + log + " 2>&1")
                                .c_str()) != 0) {
                return fail("train failed; see " + log);
            }
        }
        for (const char* name : artifacts) {
            if (slurp(dir / ("run_a/" + std::string(name))) !=
                slurp(dir / ("run_b/" + std::string(name)))) {
                return fail(std::string(name) + " differs between identical runs");
            }
        }
        return pass("prepare+train twice via the CLI, artifacts byte-identical");
    }

    // in-process fallback when the CLI path is not provided
    RunConfig cfg = load_run_config(dir / "cfg.json");
    for (const char* tag : {"a", "b"}) {
        const std::string out = dir / ("run_" + std::string(tag));
        fs::create_directories(out);
        std::vector<RawMarketTable> tables;
        for (Market m : kMarkets) tables.push_back(load_market_csv(cfg.market_csv(m), m));
        const PreparedDataset ds = prepare_dataset(tables, cfg.prepare_options());
        save_prepared(out + "/prepared.gcpd", ds);
        const auto results = run_experiments(ds, cfg.experiment_config());
        write_results_csv(out + "/results.csv", results);
        save_weights(out + "/weights_2D-CNNpred_s1.gcw", results[0].runs[0].weights, 1);
    }
    for (const char* name : artifacts) {
        if (slurp(dir / ("run_a/" + std::string(name))) !=
            slurp(dir / ("run_b/" + std::string(name)))) {
            return fail(std::string(name) + " differs between identical runs");
        }
    }
    return pass("prepare+train twice in-process, artifacts byte-identical");
}

// --- criterion 6: learning sanity ----------------------------------------------

Check criterion_learning() {
    const SyntheticData sd = make_separable_dataset(48, 24, 6, 77);
    const TrainData data = sd.view();
    auto graph = ring_graph(6);
    std::string detail;
    bool ok = true;
    for (const auto& name : all_preset_names()) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto outcome = preset_learning_sanity(name, data, graph, 24, 6);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!outcome.passed || secs > 120.0) {
            ok = false;
            detail += name + " best " + fmt("%.3f", outcome.best_accuracy) + " in " +
                      fmt("%.1f", secs) + "s; ";
        }
    }
    if (ok) return pass("all presets > 0.95 train accuracy within 50 epochs");
    return fail(detail);
}

// --- criterion 7: backtest math -------------------------------------------------

Check criterion_backtest_math() {
    const double s = sharpe({0.02, 0.0, 0.01});
    if (std::abs(s - 1.224744871391589) > 1e-10) {
        return fail("sharpe([0.02,0,0.01]) = " + fmt("%.12f", s));
    }
    const double ann = annualize(0.1143);
    if (std::abs(ann - 1.814457) > 1e-4 || std::abs(ann - 1.8) > 0.05) {
        return fail("annualize(0.1143) = " + fmt("%.6f", ann));
    }
    if (std::abs(annualize(0.043) - 0.6826) > 1e-3) {
        return fail("annualize(0.043) = " + fmt("%.6f", annualize(0.043)));
    }
    if (std::abs(ceq({0.01, -0.01}) - (-5e-5)) > 1e-15) {
        return fail("ceq([0.01,-0.01]) = " + fmt("%.3e", ceq({0.01, -0.01})));
    }
    if (ceq({0.007, 0.007}) != 0.007) return fail("ceq of constant series");
    if (std::abs(ceq({0.02, 0.0, 0.01}, CeqParams{0.0}) - 0.01) > 1e-15) {
        return fail("ceq with gamma 0");
    }
    bool threw = false;
    try {
        sharpe({0.01, 0.01});
    } catch (const BacktestError&) {
        threw = true;
    }
    if (!threw) return fail("zero-variance Sharpe did not report as undefined");
    return pass("sharpe 1.2247; annualized 1.8145 / 0.6826; ceq values exact");
}

// --- criteria 8 and 9: canonical dataset ------------------------------------------

std::vector<RawMarketTable> load_canonical(const std::string& dir) {
    std::vector<RawMarketTable> tables;
    for (Market m : kMarkets) {
        const std::string path = dir + "/" + market_id(m) + ".csv";
        if (!fs::exists(path)) throw DataError("missing " + path);
        tables.push_back(load_market_csv(path, m));
    }
    return tables;
}

Check criterion_always_long(const char* data_dir) {
    if (!data_dir) return skip("set GCPRED_CANONICAL_DATA to run");
    const auto tables = load_canonical(data_dir);
    struct Case {
        SplitSpec split;
        double expect;
    };
    const Case cases[] = {
        {SplitSpec::split_65_15_20(), 0.1143},
        {SplitSpec::split_42_8_50(), 0.04283},
    };
    std::string detail;
    for (const auto& c : cases) {
        PrepareOptions opt;
        opt.split = c.split;
        const PreparedDataset ds = prepare_dataset(tables, opt);
        const TrainData data = train_data_from(ds, Labeling::Ternary012);
        std::vector<std::string> dates;
        std::array<PnlSeries, kIndexCount> realized;
        for (const auto& s : data.test) dates.push_back(s.date);
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
            realized[mi].dates = dates;
            for (const auto& s : data.test)
                realized[mi].values.push_back(ds.realized_return(mi, s.anchor));
        }
        const BacktestRow row = always_long_row(realized);
        if (!row.cells[kIndexCount].sharpe) return fail("combination Sharpe undefined");
        const double got = *row.cells[kIndexCount].sharpe;
        detail += c.split.str() + ": " + fmt("%.4f", got) + " (expect " +
                  fmt("%.4f", c.expect) + ") ";
        if (std::abs(got - c.expect) > 0.01) {
            return fail(detail + "- outside +/-0.01 (boundary-date conventions documented)");
        }
    }
    return pass(detail);
}

Check criterion_directional(const char* data_dir) {
    if (!data_dir) {
        return skip("set GCPRED_CANONICAL_DATA to run (criteria 1-7 stand alone without it)");
    }
    const auto tables = load_canonical(data_dir);
    PrepareOptions opt;
    const PreparedDataset ds = prepare_dataset(tables, opt);
    ExperimentConfig cfg;
    cfg.presets = {"2D-CNNpred", "3D-CNNpred", "GAT-CNNpred", "GCN-CNNpred"};
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.labeling = Labeling::Binary01;
    const auto results = run_experiments(ds, cfg);
    auto mean_of = [&](const std::string& name) {
        for (const auto& r : results)
            if (r.preset == name) return r.mean();
        throw Error("missing preset " + name);
    };
    const auto m2d = mean_of("2D-CNNpred");
    const auto m3d = mean_of("3D-CNNpred");
    std::string detail;
    for (const char* hybrid : {"GAT-CNNpred", "GCN-CNNpred"}) {
        const auto mh = mean_of(hybrid);
        int wins = 0;
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
            const double cnn_mean = (m2d[mi] + m3d[mi]) / 2.0;
            if (mh[mi] > cnn_mean) ++wins;
        }
        detail += std::string(hybrid) + " beats the pure-CNN mean on " + std::to_string(wins) +
                  "/5 indices; ";
        if (wins < 3) return fail(detail);
    }
    return pass(detail);
}

}  // namespace

int main() {
    const char* canonical = std::getenv("GCPRED_CANONICAL_DATA");
    struct Criterion {
        int id;
        const char* title;
        std::function<Check()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient fidelity (layers, pools, heads, full presets)", criterion_gradients},
        {2, "message-passing dense-oracle equivalence", criterion_oracles},
        {3, "permutation equivariance / pooling invariance", criterion_equivariance},
        {4, "static shape ledger at d=60, F=138", criterion_shapes},
        {5, "pipeline determinism (prepare + train)", criterion_determinism},
        {6, "learning sanity on a separable dataset", criterion_learning},
        {7, "backtest metric values", criterion_backtest_math},
        {8, "always-long calibration on the canonical dataset",
         [canonical] { return criterion_always_long(canonical); }},
        {9, "hybrid-over-baseline directional claim",
         [canonical] { return criterion_directional(canonical); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Check result;
        try {
            result = c.run();
        } catch (const std::exception& e) {
            result = fail(std::string("exception: ") + e.what());
        }
        const char* status = result.skipped ? "SKIP" : (result.pass ? "PASS" : "FAIL");
        if (!result.pass) ++failures;
        std::printf("%s criterion %d: %s%s%s\n", status, c.id, c.title,
                    result.detail.empty() ? "" : " -- ", result.detail.c_str());
        std::fflush(stdout);
    }
    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    return 0;
}
