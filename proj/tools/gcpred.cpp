// Command-line front end: prepare data, train models, run backtests and
// render consolidated reports, driven by a JSON config file. Exit codes:
// 0 success, 2 configuration, 3 data, 4 training, 5 backtest.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gcpred/backtest.hpp"
#include "gcpred/config.hpp"
#include "gcpred/model.hpp"
#include "gcpred/report.hpp"
#include "gcpred/serialize.hpp"
#include "gcpred/trainer.hpp"

namespace fs = std::filesystem;
using namespace gcpred;

namespace {

struct Overrides {
    std::string out;
    std::string split;
    std::string labeling;
    std::string preset;
    std::vector<std::uint64_t> seeds;
    double tau = -1.0;
    std::size_t jobs = 0;
};

void apply(const Overrides& o, RunConfig& cfg) {
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (!o.split.empty()) cfg.split = parse_split(o.split);
    if (!o.labeling.empty()) cfg.labeling = parse_labeling(o.labeling);
    if (!o.preset.empty()) cfg.presets = {o.preset};
    if (!o.seeds.empty()) cfg.seeds = o.seeds;
    if (o.tau >= 0.0) cfg.tau = o.tau;
    if (o.jobs > 0) cfg.jobs = o.jobs;
    validate_run_config(cfg);
}

std::vector<RawMarketTable> load_tables(const RunConfig& cfg) {
    std::vector<RawMarketTable> tables;
    for (Market m : kMarkets) {
        const std::string path = cfg.market_csv(m);
        if (!fs::exists(path)) {
            throw DataError(std::string("missing market file for ") + market_id(m) + ": " +
                            path);
        }
        tables.push_back(load_market_csv(path, m));
    }
    return tables;
}

std::string prepared_path(const RunConfig& cfg) { return cfg.out_dir + "/prepared.gcpd"; }

std::string weights_path(const RunConfig& cfg, const std::string& preset, std::uint64_t seed) {
    return cfg.out_dir + "/weights_" + preset + "_s" + std::to_string(seed) + ".gcw";
}

PreparedDataset load_prepared_checked(const RunConfig& cfg, const std::string& path) {
    if (!fs::exists(path)) throw DataError("prepared dataset not found: " + path);
    PreparedDataset ds = load_prepared(path);
    const std::uint64_t want = prepare_hash(cfg.prepare_options());
    if (ds.hash != want) {
        throw DataError("prepared dataset " + path +
                        " was built under a different configuration (stale data); re-run "
                        "prepare");
    }
    return ds;
}

int cmd_prepare(const RunConfig& cfg) {
    const PreparedDataset ds = prepare_dataset(load_tables(cfg), cfg.prepare_options());
    fs::create_directories(cfg.out_dir);
    save_prepared(prepared_path(cfg), ds);
    export_graph_edges(cfg.out_dir + "/graph_edges.txt", ds.graph);

    const GraphStats stats = graph_stats(ds.graph);
    std::cout << "prepared " << ds.dates.size() << " dates x " << ds.feature_names.size()
              << " features (" << ds.options.mode.str() << ", window " << ds.options.window
              << ")\n"
              << "samples: " << ds.sample_count() << " = " << ds.split_sizes.train << " train + "
              << ds.split_sizes.validation << " validation + " << ds.split_sizes.test
              << " test\n"
              << "graph: " << stats.edges << " edges, " << stats.isolated << " isolated of "
              << stats.nodes << " nodes, " << stats.components << " components (tau "
              << ds.options.tau << ")\n"
              << "wrote " << prepared_path(cfg) << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& prepared_file) {
    const std::string path = prepared_file.empty() ? prepared_path(cfg) : prepared_file;
    const PreparedDataset ds = load_prepared_checked(cfg, path);
    fs::create_directories(cfg.out_dir);

    const auto results = run_experiments(ds, cfg.experiment_config());
    for (const auto& pr : results) {
        for (const auto& run : pr.runs) {
            if (!run.ok) {
                std::cout << pr.preset << " seed " << run.seed << " failed: " << run.error
                          << "\n";
                continue;
            }
            auto net = resolve_network(pr.preset, cfg.custom_layouts, ds.options.window,
                                       ds.feature_names.size(), cfg.head(), cfg.pool);
            save_weights(weights_path(cfg, pr.preset, run.seed), run.weights,
                         config_hash(net));
        }
    }

    write_results_csv(cfg.out_dir + "/results.csv", results);
    const auto agg = aggregate_results(read_results_csv(cfg.out_dir + "/results.csv"));
    const std::string tables = render_f_tables(agg);
    std::ofstream(cfg.out_dir + "/fmeasure_tables.txt") << tables;
    std::cout << tables;
    return 0;
}

struct StrategyPredictions {
    std::string name;
    std::vector<std::array<int, kIndexCount>> classes;
    HeadKind head;
};

int cmd_backtest(const RunConfig& cfg, const std::string& prepared_file,
                 const std::vector<std::string>& weight_files,
                 const std::string& predictions_file) {
    const std::string path = prepared_file.empty() ? prepared_path(cfg) : prepared_file;
    const PreparedDataset ds = load_prepared_checked(cfg, path);
    fs::create_directories(cfg.out_dir);

    const TrainData data = train_data_from(ds, cfg.labeling);
    std::vector<std::string> test_dates;
    std::vector<std::size_t> test_anchors;
    for (const auto& s : data.test) {
        test_dates.push_back(s.date);
        test_anchors.push_back(s.anchor);
    }
    std::array<PnlSeries, kIndexCount> realized;
    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        realized[mi].dates = test_dates;
        for (auto a : test_anchors) realized[mi].values.push_back(ds.realized_return(mi, a));
    }

    BacktestReport report;
    report.rows.push_back(always_long_row(realized));

    std::vector<StrategyPredictions> strategies;
    if (!predictions_file.empty()) {
        const PredictionTable table = read_predictions_csv(predictions_file);
        if (table.dates != test_dates) {
            throw BacktestError(predictions_file +
                                ": prediction dates do not align with the test segment");
        }
        StrategyPredictions sp;
        sp.name = fs::path(predictions_file).stem().string();
        sp.classes = table.classes;
        sp.head = cfg.head();
        strategies.push_back(std::move(sp));
    }
    for (const auto& wf : weight_files) {
        if (!fs::exists(wf)) throw DataError("weights file not found: " + wf);
        const LoadedWeights lw = load_weights(wf);
        std::string matched;
        NetworkConfig net;
        for (const auto& name : cfg.presets) {
            auto candidate = resolve_network(name, cfg.custom_layouts, ds.options.window,
                                             ds.feature_names.size(), cfg.head(), cfg.pool);
            if (config_hash(candidate) == lw.config_hash) {
                matched = name;
                net = std::move(candidate);
                break;
            }
        }
        if (matched.empty()) {
            throw DataError(wf + ": config hash matches none of the configured presets");
        }
        Model model = build_model(net, ds.graph, 0);
        if (lw.params.size() != model.params.size()) {
            throw DataError(wf + ": parameter count mismatch");
        }
        for (std::size_t p = 0; p < model.params.size(); ++p) {
            if (lw.params.names[p] != model.params.names[p] ||
                lw.params.values[p].shape != model.params.values[p].shape) {
                throw DataError(wf + ": parameter layout mismatch at " + model.params.names[p]);
            }
        }
        model.params = lw.params;
        const PredictionSeries preds = predict(model, data, data.test);
        write_predictions_csv(cfg.out_dir + "/predictions_" + matched + ".csv", preds);
        StrategyPredictions sp;
        sp.name = matched;
        sp.classes = preds.classes;
        sp.head = model.config.head;
        strategies.push_back(std::move(sp));
    }

    for (const auto& sp : strategies) {
        std::array<PositionSeries, kIndexCount> positions;
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
            std::vector<int> classes;
            classes.reserve(sp.classes.size());
            for (const auto& row : sp.classes) classes.push_back(row[mi]);
            positions[mi] = sp.head == HeadKind::Ternary15
                                ? positions_from_ternary(test_dates, classes)
                                : positions_from_binary(test_dates, classes);
        }
        report.rows.push_back(backtest_row(sp.name, positions, realized));
    }

    write_backtest_csv(cfg.out_dir + "/backtest.csv", report);
    const std::string tables = render_backtest_tables(report);
    std::ofstream(cfg.out_dir + "/backtest_tables.txt") << tables;
    std::cout << tables;
    return 0;
}

int cmd_report(const std::string& results_dir) {
    if (!fs::exists(results_dir)) throw DataError("results directory not found: " + results_dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(results_dir)) {
        if (entry.path().extension() == ".csv") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no result CSVs under " + results_dir);

    std::vector<ResultRow> f_rows;
    BacktestReport merged;
    std::set<std::string> have_strategy;
    for (const auto& file : files) {
        try {
            auto rows = read_results_csv(file);
            f_rows.insert(f_rows.end(), rows.begin(), rows.end());
            continue;
        } catch (const DataError&) {
        }
        try {
            const BacktestReport report = read_backtest_csv(file);
            for (const auto& row : report.rows) {
                if (have_strategy.insert(row.strategy).second) merged.rows.push_back(row);
            }
        } catch (const DataError&) {
            // neither kind; the directory may hold unrelated CSVs
        }
    }

    std::string out;
    if (!f_rows.empty()) out += render_f_tables(aggregate_results(f_rows));
    if (!merged.rows.empty()) {
        if (!out.empty()) out += "\n";
        out += render_backtest_tables(merged);
    }
    if (out.empty()) throw DataError("no experiment results or backtests under " + results_dir);
    std::ofstream(results_dir + "/consolidated_report.txt") << out;
    std::cout << out;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph-augmented CNN stock index trend prediction"};
    app.require_subcommand(1);

    std::string config_path;
    std::string prepared_file;
    std::string predictions_file;
    std::string results_dir;
    std::vector<std::string> weight_files;
    Overrides overrides;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration")->required();
        cmd->add_option("--out", overrides.out, "output directory (overrides config)");
        cmd->add_option("--split", overrides.split, "split preset: 65-15-20 or 42-8-50");
        cmd->add_option("--labeling", overrides.labeling, "labeling scheme: 01 or 012");
        cmd->add_option("--seeds", overrides.seeds, "seed list (overrides config)")
            ->delimiter(',');
        cmd->add_option("--preset", overrides.preset, "single model preset (overrides config)");
        cmd->add_option("--tau", overrides.tau, "correlation threshold in (0,1]");
        cmd->add_option("--jobs", overrides.jobs, "parallel training jobs");
    };

    CLI::App* prepare = app.add_subcommand("prepare", "ingest CSVs into a prepared dataset");
    add_common(prepare);

    CLI::App* train = app.add_subcommand("train", "train presets on a prepared dataset");
    add_common(train);
    train->add_option("--prepared", prepared_file, "prepared dataset file");

    CLI::App* backtest = app.add_subcommand("backtest", "simulate trading on the test segment");
    add_common(backtest);
    backtest->add_option("--prepared", prepared_file, "prepared dataset file");
    backtest->add_option("--weights", weight_files, "trained weight files to evaluate");
    backtest->add_option("--predictions", predictions_file, "per-date class CSV to evaluate");

    CLI::App* report = app.add_subcommand("report", "consolidate result CSVs into tables");
    report->add_option("--results", results_dir, "directory of result CSVs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (report->parsed()) return cmd_report(results_dir);
        RunConfig cfg = load_run_config(config_path);
        apply(overrides, cfg);
        if (prepare->parsed()) return cmd_prepare(cfg);
        if (train->parsed()) return cmd_train(cfg, prepared_file);
        if (backtest->parsed()) {
            return cmd_backtest(cfg, prepared_file, weight_files, predictions_file);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const TrainError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const BacktestError& e) {
        std::cerr << "backtest error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
