#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcpred/dataprep.hpp"
#include "gcpred/model.hpp"
#include "gcpred/prepared.hpp"
#include "gcpred/trainer.hpp"

namespace gcpred {

/// One experiment's declarative setup. Field names match the JSON config
/// file keys; anything omitted keeps its default. The head kind is implied
/// by the labeling scheme ("01" -> five sigmoid outputs, "012" -> five
/// softmax triples); an explicit "head" entry must agree.
struct RunConfig {
    std::string data_dir = ".";
    std::map<std::string, std::string> market_files;  // MARKET -> csv path
    PanelMode mode = PanelMode::Combined();
    SplitSpec split = SplitSpec::split_65_15_20();
    Labeling labeling = Labeling::Binary01;
    std::size_t window = 60;
    double tau = 0.7;
    bool signed_threshold = false;
    PoolKind pool = PoolKind::Mean;
    std::vector<std::string> presets = {"2D-CNNpred", "3D-CNNpred",  "GAT",
                                        "GCN",        "GAT-CNNpred", "GCN-CNNpred"};
    LayoutMap custom_layouts;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    TrainConfig train;
    std::size_t jobs = 1;
    std::string out_dir = "out";

    HeadKind head() const {
        return labeling == Labeling::Binary01 ? HeadKind::Binary5 : HeadKind::Ternary15;
    }

    std::string market_csv(Market m) const {
        const auto it = market_files.find(market_id(m));
        const std::string name = it != market_files.end() ? it->second
                                                          : std::string(market_id(m)) + ".csv";
        if (!name.empty() && name.front() == '/') return name;
        return data_dir + "/" + name;
    }

    PrepareOptions prepare_options() const {
        PrepareOptions opt;
        opt.mode = mode;
        opt.window = window;
        opt.split = split;
        opt.tau = tau;
        opt.signed_threshold = signed_threshold;
        return opt;
    }

    ExperimentConfig experiment_config() const {
        ExperimentConfig cfg;
        cfg.presets = presets;
        cfg.custom = custom_layouts;
        cfg.seeds = seeds;
        cfg.labeling = labeling;
        cfg.pool = pool;
        cfg.train = train;
        cfg.jobs = jobs;
        return cfg;
    }
};

inline SplitSpec parse_split(const std::string& text) {
    if (text == "65-15-20") return SplitSpec::split_65_15_20();
    if (text == "42-8-50") return SplitSpec::split_42_8_50();
    // custom a-b-c percentages
    int a, b, c;
    if (std::sscanf(text.c_str(), "%d-%d-%d", &a, &b, &c) == 3 && a + b + c == 100 && a > 0 &&
        b > 0 && c > 0) {
        return SplitSpec{a / 100.0, b / 100.0, c / 100.0};
    }
    throw ConfigError("unrecognized split '" + text + "' (expected 65-15-20 or 42-8-50)");
}

inline Labeling parse_labeling(const std::string& text) {
    if (text == "01") return Labeling::Binary01;
    if (text == "012") return Labeling::Ternary012;
    throw ConfigError("unrecognized labeling '" + text + "' (expected 01 or 012)");
}

inline PoolKind parse_pool(const std::string& text) {
    if (text == "mean") return PoolKind::Mean;
    if (text == "max") return PoolKind::Max;
    if (text == "fc") return PoolKind::FullyConnected;
    throw ConfigError("unrecognized pooling '" + text + "' (expected mean, max or fc)");
}

inline void validate_run_config(const RunConfig& cfg) {
    if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) {
        throw ConfigError("tau must lie in (0, 1], got " + std::to_string(cfg.tau));
    }
    if (cfg.window == 0) throw ConfigError("window must be positive");
    if (cfg.seeds.empty()) throw ConfigError("need at least one seed");
    if (cfg.presets.empty()) throw ConfigError("need at least one model preset");
    for (const auto& name : cfg.presets) {
        if (!cfg.custom_layouts.count(name)) preset_config(name, cfg.window, 1, cfg.head());
    }
    for (const auto& [name, layout] : cfg.custom_layouts) {
        try {
            preset_config(name, cfg.window, 1, cfg.head());
            throw ConfigError("layout name '" + name + "' shadows a built-in preset");
        } catch (const ConfigError& e) {
            if (std::string(e.what()).find("shadows") != std::string::npos) throw;
        }
        if (layout.stages.empty()) throw ConfigError("layout '" + name + "' has no stages");
    }
    if (cfg.train.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (cfg.train.max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (cfg.train.patience >= cfg.train.max_epochs) {
        throw ConfigError("patience must be smaller than max_epochs");
    }
}

inline Stage stage_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.size() != 1) {
        throw ConfigError("each layout stage must be an object with exactly one key");
    }
    if (j.contains("conv")) {
        const auto& c = j.at("conv");
        ConvBlockSpec spec;
        if (c.contains("filters")) spec.filters = c.at("filters").get<std::size_t>();
        if (c.contains("kernel")) spec.kernel = c.at("kernel").get<std::size_t>();
        if (c.contains("pool")) spec.pool = c.at("pool").get<std::size_t>();
        return spec;
    }
    if (j.contains("graph")) {
        const auto& g = j.at("graph");
        GraphStackSpec spec;
        const std::string kind = g.at("kind").get<std::string>();
        if (kind == "gcn") spec.kind = GraphKind::GCN;
        else if (kind == "gat") spec.kind = GraphKind::GAT;
        else throw ConfigError("graph stage kind must be 'gcn' or 'gat'");
        spec.channels = g.at("channels").get<std::vector<std::size_t>>();
        return spec;
    }
    if (j.contains("pool")) {
        return GraphPoolSpec{parse_pool(j.at("pool").get<std::string>())};
    }
    throw ConfigError("layout stage must be one of 'conv', 'graph' or 'pool'");
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (const char* env = std::getenv("GCPRED_DATA_DIR")) cfg.data_dir = env;
    if (j.contains("data_dir")) cfg.data_dir = j.at("data_dir").get<std::string>();
    if (j.contains("markets")) {
        for (const auto& [key, value] : j.at("markets").items()) {
            if (!market_from_id(key)) throw ConfigError("unknown market '" + key + "'");
            cfg.market_files[key] = value.get<std::string>();
        }
    }
    if (j.contains("mode")) {
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "combined") {
            cfg.mode = PanelMode::Combined();
        } else if (mode == "single") {
            if (!j.contains("market")) throw ConfigError("single mode needs a 'market' entry");
            const auto m = market_from_id(j.at("market").get<std::string>());
            if (!m) throw ConfigError("unknown market in config");
            cfg.mode = PanelMode::Single(*m);
        } else {
            throw ConfigError("mode must be 'combined' or 'single'");
        }
    }
    if (j.contains("split")) cfg.split = parse_split(j.at("split").get<std::string>());
    if (j.contains("labeling")) cfg.labeling = parse_labeling(j.at("labeling").get<std::string>());
    if (j.contains("head")) {
        const std::string head = j.at("head").get<std::string>();
        const bool binary = head == "binary5";
        const bool ternary = head == "ternary15";
        if (!binary && !ternary) throw ConfigError("head must be 'binary5' or 'ternary15'");
        if (binary != (cfg.labeling == Labeling::Binary01)) {
            throw ConfigError("head '" + head + "' is inconsistent with labeling '" +
                              labeling_id(cfg.labeling) + "'");
        }
    }
    if (j.contains("window")) cfg.window = j.at("window").get<std::size_t>();
    if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
    if (j.contains("signed_threshold")) cfg.signed_threshold = j.at("signed_threshold").get<bool>();
    if (j.contains("pooling")) cfg.pool = parse_pool(j.at("pooling").get<std::string>());
    if (j.contains("presets")) cfg.presets = j.at("presets").get<std::vector<std::string>>();
    if (j.contains("preset")) cfg.presets = {j.at("preset").get<std::string>()};
    if (j.contains("layouts")) {
        for (const auto& [name, spec] : j.at("layouts").items()) {
            CustomLayout layout;
            for (const auto& stage : spec.at("stages")) layout.stages.push_back(
                stage_from_json(stage));
            if (spec.contains("hidden")) layout.hidden = spec.at("hidden").get<std::size_t>();
            cfg.custom_layouts[name] = std::move(layout);
        }
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<std::size_t>();
        if (t.contains("max_epochs")) cfg.train.max_epochs = t.at("max_epochs").get<std::size_t>();
        if (t.contains("patience")) cfg.train.patience = t.at("patience").get<std::size_t>();
        if (t.contains("learning_rate")) cfg.train.learning_rate = t.at("learning_rate").get<double>();
    }
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<std::size_t>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    validate_run_config(cfg);
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    try {
        return run_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace gcpred
