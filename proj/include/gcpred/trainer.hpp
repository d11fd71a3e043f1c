#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <future>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "gcpred/adam.hpp"
#include "gcpred/model.hpp"
#include "gcpred/prepared.hpp"
#include "gcpred/tape.hpp"

namespace gcpred {

// ---------------------------------------------------------------------------
// losses (tape primitives wrapped under the trainer's names)
// ---------------------------------------------------------------------------

/// Mean binary cross-entropy over the five sigmoid outputs.
inline Var loss_binary(const Var& head_out, const std::array<int, kIndexCount>& labels) {
    return bce_loss(head_out, std::vector<int>(labels.begin(), labels.end()));
}

/// Mean per-group cross-entropy over the five softmax triples.
inline Var loss_ternary(const Var& head_out, const std::array<int, kIndexCount>& labels) {
    return group_ce_loss(head_out, std::vector<int>(labels.begin(), labels.end()));
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

/// Macro-averaged F-measure: unweighted mean of per-class F1 over the whole
/// class set. A class with no predictions and no occurrences contributes
/// F1 = 0 (both precision and recall take the 0/0 -> 0 convention).
inline double macro_f(const std::vector<int>& preds, const std::vector<int>& labels,
                      int num_classes) {
    if (preds.empty() || preds.size() != labels.size()) {
        throw TrainError("macro_f: need equal, nonempty prediction and label series");
    }
    double sum_f1 = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const bool p = preds[i] == c, l = labels[i] == c;
            tp += p && l;
            fp += p && !l;
            fn += !p && l;
        }
        const double prec = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                                        : 0.0;
        const double rec = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                                       : 0.0;
        sum_f1 += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    return sum_f1 / static_cast<double>(num_classes);
}

// ---------------------------------------------------------------------------
// training data view
// ---------------------------------------------------------------------------

/// Chronological sample splits over one normalized panel.
struct TrainData {
    const Array* panel = nullptr;
    std::size_t window = 0;
    std::vector<WindowSample> train, validation, test;

    Array input_of(const WindowSample& s) const { return window_input(*panel, s.anchor, window); }
};

/// Splits a prepared dataset's samples into the stored chronological
/// segments under the requested labeling scheme.
inline TrainData train_data_from(const PreparedDataset& ds, Labeling scheme) {
    TrainData td;
    td.panel = &ds.features;
    td.window = ds.options.window;
    auto samples = ds.samples(scheme);
    const auto& sz = ds.split_sizes;
    td.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(sz.train));
    td.validation.assign(samples.begin() + static_cast<std::ptrdiff_t>(sz.train),
                         samples.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.validation));
    td.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.validation),
                   samples.end());
    return td;
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;
    double learning_rate = 1e-3;
    /// Optional per-epoch observer (model state after the update, 1-based
    /// epoch). Returning true stops training after the current epoch.
    std::function<bool(const Model&, std::size_t)> on_epoch;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_metric = 0.0;  // macro-F (binary) or validation loss (ternary)
};

struct TrainResult {
    ParamSet best_params;
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;   // 1-based epoch of the kept weights
    double best_metric = 0.0;
};

namespace detail {

inline Var sample_loss(Tape& tape, const Model& model, const std::vector<Var>& vars,
                       const Array& input, const std::array<int, kIndexCount>& labels) {
    Var out = model_forward(tape, model, vars, input);
    return model.config.head == HeadKind::Binary5 ? loss_binary(out, labels)
                                                  : loss_ternary(out, labels);
}

inline double eval_mean_loss(const Model& model, const TrainData& data,
                             const std::vector<WindowSample>& samples) {
    double total = 0.0;
    for (const auto& s : samples) {
        Tape tape;
        const auto vars = param_vars(tape, model.params);
        total += tape.value(sample_loss(tape, model, vars, data.input_of(s), s.labels)).data[0];
    }
    return total / static_cast<double>(samples.size());
}

/// Mean over indices of the per-index macro-F of discretized predictions.
inline double eval_macro_f(const Model& model, const TrainData& data,
                           const std::vector<WindowSample>& samples) {
    const int classes = model.config.head == HeadKind::Binary5 ? 2 : 3;
    std::array<std::vector<int>, kIndexCount> preds, labels;
    for (const auto& s : samples) {
        const auto cls = discretize(infer(model, data.input_of(s)), model.config.head);
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
            preds[mi].push_back(cls[mi]);
            labels[mi].push_back(s.labels[mi]);
        }
    }
    double sum = 0.0;
    for (std::size_t mi = 0; mi < kIndexCount; ++mi)
        sum += macro_f(preds[mi], labels[mi], classes);
    return sum / static_cast<double>(kIndexCount);
}

}  // namespace detail

/// Fraction of correctly classified (sample, index) pairs.
inline double accuracy(const Model& model, const TrainData& data,
                       const std::vector<WindowSample>& samples) {
    std::size_t hits = 0;
    for (const auto& s : samples) {
        const auto cls = discretize(infer(model, data.input_of(s)), model.config.head);
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) hits += cls[mi] == s.labels[mi];
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size() * kIndexCount);
}

/// Mini-batch training with seeded shuffling and validation-based model
/// selection. Binary heads select on validation macro-F (higher wins),
/// ternary heads on validation loss (lower wins); ties keep the earlier
/// epoch. Stops after `patience` epochs without improvement. The final
/// partial batch of an epoch is used, not dropped.
inline TrainResult train(Model& model, const TrainData& data, const TrainConfig& cfg,
                         std::uint64_t seed) {
    if (data.train.empty() || data.validation.empty()) {
        throw TrainError("train: empty training or validation split");
    }
    if (cfg.batch_size == 0) throw ConfigError("train: batch size must be positive");
    if (cfg.max_epochs == 0) throw ConfigError("train: need at least one epoch");
    if (cfg.patience >= cfg.max_epochs) {
        throw ConfigError("train: patience must be smaller than max epochs");
    }

    AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;
    AdamState adam = AdamState::init(model.params, adam_cfg);
    std::mt19937_64 shuffle_rng(seed ^ 0x9E3779B97F4A7C15ull);

    const bool binary = model.config.head == HeadKind::Binary5;
    TrainResult result;
    result.best_params = model.params;
    result.best_metric = binary ? -std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t stale = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            model.params.zero_grads();
            double batch_loss = 0.0;
            for (std::size_t i = start; i < stop; ++i) {
                const auto& s = data.train[order[i]];
                Tape tape;
                const auto vars = param_vars(tape, model.params);
                Var loss = detail::sample_loss(tape, model, vars, data.input_of(s), s.labels);
                batch_loss += tape.value(loss).data[0];
                tape.backward(loss, inv);
                accumulate_grads(tape, vars, model.params);
            }
            if (!std::isfinite(batch_loss)) {
                throw TrainError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(start / cfg.batch_size));
            }
            epoch_loss += batch_loss;
            adam_step(model.params, adam);
        }

        EpochStats stats;
        stats.train_loss = epoch_loss / static_cast<double>(data.train.size());
        stats.val_metric = binary ? detail::eval_macro_f(model, data, data.validation)
                                  : detail::eval_mean_loss(model, data, data.validation);
        result.history.push_back(stats);

        const bool improved = binary ? stats.val_metric > result.best_metric
                                     : stats.val_metric < result.best_metric;
        if (improved) {
            result.best_metric = stats.val_metric;
            result.best_params = model.params;
            result.best_epoch = epoch;
            stale = 0;
        } else {
            ++stale;
            if (stale > cfg.patience) break;
        }
        if (cfg.on_epoch && cfg.on_epoch(model, epoch)) break;
    }
    model.params = result.best_params;
    return result;
}

// ---------------------------------------------------------------------------
// prediction series and per-index evaluation
// ---------------------------------------------------------------------------

inline PredictionSeries predict(const Model& model, const TrainData& data,
                                const std::vector<WindowSample>& samples) {
    PredictionSeries out;
    out.head = model.config.head;
    for (const auto& s : samples) {
        const Array raw = infer(model, data.input_of(s));
        out.dates.push_back(s.date);
        out.anchors.push_back(s.anchor);
        out.classes.push_back(discretize(raw, model.config.head));
        out.raw.push_back(raw.data);
    }
    return out;
}

/// Per-index macro-F of a model on a sample list.
inline std::array<double, kIndexCount> per_index_macro_f(
    const Model& model, const TrainData& data, const std::vector<WindowSample>& samples) {
    const int classes = model.config.head == HeadKind::Binary5 ? 2 : 3;
    const PredictionSeries preds = predict(model, data, samples);
    std::array<double, kIndexCount> out{};
    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        std::vector<int> p, l;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            p.push_back(preds.classes[i][mi]);
            l.push_back(samples[i].labels[mi]);
        }
        out[mi] = macro_f(p, l, classes);
    }
    return out;
}

// ---------------------------------------------------------------------------
// experiment runner
// ---------------------------------------------------------------------------

struct SeedRun {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::array<double, kIndexCount> macro_f{};  // test macro-F per index
    ParamSet weights;
    std::vector<EpochStats> history;
};

struct PresetResult {
    std::string preset;
    std::vector<SeedRun> runs;

    /// Mean over successful runs; absent (nullopt-like NaN) when none.
    std::array<double, kIndexCount> mean() const { return aggregate(false); }
    std::array<double, kIndexCount> best() const { return aggregate(true); }

private:
    std::array<double, kIndexCount> aggregate(bool take_best) const {
        std::array<double, kIndexCount> out{};
        out.fill(std::numeric_limits<double>::quiet_NaN());
        std::size_t n = 0;
        for (const auto& r : runs) {
            if (!r.ok) continue;
            ++n;
            for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
                if (n == 1) out[mi] = r.macro_f[mi];
                else if (take_best) out[mi] = std::max(out[mi], r.macro_f[mi]);
                else out[mi] += r.macro_f[mi];
            }
        }
        if (!take_best && n > 1) {
            for (auto& v : out) v /= static_cast<double>(n);
        }
        return out;
    }
};

/// An explicit stage list registered under a model name, used alongside
/// the built-in presets.
struct CustomLayout {
    std::vector<Stage> stages;
    std::size_t hidden = 0;
};

using LayoutMap = std::map<std::string, CustomLayout>;

/// Resolves a model name to a network config: custom layouts first, then
/// the built-in presets.
inline NetworkConfig resolve_network(const std::string& name, const LayoutMap& custom,
                                     std::size_t window, std::size_t features, HeadKind head,
                                     PoolKind pool) {
    const auto it = custom.find(name);
    if (it == custom.end()) return preset_config(name, window, features, head, pool);
    NetworkConfig cfg;
    cfg.name = name;
    cfg.layout = it->second.stages;
    cfg.hidden = it->second.hidden;
    cfg.window = window;
    cfg.features = features;
    cfg.head = head;
    return cfg;
}

struct ExperimentConfig {
    std::vector<std::string> presets;
    LayoutMap custom;  // explicit stage lists, looked up before the presets
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    Labeling labeling = Labeling::Binary01;
    PoolKind pool = PoolKind::Mean;
    TrainConfig train;
    std::size_t jobs = 1;  // independent (preset, seed) jobs may run in parallel
};

/// Trains every (preset, seed) pair and evaluates test macro-F per index.
/// Individual job failures are recorded and leave their table cells absent.
/// Jobs are independent; results land in preset-major, seed-minor order
/// regardless of scheduling.
inline std::vector<PresetResult> run_experiments(const PreparedDataset& ds,
                                                 const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw ConfigError("run_experiments: need at least one seed");
    if (cfg.presets.empty()) throw ConfigError("run_experiments: need at least one preset");
    const HeadKind head =
        cfg.labeling == Labeling::Binary01 ? HeadKind::Binary5 : HeadKind::Ternary15;
    const TrainData data = train_data_from(ds, cfg.labeling);

    struct Job {
        std::size_t preset_idx;
        std::size_t seed_idx;
    };
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < cfg.presets.size(); ++p)
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) jobs.push_back({p, s});

    std::vector<PresetResult> results(cfg.presets.size());
    for (std::size_t p = 0; p < cfg.presets.size(); ++p) {
        results[p].preset = cfg.presets[p];
        results[p].runs.resize(cfg.seeds.size());
    }

    auto run_one = [&](const Job& job) {
        SeedRun& run = results[job.preset_idx].runs[job.seed_idx];
        run.seed = cfg.seeds[job.seed_idx];
        try {
            auto net = resolve_network(cfg.presets[job.preset_idx], cfg.custom,
                                       ds.options.window, ds.feature_names.size(), head,
                                       cfg.pool);
            Model model = build_model(net, ds.graph, run.seed);
            TrainResult tr = train(model, data, cfg.train, run.seed);
            run.macro_f = per_index_macro_f(model, data, data.test);
            run.weights = std::move(tr.best_params);
            run.history = std::move(tr.history);
            run.ok = true;
        } catch (const std::exception& e) {
            run.ok = false;
            run.error = e.what();
        }
    };

    if (cfg.jobs <= 1) {
        for (const auto& job : jobs) run_one(job);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                run_one(jobs[i]);
            }
        };
        std::vector<std::future<void>> pool;
        const std::size_t n_workers = std::min(cfg.jobs, jobs.size());
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w)
            pool.push_back(std::async(std::launch::async, worker));
        for (auto& f : pool) f.get();
    }
    return results;
}

// ---------------------------------------------------------------------------
// synthetic separable dataset (learning sanity)
// ---------------------------------------------------------------------------

/// Stride-d windows over a fresh N(0,1) panel, labeled by the sign of a
/// fixed linear functional of each window (the same functional for every
/// index). Linearly separable by construction. view() borrows the panel,
/// so the SyntheticData must outlive the returned TrainData.
struct SyntheticData {
    Array panel;
    std::size_t window = 0;
    std::vector<WindowSample> train, validation;

    TrainData view() const {
        TrainData td;
        td.panel = &panel;
        td.window = window;
        td.train = train;
        td.validation = validation;
        return td;
    }
};

inline SyntheticData make_separable_dataset(std::size_t n_samples, std::size_t window,
                                            std::size_t features, std::uint64_t seed,
                                            double val_fraction = 0.25) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SyntheticData out;
    out.window = window;
    out.panel = Array({n_samples * window, features});
    for (auto& v : out.panel.data) v = gauss(rng);

    // positive weights: the label is the sign of a weighted window mean
    Array functional({window, features});
    std::uniform_real_distribution<double> pos(0.8, 1.2);
    for (auto& v : functional.data) v = pos(rng);

    std::vector<WindowSample> samples;
    for (std::size_t i = 0; i < n_samples; ++i) {
        WindowSample s;
        s.anchor = (i + 1) * window - 1;
        s.date = "sample-" + std::to_string(i);
        double dot = 0.0;
        const std::size_t base = i * window * features;
        for (std::size_t k = 0; k < window * features; ++k)
            dot += out.panel.data[base + k] * functional.data[k];
        const int label = dot > 0.0 ? 1 : 0;
        s.labels.fill(label);
        samples.push_back(std::move(s));
    }

    const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                           val_fraction * n_samples));
    out.train.assign(samples.begin(), samples.end() - static_cast<std::ptrdiff_t>(n_val));
    out.validation.assign(samples.end() - static_cast<std::ptrdiff_t>(n_val), samples.end());
    return out;
}

}  // namespace gcpred
