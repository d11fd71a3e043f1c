#pragma once

// Shared helpers for the test suites: temporary directories, random graphs,
// scaled-down preset layouts, and independent dense-matrix oracles for the
// graph layers. The oracles use plain row-by-row loops over full F x F
// matrices and deliberately share no code with the library's edge-list path.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gcpred/array.hpp"
#include "gcpred/graph.hpp"
#include "gcpred/model.hpp"
#include "gcpred/trainer.hpp"

namespace gcpred::testsupport {

class TempDir {
public:
    explicit TempDir(const std::string& tag = "work") {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("gcpred_" + tag + "_" + std::to_string(++counter) + "_" +
                 std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string str() const { return path_.string(); }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline Array random_array(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0,
                          double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Array a(std::move(shape));
    for (auto& v : a.data) v = dist(rng);
    return a;
}

/// Erdos-Renyi graph on `nodes` vertices with edge probability p.
inline FeatureGraph random_graph(std::size_t nodes, double p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t u = 0; u < nodes; ++u)
        for (std::uint32_t v = u + 1; v < nodes; ++v)
            if (coin(rng) < p) edges.emplace_back(u, v);
    return FeatureGraph::from_edges(nodes, std::move(edges));
}

/// Ring graph, used where only shapes matter.
inline FeatureGraph ring_graph(std::size_t nodes) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t v = 0; v + 1 < nodes; ++v) edges.emplace_back(v, v + 1);
    if (nodes > 2) edges.emplace_back(0, static_cast<std::uint32_t>(nodes - 1));
    return FeatureGraph::from_edges(nodes, std::move(edges));
}

// ---------------------------------------------------------------------------
// dense-matrix oracles
// ---------------------------------------------------------------------------

/// GCN layer via an explicit F x F operator: M[v][u] = 1/sqrt(d_v d_u) on
/// edges, diagonal 1/d_v (1 for isolated nodes); h = relu((M x) W).
inline Array dense_gcn_oracle(const Array& x, const FeatureGraph& g, const Array& w) {
    const std::size_t F = g.node_count, cin = x.dim(1), cout = w.dim(1);
    std::vector<std::vector<double>> M(F, std::vector<double>(F, 0.0));
    for (std::size_t v = 0; v < F; ++v) {
        M[v][v] = g.degree[v] > 0 ? 1.0 / static_cast<double>(g.degree[v]) : 1.0;
    }
    for (const auto& [u, v] : g.edges) {
        const double w_uv =
            1.0 / std::sqrt(static_cast<double>(g.degree[u]) * static_cast<double>(g.degree[v]));
        M[u][v] = w_uv;
        M[v][u] = w_uv;
    }
    Array agg({F, cin}, 0.0);
    for (std::size_t v = 0; v < F; ++v)
        for (std::size_t u = 0; u < F; ++u)
            for (std::size_t c = 0; c < cin; ++c) agg.at(v, c) += M[v][u] * x.at(u, c);
    Array out({F, cout}, 0.0);
    for (std::size_t v = 0; v < F; ++v)
        for (std::size_t o = 0; o < cout; ++o) {
            double acc = 0.0;
            for (std::size_t c = 0; c < cin; ++c) acc += agg.at(v, c) * w.at(c, o);
            out.at(v, o) = acc > 0.0 ? acc : 0.0;
        }
    return out;
}

/// GAT layer via a dense F x F attention matrix with -inf masking outside
/// the closed neighborhood; h = relu(alpha (x W)).
inline Array dense_gat_oracle(const Array& x, const FeatureGraph& g, const Array& w,
                              const Array& att, double slope = 0.2) {
    const std::size_t F = g.node_count, cin = x.dim(1), cout = w.dim(1);
    Array z({F, cout}, 0.0);
    for (std::size_t v = 0; v < F; ++v)
        for (std::size_t o = 0; o < cout; ++o) {
            double acc = 0.0;
            for (std::size_t c = 0; c < cin; ++c) acc += x.at(v, c) * w.at(c, o);
            z.at(v, o) = acc;
        }
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> logits(F, std::vector<double>(F, neg_inf));
    std::vector<std::vector<bool>> adj(F, std::vector<bool>(F, false));
    for (std::size_t v = 0; v < F; ++v) adj[v][v] = true;
    for (const auto& [u, v] : g.edges) {
        adj[u][v] = true;
        adj[v][u] = true;
    }
    for (std::size_t v = 0; v < F; ++v)
        for (std::size_t u = 0; u < F; ++u) {
            if (!adj[v][u]) continue;
            double s = 0.0;
            for (std::size_t o = 0; o < cout; ++o)
                s += att.data[o] * z.at(v, o) + att.data[cout + o] * z.at(u, o);
            logits[v][u] = s > 0.0 ? s : slope * s;
        }
    Array out({F, cout}, 0.0);
    for (std::size_t v = 0; v < F; ++v) {
        double mx = neg_inf;
        for (std::size_t u = 0; u < F; ++u) mx = std::max(mx, logits[v][u]);
        double denom = 0.0;
        std::vector<double> a(F, 0.0);
        for (std::size_t u = 0; u < F; ++u) {
            if (!adj[v][u]) continue;
            a[u] = std::exp(logits[v][u] - mx);
            denom += a[u];
        }
        for (std::size_t o = 0; o < cout; ++o) {
            double acc = 0.0;
            for (std::size_t u = 0; u < F; ++u) acc += (a[u] / denom) * z.at(u, o);
            out.at(v, o) = acc > 0.0 ? acc : 0.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// scaled-down presets for gradient checks (the real preset stage sequences
// need d >= 16 for their twin kernel-5 conv blocks; these keep each preset's
// structure at d = 8)
// ---------------------------------------------------------------------------

inline NetworkConfig toy_preset(const std::string& name, HeadKind head, std::size_t window = 8,
                                std::size_t features = 6, PoolKind pool = PoolKind::Mean) {
    NetworkConfig cfg;
    cfg.name = "toy-" + name;
    cfg.window = window;
    cfg.features = features;
    cfg.head = head;

    const ConvBlockSpec conv{3, 2, 2};
    const GraphStackSpec gat{GraphKind::GAT, {4, 3}};
    const GraphStackSpec gcn{GraphKind::GCN, {4, 3, 2}};
    const GraphPoolSpec pooling{pool};

    if (name == "2D-CNNpred") {
        cfg.layout = {ConvBlockSpec{1, 1, 1}, conv, conv};
    } else if (name == "3D-CNNpred") {
        cfg.layout = {ConvBlockSpec{3, 1, 1}, conv, conv};
    } else if (name == "GAT") {
        cfg.layout = {gat, pooling};
        cfg.hidden = 8;
    } else if (name == "GCN") {
        cfg.layout = {gcn, pooling};
        cfg.hidden = 8;
    } else if (name == "GAT-CNNpred") {
        cfg.layout = {gat, pooling, conv, conv};
    } else if (name == "CNN-GAT") {
        cfg.layout = {conv, conv, gat, pooling};
    } else if (name == "CNN-GAT-CNN") {
        cfg.layout = {conv, gat, pooling, conv};
    } else if (name == "GCN-CNNpred") {
        cfg.layout = {gcn, pooling, conv, conv};
    } else if (name == "CNN-GCN") {
        cfg.layout = {conv, conv, gcn, pooling};
    } else if (name == "CNN-GCN-CNN") {
        cfg.layout = {conv, gcn, pooling, conv};
    } else {
        throw ConfigError("toy_preset: unknown preset " + name);
    }
    return cfg;
}

inline const std::vector<std::string>& all_preset_names() {
    return known_preset_order();
}

// ---------------------------------------------------------------------------
// learning-sanity harness
// ---------------------------------------------------------------------------

struct SanityOutcome {
    bool passed = false;
    double best_accuracy = 0.0;
    std::size_t attempts = 0;
    double lr_used = 0.0;
    std::uint64_t seed_used = 0;
    std::size_t epoch_reached = 0;
};

/// Trains a preset on the separable dataset until training accuracy
/// exceeds 0.95, walking a fixed (learning rate, seed) ladder. Every
/// attempt is a fresh run capped at 50 epochs; accuracy is observed after
/// each epoch. Deterministic: the ladder order is fixed.
inline SanityOutcome preset_learning_sanity(const std::string& preset, const TrainData& data,
                                            const FeatureGraph& graph, std::size_t window,
                                            std::size_t features) {
    SanityOutcome out;
    for (double lr : {0.01, 0.003, 0.03}) {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            ++out.attempts;
            Model model =
                build_model(preset_config(preset, window, features, HeadKind::Binary5), graph,
                            seed);
            TrainConfig cfg;
            cfg.batch_size = 8;
            cfg.max_epochs = 50;
            cfg.patience = 49;
            cfg.learning_rate = lr;
            double best_acc = 0.0;
            std::size_t best_epoch = 0;
            cfg.on_epoch = [&](const Model& m, std::size_t epoch) {
                const double acc = accuracy(m, data, data.train);
                if (acc > best_acc) {
                    best_acc = acc;
                    best_epoch = epoch;
                }
                return acc > 0.95;
            };
            train(model, data, cfg, seed);
            if (best_acc > out.best_accuracy) {
                out.best_accuracy = best_acc;
                out.lr_used = lr;
                out.seed_used = seed;
                out.epoch_reached = best_epoch;
            }
            if (best_acc > 0.95) {
                out.passed = true;
                return out;
            }
        }
    }
    return out;
}

}  // namespace gcpred::testsupport
