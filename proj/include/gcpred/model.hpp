#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "gcpred/adam.hpp"
#include "gcpred/dataprep.hpp"
#include "gcpred/graph.hpp"
#include "gcpred/prepared.hpp"
#include "gcpred/tape.hpp"

namespace gcpred {

// ---------------------------------------------------------------------------
// layer building blocks
// ---------------------------------------------------------------------------

/// GCN layer: degree-normalized aggregation, shared linear map, ReLU.
inline Var gcn_layer(const Var& node_feats, const FeatureGraph& graph, const Var& weight) {
    return relu(matmul(gcn_aggregate(node_feats, graph), weight));
}

/// GAT layer: shared linear map, attention over closed neighborhoods, ReLU.
/// Single head; LeakyReLU slope 0.2 on the attention logits.
inline Var gat_layer(const Var& node_feats, const FeatureGraph& graph, const Var& weight,
                     const Var& attention) {
    return relu(gat_attend(matmul(node_feats, weight), attention, graph));
}

enum class GraphKind { GCN, GAT };
enum class PoolKind { Mean, Max, FullyConnected };
enum class HeadKind { Binary5, Ternary15 };

inline const char* pool_id(PoolKind k) {
    switch (k) {
        case PoolKind::Mean: return "mean";
        case PoolKind::Max: return "max";
        case PoolKind::FullyConnected: return "fc";
    }
    return "?";
}

/// Collapses (F x ch) node features to (ch,). The FC variant needs its
/// trainable weight vector of length F.
inline Var graph_pool(const Var& node_feats, PoolKind kind,
                      const std::optional<Var>& fc_weight = std::nullopt) {
    switch (kind) {
        case PoolKind::Mean: return reduce_mean(node_feats, 0);
        case PoolKind::Max: return reduce_max(node_feats, 0);
        case PoolKind::FullyConnected:
            if (!fc_weight) throw ConfigError("graph_pool: FC pooling needs its weight vector");
            return graph_pool_fc(node_feats, *fc_weight);
    }
    throw ConfigError("graph_pool: unknown kind");
}

/// conv1d -> ReLU -> maxpool (pool window 1 skips the pooling step).
inline Var conv_block(const Var& x, const Var& kernels, const Var& bias, std::size_t pool) {
    Var activated = relu(conv1d(x, kernels, bias));
    return pool > 1 ? maxpool1d(activated, pool) : activated;
}

// ---------------------------------------------------------------------------
// declarative network configuration
// ---------------------------------------------------------------------------

struct ConvBlockSpec {
    std::size_t filters = 8;
    std::size_t kernel = 5;
    std::size_t pool = 2;
};

struct GraphStackSpec {
    GraphKind kind = GraphKind::GAT;
    std::vector<std::size_t> channels;
};

struct GraphPoolSpec {
    PoolKind kind = PoolKind::Mean;
};

using Stage = std::variant<ConvBlockSpec, GraphStackSpec, GraphPoolSpec>;

/// Declarative network layout. The working tensor is (time x node x ch)
/// while a graph stage is still ahead: conv blocks then run along time
/// independently per node with shared kernels (durational extraction), and
/// the graph stack runs once per time step with weights shared across steps
/// (daily extraction). The graph pool collapses the node axis to
/// (time x ch). Layouts without graph stages treat the features as input
/// channels from the start. The flattened final tensor feeds an optional
/// hidden dense layer and the prediction head.
struct NetworkConfig {
    std::string name;
    std::vector<Stage> layout;
    HeadKind head = HeadKind::Binary5;
    std::size_t window = 60;    // d
    std::size_t features = 0;   // F
    std::size_t hidden = 0;     // width of optional pre-head dense layer

    bool has_graph_stage() const {
        for (const auto& s : layout)
            if (std::holds_alternative<GraphStackSpec>(s)) return true;
        return false;
    }
};

inline std::size_t head_outputs(HeadKind k) { return k == HeadKind::Binary5 ? 5 : 15; }

/// Canonical text form of a config; hashed into weight files so weights
/// cannot be loaded into a mismatched network.
inline std::string config_signature(const NetworkConfig& cfg) {
    std::string s = "net|d=" + std::to_string(cfg.window) + "|f=" + std::to_string(cfg.features) +
                    "|head=" + (cfg.head == HeadKind::Binary5 ? "b5" : "t15") +
                    "|hidden=" + std::to_string(cfg.hidden);
    for (const auto& stage : cfg.layout) {
        if (const auto* c = std::get_if<ConvBlockSpec>(&stage)) {
            s += "|conv(" + std::to_string(c->filters) + "," + std::to_string(c->kernel) + "," +
                 std::to_string(c->pool) + ")";
        } else if (const auto* g = std::get_if<GraphStackSpec>(&stage)) {
            s += g->kind == GraphKind::GCN ? "|gcn[" : "|gat[";
            for (auto ch : g->channels) s += std::to_string(ch) + ",";
            s += "]";
        } else if (const auto* p = std::get_if<GraphPoolSpec>(&stage)) {
            s += std::string("|pool(") + pool_id(p->kind) + ")";
        }
    }
    return s;
}

inline std::uint64_t config_hash(const NetworkConfig& cfg) {
    return fnv1a64(config_signature(cfg));
}

// ---------------------------------------------------------------------------
// static shape inference
// ---------------------------------------------------------------------------

/// Shape of the working tensor after a stage; node == 0 once the node axis
/// is gone (pure-CNN inputs start collapsed).
struct StageShape {
    std::size_t time = 0;
    std::size_t node = 0;
    std::size_t ch = 0;

    std::vector<std::size_t> dims() const {
        return node > 0 ? std::vector<std::size_t>{time, node, ch}
                        : std::vector<std::size_t>{time, ch};
    }
};

struct ShapeLedger {
    StageShape input;
    std::vector<StageShape> after_stage;
    std::size_t flattened = 0;
};

/// Validates the layout grammar and computes every intermediate shape.
/// Throws ConfigError on an inconsistent layout, so bad configs fail at
/// assembly time rather than mid-forward.
inline ShapeLedger infer_shapes(const NetworkConfig& cfg) {
    if (cfg.features == 0 || cfg.window == 0) {
        throw ConfigError("network config: window and feature count must be positive");
    }
    // grammar: at most one graph stack, its pool immediately after it
    std::ptrdiff_t stack_at = -1, pool_at = -1;
    for (std::size_t i = 0; i < cfg.layout.size(); ++i) {
        if (std::holds_alternative<GraphStackSpec>(cfg.layout[i])) {
            if (stack_at >= 0) throw ConfigError("network config: multiple graph stacks");
            stack_at = static_cast<std::ptrdiff_t>(i);
        } else if (std::holds_alternative<GraphPoolSpec>(cfg.layout[i])) {
            if (pool_at >= 0) throw ConfigError("network config: multiple graph pools");
            pool_at = static_cast<std::ptrdiff_t>(i);
        }
    }
    if ((stack_at < 0) != (pool_at < 0)) {
        throw ConfigError("network config: graph stack and graph pool must appear together");
    }
    if (stack_at >= 0 && pool_at != stack_at + 1) {
        throw ConfigError("network config: graph pool must immediately follow the graph stack");
    }

    ShapeLedger ledger;
    StageShape cur;
    cur.time = cfg.window;
    if (stack_at >= 0) {
        cur.node = cfg.features;
        cur.ch = 1;
    } else {
        cur.node = 0;
        cur.ch = cfg.features;  // features as channels
    }
    ledger.input = cur;

    for (std::size_t i = 0; i < cfg.layout.size(); ++i) {
        if (const auto* c = std::get_if<ConvBlockSpec>(&cfg.layout[i])) {
            if (c->filters == 0 || c->kernel == 0 || c->pool == 0) {
                throw ConfigError("network config: conv block extents must be positive");
            }
            if (cur.time < c->kernel) {
                throw ConfigError("network config: stage " + std::to_string(i) + " needs time >= " +
                                  std::to_string(c->kernel) + ", have " + std::to_string(cur.time));
            }
            cur.time = cur.time - c->kernel + 1;
            if (c->pool > 1) {
                if (cur.time < c->pool) {
                    throw ConfigError("network config: stage " + std::to_string(i) +
                                      " pooling needs time >= " + std::to_string(c->pool));
                }
                cur.time /= c->pool;
            }
            cur.ch = c->filters;
        } else if (const auto* g = std::get_if<GraphStackSpec>(&cfg.layout[i])) {
            if (g->channels.empty()) {
                throw ConfigError("network config: graph stack needs at least one layer");
            }
            cur.ch = g->channels.back();
        } else {
            cur.node = 0;  // graph pool collapses the node axis
        }
        ledger.after_stage.push_back(cur);
    }
    if (cur.node > 0) {
        throw ConfigError("network config: node axis survives the layout (missing graph pool)");
    }
    ledger.flattened = cur.time * cur.ch;
    return ledger;
}

// ---------------------------------------------------------------------------
// presets
// ---------------------------------------------------------------------------

/// Row order of the experiment tables.
inline const std::vector<std::string>& known_preset_order() {
    static const std::vector<std::string> order = {
        "2D-CNNpred", "3D-CNNpred", "GAT",     "GCN",         "GAT-CNNpred",
        "GCN-CNNpred", "CNN-GAT",   "CNN-GCN", "CNN-GAT-CNN", "CNN-GCN-CNN"};
    return order;
}

/// Builds a named preset at the given window/feature extents. Hybrid
/// presets take the graph pooling kind from `pool`; `hidden` applies only
/// to the pure-graph baselines (shallow ANN before the head).
inline NetworkConfig preset_config(const std::string& name, std::size_t window,
                                   std::size_t features, HeadKind head,
                                   PoolKind pool = PoolKind::Mean, std::size_t hidden = 16) {
    NetworkConfig cfg;
    cfg.name = name;
    cfg.window = window;
    cfg.features = features;
    cfg.head = head;

    const GraphStackSpec gat2{GraphKind::GAT, {30, 10}};
    const GraphStackSpec gcn6{GraphKind::GCN, {10, 7, 2, 3, 5, 5}};
    const ConvBlockSpec conv85{8, 5, 2};
    const GraphPoolSpec pooling{pool};

    if (name == "2D-CNNpred") {
        // daily linear map to a single channel, then two durational blocks
        cfg.layout = {ConvBlockSpec{1, 1, 1}, ConvBlockSpec{8, 3, 2}, ConvBlockSpec{8, 3, 2}};
    } else if (name == "3D-CNNpred") {
        cfg.layout = {ConvBlockSpec{8, 1, 1}, ConvBlockSpec{8, 3, 2}, ConvBlockSpec{8, 3, 2}};
    } else if (name == "GAT") {
        cfg.layout = {gat2, pooling};
        cfg.hidden = hidden;
    } else if (name == "GCN") {
        cfg.layout = {gcn6, pooling};
        cfg.hidden = hidden;
    } else if (name == "GAT-CNNpred") {
        cfg.layout = {gat2, pooling, conv85, conv85};
    } else if (name == "CNN-GAT") {
        cfg.layout = {conv85, conv85, gat2, pooling};
    } else if (name == "CNN-GAT-CNN") {
        cfg.layout = {ConvBlockSpec{8, 5, 2}, GraphStackSpec{GraphKind::GAT, {20, 10}}, pooling,
                      ConvBlockSpec{8, 5, 2}};
    } else if (name == "GCN-CNNpred") {
        cfg.layout = {gcn6, pooling, conv85, conv85};
    } else if (name == "CNN-GCN") {
        cfg.layout = {conv85, conv85, gcn6, pooling};
    } else if (name == "CNN-GCN-CNN") {
        cfg.layout = {conv85, gcn6, pooling, conv85};
    } else {
        throw ConfigError("unknown model preset: " + name);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// model assembly
// ---------------------------------------------------------------------------

/// A configured network: layout, parameters and the frozen feature graph.
/// Parameters are created in a fixed order so initialization and
/// serialization are deterministic.
struct Model {
    NetworkConfig config;
    const FeatureGraph* graph = nullptr;
    ParamSet params;
    ShapeLedger shapes;

    // parameter indices per stage, parallel to config.layout
    struct StageParams {
        std::vector<std::size_t> ids;  // conv: kernel,bias; stack: per layer W[,a]; fc pool: w
    };
    std::vector<StageParams> stage_params;
    std::size_t hidden_w = SIZE_MAX, hidden_b = SIZE_MAX;
    std::size_t head_w = SIZE_MAX, head_b = SIZE_MAX;
};

namespace detail {

inline Array glorot(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                    std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Array a(std::move(shape));
    for (auto& v : a.data) v = dist(rng);
    return a;
}

}  // namespace detail

/// Builds a model with Glorot-uniform weights and zero biases, seeded.
inline Model build_model(const NetworkConfig& cfg, const FeatureGraph& graph,
                         std::uint64_t seed) {
    if (cfg.has_graph_stage() && graph.node_count != cfg.features) {
        throw ConfigError("build_model: graph has " + std::to_string(graph.node_count) +
                          " nodes but config expects " + std::to_string(cfg.features));
    }
    Model model;
    model.config = cfg;
    model.graph = &graph;
    model.shapes = infer_shapes(cfg);

    std::mt19937_64 rng(seed);
    StageShape cur = model.shapes.input;
    for (std::size_t i = 0; i < cfg.layout.size(); ++i) {
        Model::StageParams sp;
        const std::string prefix = "stage" + std::to_string(i);
        if (const auto* c = std::get_if<ConvBlockSpec>(&cfg.layout[i])) {
            const std::size_t fan_in = c->kernel * cur.ch;
            const std::size_t fan_out = c->kernel * c->filters;
            sp.ids.push_back(model.params.add(
                prefix + ".conv.kernels",
                detail::glorot({c->kernel, cur.ch, c->filters}, fan_in, fan_out, rng)));
            sp.ids.push_back(model.params.add(prefix + ".conv.bias", Array({c->filters}, 0.0)));
        } else if (const auto* g = std::get_if<GraphStackSpec>(&cfg.layout[i])) {
            std::size_t in_ch = cur.ch;
            for (std::size_t l = 0; l < g->channels.size(); ++l) {
                const std::size_t out_ch = g->channels[l];
                const std::string lname = prefix + ".layer" + std::to_string(l);
                sp.ids.push_back(model.params.add(
                    lname + ".weight", detail::glorot({in_ch, out_ch}, in_ch, out_ch, rng)));
                if (g->kind == GraphKind::GAT) {
                    sp.ids.push_back(model.params.add(
                        lname + ".attention", detail::glorot({2 * out_ch}, 2 * out_ch, 1, rng)));
                }
                in_ch = out_ch;
            }
        } else if (const auto* p = std::get_if<GraphPoolSpec>(&cfg.layout[i])) {
            if (p->kind == PoolKind::FullyConnected) {
                sp.ids.push_back(model.params.add(
                    prefix + ".pool.weight",
                    detail::glorot({cfg.features}, cfg.features, 1, rng)));
            }
        }
        cur = model.shapes.after_stage[i];
        model.stage_params.push_back(std::move(sp));
    }

    std::size_t width = model.shapes.flattened;
    if (cfg.hidden > 0) {
        model.hidden_w = model.params.add("hidden.weight",
                                          detail::glorot({width, cfg.hidden}, width, cfg.hidden, rng));
        model.hidden_b = model.params.add("hidden.bias", Array({cfg.hidden}, 0.0));
        width = cfg.hidden;
    }
    const std::size_t outs = head_outputs(cfg.head);
    model.head_w =
        model.params.add("head.weight", detail::glorot({width, outs}, width, outs, rng));
    model.head_b = model.params.add("head.bias", Array({outs}, 0.0));
    return model;
}

/// Registers every parameter as a tape leaf, in parameter order.
inline std::vector<Var> param_vars(Tape& tape, const ParamSet& params) {
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params.values) vars.push_back(tape.leaf(p));
    return vars;
}

/// Accumulates tape gradients of `vars` into the ParamSet's grad buffers.
inline void accumulate_grads(const Tape& tape, const std::vector<Var>& vars, ParamSet& params) {
    for (std::size_t p = 0; p < vars.size(); ++p) {
        const Array& g = tape.grad(vars[p]);
        for (std::size_t i = 0; i < g.numel(); ++i) params.grads[p].data[i] += g.data[i];
    }
}

/// Runs the network on one (d x F) window. Returns the head output:
/// (5,) sigmoid probabilities for Binary5 or (5 x 3) per-group softmax
/// scores for Ternary15. Observed stage shapes are checked against the
/// static ledger.
inline Var model_forward(Tape& tape, const Model& model, const std::vector<Var>& params,
                         const Array& input) {
    const NetworkConfig& cfg = model.config;
    if (input.rank() != 2 || input.dim(0) != cfg.window || input.dim(1) != cfg.features) {
        throw ShapeError("model_forward: input " + shape_str(input.shape) + " but config wants (" +
                         std::to_string(cfg.window) + "x" + std::to_string(cfg.features) + ")");
    }

    Var cur;
    bool per_node = cfg.has_graph_stage();
    if (per_node) {
        cur = tape.leaf(Array({cfg.window, cfg.features, 1}, input.data));
    } else {
        cur = tape.leaf(input);  // (time x ch)
    }

    for (std::size_t i = 0; i < cfg.layout.size(); ++i) {
        const auto& ids = model.stage_params[i].ids;
        if (const auto* c = std::get_if<ConvBlockSpec>(&cfg.layout[i])) {
            cur = conv_block(cur, params[ids[0]], params[ids[1]], c->pool);
        } else if (const auto* g = std::get_if<GraphStackSpec>(&cfg.layout[i])) {
            // the pool spec directly after this stage closes the node axis
            const auto* p = std::get_if<GraphPoolSpec>(&cfg.layout[i + 1]);
            const auto& pool_ids = model.stage_params[i + 1].ids;
            const std::size_t steps = tape.value(cur).dim(0);
            std::vector<Var> pooled;
            pooled.reserve(steps);
            for (std::size_t step = 0; step < steps; ++step) {
                Var s = time_slice(cur, step);
                std::size_t pi = 0;
                for (std::size_t l = 0; l < g->channels.size(); ++l) {
                    if (g->kind == GraphKind::GCN) {
                        s = gcn_layer(s, *model.graph, params[ids[pi]]);
                        pi += 1;
                    } else {
                        s = gat_layer(s, *model.graph, params[ids[pi]], params[ids[pi + 1]]);
                        pi += 2;
                    }
                }
                pooled.push_back(p->kind == PoolKind::FullyConnected
                                     ? graph_pool(s, p->kind, params[pool_ids[0]])
                                     : graph_pool(s, p->kind));
            }
            cur = stack_time(pooled);
            ++i;  // the pool stage was consumed here
        }
        const auto expect = model.shapes.after_stage[i].dims();
        if (tape.value(cur).shape != expect) {
            throw ShapeError("model_forward: stage " + std::to_string(i) + " produced " +
                             shape_str(tape.value(cur).shape) + ", inferred " + shape_str(expect));
        }
    }

    Var flat = flatten(cur);
    if (cfg.hidden > 0) {
        flat = relu(dense(flat, params[model.hidden_w], params[model.hidden_b]));
    }
    Var logits = dense(flat, params[model.head_w], params[model.head_b]);
    if (cfg.head == HeadKind::Binary5) return sigmoid(logits);
    return softmax(reshape(logits, {kIndexCount, 3}), 1);
}

/// Convenience: forward pass on a throwaway tape with the model's own
/// parameters (inference only).
inline Array infer(const Model& model, const Array& input) {
    Tape tape;
    const auto vars = param_vars(tape, model.params);
    return tape.value(model_forward(tape, model, vars, input));
}

// ---------------------------------------------------------------------------
// discretization
// ---------------------------------------------------------------------------

/// Binary head: class 1 iff p >= 0.5 (the tie at exactly 0.5 goes to 1).
inline std::array<int, kIndexCount> discretize_binary(const Array& probs) {
    if (probs.numel() != kIndexCount) throw ShapeError("discretize_binary: need 5 outputs");
    std::array<int, kIndexCount> out{};
    for (std::size_t i = 0; i < kIndexCount; ++i) out[i] = probs.data[i] >= 0.5 ? 1 : 0;
    return out;
}

/// Ternary head: per-group argmax; ties resolve to the lowest class index.
inline std::array<int, kIndexCount> discretize_ternary(const Array& scores) {
    if (scores.rank() != 2 || scores.dim(0) != kIndexCount || scores.dim(1) != 3) {
        throw ShapeError("discretize_ternary: need (5 x 3) scores");
    }
    std::array<int, kIndexCount> out{};
    for (std::size_t g = 0; g < kIndexCount; ++g) {
        int best = 0;
        for (int c = 1; c < 3; ++c) {
            if (scores.at(g, static_cast<std::size_t>(c)) >
                scores.at(g, static_cast<std::size_t>(best))) {
                best = c;
            }
        }
        out[g] = best;
    }
    return out;
}

inline std::array<int, kIndexCount> discretize(const Array& head_out, HeadKind kind) {
    return kind == HeadKind::Binary5 ? discretize_binary(head_out)
                                     : discretize_ternary(head_out);
}

/// Per-date model outputs over a sample range: raw head values plus
/// discretized classes per index.
struct PredictionSeries {
    HeadKind head = HeadKind::Binary5;
    std::vector<std::string> dates;
    std::vector<std::size_t> anchors;
    std::vector<std::array<int, kIndexCount>> classes;
    std::vector<std::vector<double>> raw;  // 5 or 15 values per date
};

}  // namespace gcpred
