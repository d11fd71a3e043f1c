#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gcpred/array.hpp"
#include "gcpred/errors.hpp"

namespace gcpred {

/// Symmetric matrix of Pearson correlations between feature columns.
struct CorrelationMatrix {
    std::size_t size = 0;
    std::vector<double> values;  // row-major size x size

    double at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * size + j]; }
};

/// Undirected graph over feature nodes. No self edges; edges stored once
/// with u < v; adjacency lists kept sorted for deterministic traversal.
struct FeatureGraph {
    std::size_t node_count = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::vector<std::uint32_t> degree;
    std::vector<std::vector<std::uint32_t>> neighbors;
    std::vector<std::string> labels;  // optional feature names

    static FeatureGraph from_edges(std::size_t nodes,
                                   std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list,
                                   std::vector<std::string> names = {}) {
        FeatureGraph g;
        g.node_count = nodes;
        g.labels = std::move(names);
        g.degree.assign(nodes, 0);
        g.neighbors.assign(nodes, {});
        for (auto& [u, v] : edge_list) {
            if (u == v) throw Error("FeatureGraph: self edge on node " + std::to_string(u));
            if (u > v) std::swap(u, v);
            if (v >= nodes) throw Error("FeatureGraph: edge endpoint out of range");
        }
        std::sort(edge_list.begin(), edge_list.end());
        edge_list.erase(std::unique(edge_list.begin(), edge_list.end()), edge_list.end());
        g.edges = std::move(edge_list);
        for (const auto& [u, v] : g.edges) {
            g.neighbors[u].push_back(v);
            g.neighbors[v].push_back(u);
        }
        for (auto& adj : g.neighbors) std::sort(adj.begin(), adj.end());
        for (std::size_t v = 0; v < nodes; ++v)
            g.degree[v] = static_cast<std::uint32_t>(g.neighbors[v].size());
        return g;
    }

    std::size_t edge_count() const { return edges.size(); }
};

/// Pearson correlation matrix of the columns of `panel` restricted to
/// `rows` leading rows. Pairs involving a zero-variance column get
/// correlation 0 off the diagonal so constant features stay isolated.
inline CorrelationMatrix pearson_matrix(const Array& panel, std::size_t rows) {
    if (panel.rank() != 2) throw ShapeError("pearson_matrix: panel must be 2-D");
    if (rows < 2) throw DataError("pearson_matrix: need at least 2 training rows, got " +
                                  std::to_string(rows));
    if (rows > panel.dim(0)) throw DataError("pearson_matrix: rows exceed panel length");
    const std::size_t f = panel.dim(1);

    std::vector<double> mean(f, 0.0), norm(f, 0.0);
    std::vector<std::vector<double>> centered(f, std::vector<double>(rows));
    for (std::size_t j = 0; j < f; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < rows; ++i) m += panel.at(i, j);
        m /= static_cast<double>(rows);
        mean[j] = m;
        double sq = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            const double c = panel.at(i, j) - m;
            centered[j][i] = c;
            sq += c * c;
        }
        norm[j] = sq;
    }

    CorrelationMatrix corr;
    corr.size = f;
    corr.values.assign(f * f, 0.0);
    for (std::size_t a = 0; a < f; ++a) {
        corr.at(a, a) = 1.0;
        for (std::size_t b = a + 1; b < f; ++b) {
            double r = 0.0;
            if (norm[a] > 0.0 && norm[b] > 0.0) {
                double dot = 0.0;
                for (std::size_t i = 0; i < rows; ++i) dot += centered[a][i] * centered[b][i];
                r = dot / std::sqrt(norm[a] * norm[b]);
                r = std::clamp(r, -1.0, 1.0);
            }
            corr.at(a, b) = r;
            corr.at(b, a) = r;
        }
    }
    return corr;
}

/// Thresholds a correlation matrix into a feature graph: edge (u,v) iff the
/// correlation magnitude strictly exceeds tau. With `signed_threshold` the
/// raw (signed) correlation is compared instead.
inline FeatureGraph threshold_graph(const CorrelationMatrix& corr, double tau = 0.7,
                                    bool signed_threshold = false,
                                    std::vector<std::string> labels = {}) {
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw ConfigError("threshold_graph: tau must lie in (0, 1], got " + std::to_string(tau));
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::size_t u = 0; u < corr.size; ++u) {
        for (std::size_t v = u + 1; v < corr.size; ++v) {
            const double r = corr.at(u, v);
            const double score = signed_threshold ? r : std::abs(r);
            if (score > tau) {
                edges.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
            }
        }
    }
    return FeatureGraph::from_edges(corr.size, std::move(edges), std::move(labels));
}

struct GraphStats {
    std::size_t nodes = 0;
    std::size_t edges = 0;
    std::size_t isolated = 0;
    std::size_t components = 0;
    std::vector<std::size_t> degree_histogram;  // index = degree
    std::vector<std::size_t> component_sizes;   // descending
};

inline GraphStats graph_stats(const FeatureGraph& g) {
    GraphStats s;
    s.nodes = g.node_count;
    s.edges = g.edge_count();
    std::size_t max_deg = 0;
    for (auto d : g.degree) max_deg = std::max<std::size_t>(max_deg, d);
    s.degree_histogram.assign(max_deg + 1, 0);
    for (auto d : g.degree) {
        ++s.degree_histogram[d];
        if (d == 0) ++s.isolated;
    }
    // connected components by union-find
    std::vector<std::size_t> parent(g.node_count);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [u, v] : g.edges) {
        const std::size_t ru = find(u), rv = find(v);
        if (ru != rv) parent[std::max(ru, rv)] = std::min(ru, rv);
    }
    std::vector<std::size_t> size_by_root(g.node_count, 0);
    for (std::size_t v = 0; v < g.node_count; ++v) ++size_by_root[find(v)];
    for (std::size_t v = 0; v < g.node_count; ++v) {
        if (size_by_root[v] > 0) {
            ++s.components;
            s.component_sizes.push_back(size_by_root[v]);
        }
    }
    std::sort(s.component_sizes.rbegin(), s.component_sizes.rend());
    return s;
}

}  // namespace gcpred
