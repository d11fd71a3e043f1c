#pragma once

// Binary container formats. All multi-byte values are little-endian; real
// values are IEEE-754 binary64 written verbatim, so re-serialization of
// unchanged data is byte-identical.
//
// Weights file (magic "GCPW", version 1):
//   magic u8[4] | version u32 | config_hash u64 | param_count u32
//   then per parameter, in creation order:
//     name_len u32 | name bytes | rank u32 | dims u64[rank] | data f64[numel]
//
// Prepared dataset file (magic "GCPD", version 1):
//   magic u8[4] | version u32 | prep_hash u64
//   mode string | window u64 | split fractions f64[3]
//   split sizes u64[3] | tau f64 | signed_threshold u8
//   dates: u64 count, then strings       (string = len u32 | bytes)
//   feature names: u64 count, then strings
//   features f64[dates x names] | mean f64[names] | std f64[names]
//   closes f64[dates x 5]
//   per index (5): returns f64[dates-1] | labels01 i8[dates-1]
//                  | labels012 i8[dates-1] | low f64 | high f64
//   graph: nodes u64 | edge count u64 | edges (u32,u32)[] | tau is above

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gcpred/adam.hpp"
#include "gcpred/errors.hpp"
#include "gcpred/prepared.hpp"

namespace gcpred {
namespace io {

inline void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void get_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw DataError("container file truncated");
}

template <class T>
void put(std::ostream& out, T v) {
    put_bytes(out, &v, sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v;
    get_bytes(in, &v, sizeof(T));
    return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

inline std::string get_string(std::istream& in) {
    const auto len = get<std::uint32_t>(in);
    std::string s(len, '\0');
    if (len) get_bytes(in, s.data(), len);
    return s;
}

inline void put_doubles(std::ostream& out, const std::vector<double>& v) {
    put_bytes(out, v.data(), v.size() * sizeof(double));
}

inline void get_doubles(std::istream& in, std::vector<double>& v) {
    if (!v.empty()) get_bytes(in, v.data(), v.size() * sizeof(double));
}

}  // namespace io

// ---------------------------------------------------------------------------
// weights
// ---------------------------------------------------------------------------

inline void save_weights(const std::string& path, const ParamSet& params,
                         std::uint64_t config_hash) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write weights file: " + path);
    io::put_bytes(out, "GCPW", 4);
    io::put<std::uint32_t>(out, 1);
    io::put<std::uint64_t>(out, config_hash);
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (std::size_t p = 0; p < params.size(); ++p) {
        io::put_string(out, params.names[p]);
        const Array& a = params.values[p];
        io::put<std::uint32_t>(out, static_cast<std::uint32_t>(a.rank()));
        for (auto d : a.shape) io::put<std::uint64_t>(out, d);
        io::put_doubles(out, a.data);
    }
    if (!out) throw DataError("failed writing weights file: " + path);
}

struct LoadedWeights {
    std::uint64_t config_hash = 0;
    ParamSet params;
};

inline LoadedWeights load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weights file: " + path);
    char magic[4];
    io::get_bytes(in, magic, 4);
    if (std::memcmp(magic, "GCPW", 4) != 0) throw DataError(path + ": not a weights file");
    if (io::get<std::uint32_t>(in) != 1) throw DataError(path + ": unsupported weights version");
    LoadedWeights lw;
    lw.config_hash = io::get<std::uint64_t>(in);
    const auto count = io::get<std::uint32_t>(in);
    for (std::uint32_t p = 0; p < count; ++p) {
        std::string name = io::get_string(in);
        const auto rank = io::get<std::uint32_t>(in);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(io::get<std::uint64_t>(in));
        Array a(shape);
        io::get_doubles(in, a.data);
        lw.params.add(std::move(name), std::move(a));
    }
    return lw;
}

// ---------------------------------------------------------------------------
// prepared dataset
// ---------------------------------------------------------------------------

inline void save_prepared(const std::string& path, const PreparedDataset& ds) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write prepared dataset: " + path);
    io::put_bytes(out, "GCPD", 4);
    io::put<std::uint32_t>(out, 1);
    io::put<std::uint64_t>(out, ds.hash);
    io::put_string(out, ds.options.mode.str());
    io::put<std::uint64_t>(out, ds.options.window);
    io::put<double>(out, ds.options.split.train);
    io::put<double>(out, ds.options.split.validation);
    io::put<double>(out, ds.options.split.test);
    io::put<std::uint64_t>(out, ds.split_sizes.train);
    io::put<std::uint64_t>(out, ds.split_sizes.validation);
    io::put<std::uint64_t>(out, ds.split_sizes.test);
    io::put<double>(out, ds.options.tau);
    io::put<std::uint8_t>(out, ds.options.signed_threshold ? 1 : 0);

    io::put<std::uint64_t>(out, ds.dates.size());
    for (const auto& d : ds.dates) io::put_string(out, d);
    io::put<std::uint64_t>(out, ds.feature_names.size());
    for (const auto& f : ds.feature_names) io::put_string(out, f);
    io::put_doubles(out, ds.features.data);
    io::put_doubles(out, ds.norm.mean);
    io::put_doubles(out, ds.norm.stdev);
    io::put_doubles(out, ds.closes.data);

    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        io::put_doubles(out, ds.returns[mi]);
        for (int v : ds.labels01[mi]) io::put<std::int8_t>(out, static_cast<std::int8_t>(v));
        for (int v : ds.labels012[mi]) io::put<std::int8_t>(out, static_cast<std::int8_t>(v));
        io::put<double>(out, ds.thresholds[mi].first);
        io::put<double>(out, ds.thresholds[mi].second);
    }

    io::put<std::uint64_t>(out, ds.graph.node_count);
    io::put<std::uint64_t>(out, ds.graph.edge_count());
    for (const auto& [u, v] : ds.graph.edges) {
        io::put<std::uint32_t>(out, u);
        io::put<std::uint32_t>(out, v);
    }
    if (!out) throw DataError("failed writing prepared dataset: " + path);
}

inline PreparedDataset load_prepared(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open prepared dataset: " + path);
    char magic[4];
    io::get_bytes(in, magic, 4);
    if (std::memcmp(magic, "GCPD", 4) != 0) throw DataError(path + ": not a prepared dataset");
    if (io::get<std::uint32_t>(in) != 1) throw DataError(path + ": unsupported version");

    PreparedDataset ds;
    ds.hash = io::get<std::uint64_t>(in);
    const std::string mode = io::get_string(in);
    if (mode == "combined") {
        ds.options.mode = PanelMode::Combined();
    } else {
        const auto m = market_from_id(mode);
        if (!m) throw DataError(path + ": unknown mode " + mode);
        ds.options.mode = PanelMode::Single(*m);
    }
    ds.options.window = static_cast<std::size_t>(io::get<std::uint64_t>(in));
    ds.options.split.train = io::get<double>(in);
    ds.options.split.validation = io::get<double>(in);
    ds.options.split.test = io::get<double>(in);
    ds.split_sizes.train = static_cast<std::size_t>(io::get<std::uint64_t>(in));
    ds.split_sizes.validation = static_cast<std::size_t>(io::get<std::uint64_t>(in));
    ds.split_sizes.test = static_cast<std::size_t>(io::get<std::uint64_t>(in));
    ds.options.tau = io::get<double>(in);
    ds.options.signed_threshold = io::get<std::uint8_t>(in) != 0;

    const auto n_dates = static_cast<std::size_t>(io::get<std::uint64_t>(in));
    ds.dates.resize(n_dates);
    for (auto& d : ds.dates) d = io::get_string(in);
    const auto n_feat = static_cast<std::size_t>(io::get<std::uint64_t>(in));
    ds.feature_names.resize(n_feat);
    for (auto& f : ds.feature_names) f = io::get_string(in);

    ds.features = Array({n_dates, n_feat});
    io::get_doubles(in, ds.features.data);
    ds.norm.mean.resize(n_feat);
    ds.norm.stdev.resize(n_feat);
    io::get_doubles(in, ds.norm.mean);
    io::get_doubles(in, ds.norm.stdev);
    ds.closes = Array({n_dates, kIndexCount});
    io::get_doubles(in, ds.closes.data);

    ds.returns.resize(kIndexCount);
    ds.labels01.resize(kIndexCount);
    ds.labels012.resize(kIndexCount);
    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        ds.returns[mi].resize(n_dates - 1);
        io::get_doubles(in, ds.returns[mi]);
        ds.labels01[mi].resize(n_dates - 1);
        for (auto& v : ds.labels01[mi]) v = io::get<std::int8_t>(in);
        ds.labels012[mi].resize(n_dates - 1);
        for (auto& v : ds.labels012[mi]) v = io::get<std::int8_t>(in);
        ds.thresholds[mi].first = io::get<double>(in);
        ds.thresholds[mi].second = io::get<double>(in);
    }

    const auto nodes = static_cast<std::size_t>(io::get<std::uint64_t>(in));
    const auto edges = static_cast<std::size_t>(io::get<std::uint64_t>(in));
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list;
    edge_list.reserve(edges);
    for (std::size_t e = 0; e < edges; ++e) {
        const auto u = io::get<std::uint32_t>(in);
        const auto v = io::get<std::uint32_t>(in);
        edge_list.emplace_back(u, v);
    }
    ds.graph = FeatureGraph::from_edges(nodes, std::move(edge_list), ds.feature_names);
    return ds;
}

// ---------------------------------------------------------------------------
// graph edge-list export (text, for inspection and reports)
// ---------------------------------------------------------------------------

inline void export_graph_edges(const std::string& path, const FeatureGraph& g) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write graph export: " + path);
    auto name = [&](std::uint32_t v) {
        return v < g.labels.size() ? g.labels[v] : "f" + std::to_string(v);
    };
    out << "# edges\n";
    for (const auto& [u, v] : g.edges) out << name(u) << "\t" << name(v) << "\n";
    out << "# degrees\n";
    for (std::size_t v = 0; v < g.node_count; ++v)
        out << name(static_cast<std::uint32_t>(v)) << "\t" << g.degree[v] << "\n";
    if (!out) throw DataError("failed writing graph export: " + path);
}

}  // namespace gcpred
