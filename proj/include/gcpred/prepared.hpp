#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gcpred/dataprep.hpp"
#include "gcpred/graph.hpp"

namespace gcpred {

enum class Labeling { Binary01, Ternary012 };

inline const char* labeling_id(Labeling l) {
    return l == Labeling::Binary01 ? "01" : "012";
}

struct PrepareOptions {
    PanelMode mode = PanelMode::Combined();
    std::size_t window = 60;
    SplitSpec split = SplitSpec::split_65_15_20();
    double tau = 0.7;
    bool signed_threshold = false;
};

/// FNV-1a 64-bit hash, used to fingerprint configurations in container
/// files so stale prepared data and mismatched weights are rejected.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t prepare_hash(const PrepareOptions& opt) {
    std::string key = "prep|mode=" + opt.mode.str() + "|d=" + std::to_string(opt.window) +
                      "|split=" + opt.split.str() + "|tau=" + std::to_string(opt.tau) +
                      "|signed=" + (opt.signed_threshold ? "1" : "0");
    return fnv1a64(key);
}

/// Everything a training or backtest run needs, frozen at preparation time:
/// the normalized panel, per-index returns and labels under both schemes,
/// the split boundaries, and the thresholded feature graph. Training
/// statistics (normalization, ternary thresholds, correlations) use only
/// rows up to the last training anchor.
struct PreparedDataset {
    std::uint64_t hash = 0;
    PrepareOptions options;
    SplitSizes split_sizes;

    std::vector<std::string> dates;
    std::vector<std::string> feature_names;
    Array features;  // normalized panel, dates x features
    NormStats norm;
    Array closes;  // raw, dates x kIndexCount

    std::vector<std::vector<double>> returns;  // kIndexCount x (dates-1)
    std::vector<std::vector<int>> labels01;
    std::vector<std::vector<int>> labels012;
    std::array<std::pair<double, double>, kIndexCount> thresholds{};  // (low, high)

    FeatureGraph graph;

    std::size_t sample_count() const { return dates.size() - options.window; }
    std::size_t first_anchor() const { return options.window - 1; }
    std::size_t last_train_anchor() const { return first_anchor() + split_sizes.train - 1; }
    std::size_t train_rows() const { return last_train_anchor() + 1; }

    std::vector<WindowSample> samples(Labeling scheme) const {
        return make_windows(dates, scheme == Labeling::Binary01 ? labels01 : labels012,
                            options.window);
    }

    /// Realized next-day return of index `mi` earned by the sample anchored
    /// at `anchor` (same alignment as its label).
    double realized_return(std::size_t mi, std::size_t anchor) const {
        return returns[mi][anchor];
    }
};

inline PreparedDataset prepare_dataset(const std::vector<RawMarketTable>& tables,
                                       const PrepareOptions& opt) {
    for (Market m : kMarkets) {
        const bool present = std::any_of(tables.begin(), tables.end(),
                                         [m](const auto& t) { return t.market == m; });
        if (!present) {
            throw DataError(std::string("prepare_dataset: missing market table ") +
                            market_id(m));
        }
    }
    PreparedDataset ds;
    ds.options = opt;
    ds.hash = prepare_hash(opt);

    AlignedPanel panel = align_panel(tables, opt.mode);
    ds.dates = std::move(panel.dates);
    ds.feature_names = std::move(panel.feature_names);
    ds.features = std::move(panel.features);
    ds.closes = std::move(panel.closes);

    const std::size_t n = ds.dates.size();
    if (n < opt.window + 1) {
        throw DataError("prepare_dataset: " + std::to_string(n) +
                        " aligned dates cannot fit window " + std::to_string(opt.window));
    }
    ds.split_sizes = chrono_split(n - opt.window, opt.split);

    // statistics may touch only rows up to the last training anchor
    const std::size_t train_rows = ds.train_rows();
    const std::size_t train_returns = train_rows - 1;

    ds.returns.resize(kIndexCount);
    ds.labels01.resize(kIndexCount);
    ds.labels012.resize(kIndexCount);
    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        std::vector<double> close(n);
        for (std::size_t i = 0; i < n; ++i) close[i] = ds.closes.at(i, mi);
        ds.returns[mi] = daily_returns(close);
        ds.labels01[mi] = label_binary(ds.returns[mi]);
        TernaryLabels tern = label_ternary(ds.returns[mi], train_returns);
        ds.labels012[mi] = std::move(tern.labels);
        ds.thresholds[mi] = {tern.low, tern.high};
    }

    ds.norm = normalize(ds.features, train_rows);
    ds.graph = threshold_graph(pearson_matrix(ds.features, train_rows), opt.tau,
                               opt.signed_threshold, ds.feature_names);
    return ds;
}

}  // namespace gcpred
