#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gcpred/array.hpp"
#include "gcpred/csv.hpp"
#include "gcpred/errors.hpp"
#include "gcpred/graph.hpp"

namespace gcpred {

// ---------------------------------------------------------------------------
// markets and the canonical feature manifest
// ---------------------------------------------------------------------------

enum class Market { SP500, DJI, NASDAQ, NYSE, RUSSELL };

inline constexpr std::size_t kIndexCount = 5;

inline const std::array<Market, kIndexCount> kMarkets = {
    Market::SP500, Market::DJI, Market::NASDAQ, Market::NYSE, Market::RUSSELL};

inline const char* market_id(Market m) {
    switch (m) {
        case Market::SP500: return "SP500";
        case Market::DJI: return "DJI";
        case Market::NASDAQ: return "NASDAQ";
        case Market::NYSE: return "NYSE";
        case Market::RUSSELL: return "RUSSELL";
    }
    return "?";
}

/// Column header used in rendered report tables.
inline const char* market_display(Market m) {
    switch (m) {
        case Market::SP500: return "S&P 500";
        case Market::DJI: return "DJI";
        case Market::NASDAQ: return "NASDAQ";
        case Market::NYSE: return "NYSE";
        case Market::RUSSELL: return "RUSSELL";
    }
    return "?";
}

inline std::optional<Market> market_from_id(const std::string& id) {
    for (Market m : kMarkets)
        if (id == market_id(m)) return m;
    return std::nullopt;
}

/// The 14 per-market columns (price/volume primitives plus momentum, rate of
/// change and moving-average indicators). Every other column is shared
/// across markets. 5*14 + 68 shared = 138 combined features.
inline const std::vector<std::string>& market_specific_columns() {
    static const std::vector<std::string> cols = {
        "Close", "Volume", "Mom1",  "Mom2",  "Mom3",  "Mom5",  "ROC5",
        "ROC10", "ROC15",  "ROC20", "EMA10", "EMA20", "EMA50", "EMA200"};
    return cols;
}

/// The 68 shared columns: economic series, world indices, currencies,
/// commodities, large US stocks and futures.
inline const std::vector<std::string>& shared_columns() {
    static const std::vector<std::string> cols = {
        // economic data
        "DTB4WK", "DTB3", "DTB6", "DGS5", "DGS10", "DAAA", "DBAA", "CTB3M", "CTB6M", "CTB1Y",
        "CPI", "UNRATE",
        // world stock indices
        "FCHI", "FTSE", "GDAXI", "HSI", "KS11", "N225", "SSEC", "AORD", "BSESN", "BVSP",
        "GSPTSE", "MXX",
        // US dollar exchange rates
        "USDX", "EURUSD", "GBPUSD", "JPYUSD", "CADUSD", "CNYUSD", "AUDUSD", "CHFUSD",
        // commodities
        "OilWTI", "OilBrent", "Gold", "Silver", "Copper", "NatGas", "Wheat", "Corn",
        // big US companies
        "AAPL", "AMZN", "GE", "JNJ", "JPM", "MSFT", "WFC", "XOM", "GOOGL", "IBM", "PG", "T",
        // futures contracts
        "SP-F", "DJ-F", "NASDAQ-F", "RUSSELL-F", "CAC-F", "DAX-F", "FTSE-F", "HSI-F",
        "KOSPI-F", "NIKKEI-F", "Gold-F", "Silver-F", "Oil-F", "Gas-F", "Wheat-F", "Copper-F"};
    return cols;
}

/// All 82 canonical per-market column names, market-specific first.
inline std::vector<std::string> canonical_columns() {
    std::vector<std::string> cols = market_specific_columns();
    const auto& shared = shared_columns();
    cols.insert(cols.end(), shared.begin(), shared.end());
    return cols;
}

inline constexpr std::size_t kCanonicalFeatureCount = 82;
inline constexpr std::size_t kCombinedFeatureCount = 138;

// ---------------------------------------------------------------------------
// raw tables
// ---------------------------------------------------------------------------

/// One market's raw feature table: strictly increasing dates, one row per
/// trading day, missing values as NaN.
struct RawMarketTable {
    Market market = Market::SP500;
    std::vector<std::string> dates;
    std::vector<std::string> feature_names;
    Array values;  // dates x features

    std::size_t feature_index(const std::string& name) const {
        const auto it = std::find(feature_names.begin(), feature_names.end(), name);
        if (it == feature_names.end()) {
            throw DataError(std::string("table for ") + market_id(market) + " lacks column " +
                            name);
        }
        return static_cast<std::size_t>(it - feature_names.begin());
    }

    bool has_canonical_schema() const {
        if (feature_names.size() != kCanonicalFeatureCount) return false;
        const std::set<std::string> have(feature_names.begin(), feature_names.end());
        for (const auto& c : canonical_columns())
            if (!have.count(c)) return false;
        return true;
    }
};

/// Loads one market CSV. The header must contain Date and Close; a Name
/// column is ignored; every remaining column is a feature. Rows are sorted
/// by date and duplicate dates are rejected.
inline RawMarketTable load_market_csv(const std::string& path, Market market) {
    const CsvTable csv = read_csv(path);
    std::ptrdiff_t date_col = -1, name_col = -1;
    std::vector<std::size_t> feature_cols;
    for (std::size_t j = 0; j < csv.header.size(); ++j) {
        if (csv.header[j] == "Date") date_col = static_cast<std::ptrdiff_t>(j);
        else if (csv.header[j] == "Name") name_col = static_cast<std::ptrdiff_t>(j);
        else feature_cols.push_back(j);
    }
    (void)name_col;
    if (date_col < 0) throw DataError(path + ": missing required column Date");

    RawMarketTable table;
    table.market = market;
    for (auto j : feature_cols) table.feature_names.push_back(csv.header[j]);
    if (std::find(table.feature_names.begin(), table.feature_names.end(), "Close") ==
        table.feature_names.end()) {
        throw DataError(path + ": missing required column Close");
    }

    // parse, then sort rows by date
    std::vector<std::pair<std::string, std::size_t>> order;
    order.reserve(csv.rows.size());
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const std::string& d = csv.rows[r][static_cast<std::size_t>(date_col)];
        validate_iso_date(d, path, csv.line_numbers[r]);
        order.emplace_back(d, r);
    }
    std::sort(order.begin(), order.end());
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i].first == order[i - 1].first) {
            throw DataError(path + ": duplicate date " + order[i].first);
        }
    }

    table.dates.reserve(order.size());
    table.values = Array({order.size(), feature_cols.size()});
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t r = order[i].second;
        table.dates.push_back(order[i].first);
        for (std::size_t j = 0; j < feature_cols.size(); ++j) {
            table.values.at(i, j) = parse_cell(csv.rows[r][feature_cols[j]], path,
                                               csv.line_numbers[r], csv.header[feature_cols[j]]);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// panel alignment
// ---------------------------------------------------------------------------

struct PanelMode {
    bool combined = true;
    Market market = Market::SP500;  // used when combined == false

    static PanelMode Combined() { return PanelMode{true, Market::SP500}; }
    static PanelMode Single(Market m) { return PanelMode{false, m}; }

    std::string str() const { return combined ? "combined" : std::string(market_id(market)); }
};

/// Feature panel on the common date axis. `features` is the active matrix
/// for the chosen mode (width 82 single / 138 combined on the canonical
/// schema); `closes` keeps each market's raw closing price for labels and
/// the backtester.
struct AlignedPanel {
    std::vector<std::string> dates;
    std::vector<std::string> feature_names;
    Array features;  // dates x features
    Array closes;    // dates x kIndexCount

    std::size_t rows() const { return dates.size(); }
    std::size_t width() const { return feature_names.size(); }

    std::vector<double> close_series(std::size_t market_idx) const {
        std::vector<double> out(rows());
        for (std::size_t i = 0; i < rows(); ++i) out[i] = closes.at(i, market_idx);
        return out;
    }
};

/// Aligns the five market tables onto their common dates, forward-fills
/// interior gaps, drops leading rows that remain incomplete, and assembles
/// the mode's feature matrix. In combined mode the five market-specific
/// column groups are concatenated (prefixed "MARKET.") and shared columns
/// enter once; on the canonical schema the result must be 138 wide.
inline AlignedPanel align_panel(const std::vector<RawMarketTable>& tables, PanelMode mode) {
    if (tables.empty()) throw DataError("align_panel: no tables");
    for (std::size_t i = 0; i < tables.size(); ++i) {
        for (std::size_t j = i + 1; j < tables.size(); ++j) {
            if (tables[i].market == tables[j].market) {
                throw DataError(std::string("align_panel: duplicate table for market ") +
                                market_id(tables[i].market));
            }
        }
    }

    // common date axis
    std::map<std::string, std::size_t> date_hits;
    for (const auto& t : tables)
        for (const auto& d : t.dates) ++date_hits[d];
    std::vector<std::string> dates;
    for (const auto& [d, hits] : date_hits)
        if (hits == tables.size()) dates.push_back(d);
    if (dates.empty()) throw DataError("align_panel: empty date intersection across markets");

    // per-table row lookup on the common axis
    std::vector<std::vector<std::size_t>> row_of(tables.size());
    for (std::size_t ti = 0; ti < tables.size(); ++ti) {
        std::map<std::string, std::size_t> idx;
        for (std::size_t r = 0; r < tables[ti].dates.size(); ++r) idx[tables[ti].dates[r]] = r;
        row_of[ti].reserve(dates.size());
        for (const auto& d : dates) row_of[ti].push_back(idx.at(d));
    }

    auto table_for = [&](Market m) -> const RawMarketTable* {
        for (const auto& t : tables)
            if (t.market == m) return &t;
        return nullptr;
    };
    auto index_of_table = [&](const RawMarketTable* t) {
        return static_cast<std::size_t>(t - tables.data());
    };

    // assemble the active column set as (source table, source column, name)
    struct ColRef {
        std::size_t table;
        std::size_t col;
        std::string name;
    };
    std::vector<ColRef> cols;
    const auto& specific = market_specific_columns();
    auto is_specific = [&](const std::string& n) {
        return std::find(specific.begin(), specific.end(), n) != specific.end();
    };

    if (!mode.combined) {
        const RawMarketTable* t = table_for(mode.market);
        if (!t) throw DataError(std::string("align_panel: missing table for market ") +
                                market_id(mode.market));
        const std::size_t ti = index_of_table(t);
        for (std::size_t j = 0; j < t->feature_names.size(); ++j)
            cols.push_back({ti, j, t->feature_names[j]});
    } else {
        // market-specific groups in canonical market order, manifest order inside
        for (Market m : kMarkets) {
            const RawMarketTable* t = table_for(m);
            if (!t) throw DataError(std::string("align_panel: combined mode needs market ") +
                                    market_id(m));
            const std::size_t ti = index_of_table(t);
            for (const auto& name : specific) {
                const auto it =
                    std::find(t->feature_names.begin(), t->feature_names.end(), name);
                if (it == t->feature_names.end()) continue;
                const auto j = static_cast<std::size_t>(it - t->feature_names.begin());
                cols.push_back({ti, j, std::string(market_id(m)) + "." + name});
            }
        }
        // shared columns once, first-appearance order, values from the first
        // table that carries them
        std::set<std::string> seen;
        for (const auto& t : tables) {
            const std::size_t ti = index_of_table(&t);
            for (std::size_t j = 0; j < t.feature_names.size(); ++j) {
                const auto& name = t.feature_names[j];
                if (is_specific(name) || seen.count(name)) continue;
                seen.insert(name);
                cols.push_back({ti, j, name});
            }
        }
        const bool canonical = std::all_of(tables.begin(), tables.end(),
                                           [](const auto& t) { return t.has_canonical_schema(); });
        if (canonical && cols.size() != kCombinedFeatureCount) {
            throw DataError("align_panel: combined width " + std::to_string(cols.size()) +
                            " does not match the expected " +
                            std::to_string(kCombinedFeatureCount));
        }
    }

    AlignedPanel panel;
    panel.feature_names.reserve(cols.size());
    for (const auto& c : cols) panel.feature_names.push_back(c.name);
    Array matrix({dates.size(), cols.size()});
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto& src = tables[cols[j].table];
        for (std::size_t i = 0; i < dates.size(); ++i)
            matrix.at(i, j) = src.values.at(row_of[cols[j].table][i], cols[j].col);
    }

    // closes for every market that is present (NaN columns otherwise; the
    // full pipeline requires all five, partial sets are fine for alignment)
    Array closes({dates.size(), kIndexCount},
                 std::numeric_limits<double>::quiet_NaN());
    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        const RawMarketTable* t = table_for(kMarkets[mi]);
        if (!t) continue;
        const std::size_t ti = index_of_table(t);
        const std::size_t cj = t->feature_index("Close");
        for (std::size_t i = 0; i < dates.size(); ++i)
            closes.at(i, mi) = t->values.at(row_of[ti][i], cj);
    }

    // forward-fill interior gaps; drop leading rows that remain incomplete
    std::size_t first_full = 0;
    auto ffill = [&first_full](Array& m, bool require_values) {
        for (std::size_t j = 0; j < m.dim(1); ++j) {
            std::size_t first_valid = m.dim(0);
            double last = 0.0;
            for (std::size_t i = 0; i < m.dim(0); ++i) {
                if (std::isnan(m.at(i, j))) {
                    if (first_valid < i) m.at(i, j) = last;
                } else {
                    if (first_valid == m.dim(0)) first_valid = i;
                    last = m.at(i, j);
                }
            }
            if (first_valid == m.dim(0)) {
                if (require_values) {
                    throw DataError("align_panel: column " + std::to_string(j) +
                                    " has no values on the common dates");
                }
                continue;  // absent market's close column stays NaN
            }
            first_full = std::max(first_full, first_valid);
        }
    };
    ffill(matrix, true);
    ffill(closes, false);

    if (first_full > 0) {
        Array m2({dates.size() - first_full, matrix.dim(1)});
        Array c2({dates.size() - first_full, closes.dim(1)});
        for (std::size_t i = first_full; i < dates.size(); ++i) {
            for (std::size_t j = 0; j < matrix.dim(1); ++j)
                m2.at(i - first_full, j) = matrix.at(i, j);
            for (std::size_t j = 0; j < closes.dim(1); ++j)
                c2.at(i - first_full, j) = closes.at(i, j);
        }
        matrix = std::move(m2);
        closes = std::move(c2);
        dates.erase(dates.begin(), dates.begin() + static_cast<std::ptrdiff_t>(first_full));
    }

    panel.dates = std::move(dates);
    panel.features = std::move(matrix);
    panel.closes = std::move(closes);
    return panel;
}

// ---------------------------------------------------------------------------
// returns and labels
// ---------------------------------------------------------------------------

/// ret[t] = close[t+1]/close[t] - 1; one element shorter than the input.
inline std::vector<double> daily_returns(const std::vector<double>& close) {
    for (double c : close) {
        if (!(c > 0.0)) throw DataError("daily_returns: nonpositive close value");
    }
    if (close.size() < 2) return {};
    std::vector<double> ret(close.size() - 1);
    for (std::size_t t = 0; t + 1 < close.size(); ++t) ret[t] = close[t + 1] / close[t] - 1.0;
    return ret;
}

/// n-day generalization, n in [1, 10].
inline std::vector<double> nday_returns(const std::vector<double>& close, std::size_t n) {
    if (n < 1 || n > 10) {
        throw ConfigError("nday_returns: n must lie in [1, 10], got " + std::to_string(n));
    }
    for (double c : close) {
        if (!(c > 0.0)) throw DataError("nday_returns: nonpositive close value");
    }
    if (close.size() <= n) {
        throw DataError("nday_returns: series of length " + std::to_string(close.size()) +
                        " too short for n = " + std::to_string(n));
    }
    std::vector<double> ret(close.size() - n);
    for (std::size_t t = 0; t + n < close.size(); ++t) ret[t] = close[t + n] / close[t] - 1.0;
    return ret;
}

/// (0,1) labeling: 1 where the return is strictly positive, else 0.
inline std::vector<int> label_binary(const std::vector<double>& returns) {
    std::vector<int> out(returns.size());
    for (std::size_t i = 0; i < returns.size(); ++i) out[i] = returns[i] > 0.0 ? 1 : 0;
    return out;
}

/// Linear-interpolation percentile at position p*(n-1) of the sorted data.
inline double percentile_linear(std::vector<double> values, double p) {
    if (values.empty()) throw DataError("percentile_linear: empty input");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

/// (0,1,2) label assignment against fixed thresholds: 2 above high, 0 below
/// low, 1 otherwise.
inline std::vector<int> label_ternary_with(const std::vector<double>& returns, double low,
                                           double high) {
    std::vector<int> out(returns.size());
    for (std::size_t i = 0; i < returns.size(); ++i) {
        out[i] = returns[i] > high ? 2 : (returns[i] < low ? 0 : 1);
    }
    return out;
}

struct TernaryLabels {
    std::vector<int> labels;
    double low = 0.0;
    double high = 0.0;
};

/// (0,1,2) labeling with thresholds at the 35th/65th percentiles of the
/// first `train_count` returns; labels are assigned over the whole series
/// with those fixed thresholds.
inline TernaryLabels label_ternary(const std::vector<double>& returns, std::size_t train_count) {
    if (train_count > returns.size()) {
        throw DataError("label_ternary: training prefix exceeds series length");
    }
    if (train_count < 3) {
        throw DataError("label_ternary: need at least 3 training returns, got " +
                        std::to_string(train_count));
    }
    std::vector<double> train(returns.begin(),
                              returns.begin() + static_cast<std::ptrdiff_t>(train_count));
    TernaryLabels out;
    out.low = percentile_linear(train, 0.35);
    out.high = percentile_linear(std::move(train), 0.65);
    out.labels = label_ternary_with(returns, out.low, out.high);
    return out;
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

struct NormStats {
    std::vector<double> mean;
    std::vector<double> stdev;  // population (divide by n)
};

/// Z-scores every column with mean/std taken from the first `train_rows`
/// rows only. Columns whose training std is zero map to zero everywhere.
inline NormStats normalize(Array& panel, std::size_t train_rows) {
    if (panel.rank() != 2) throw ShapeError("normalize: panel must be 2-D");
    if (train_rows == 0 || train_rows > panel.dim(0)) {
        throw DataError("normalize: invalid training row count " + std::to_string(train_rows));
    }
    const std::size_t f = panel.dim(1);
    NormStats stats;
    stats.mean.resize(f);
    stats.stdev.resize(f);
    for (std::size_t j = 0; j < f; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < train_rows; ++i) m += panel.at(i, j);
        m /= static_cast<double>(train_rows);
        double var = 0.0;
        for (std::size_t i = 0; i < train_rows; ++i) {
            const double d = panel.at(i, j) - m;
            var += d * d;
        }
        var /= static_cast<double>(train_rows);
        const double sd = std::sqrt(var);
        stats.mean[j] = m;
        stats.stdev[j] = sd;
        for (std::size_t i = 0; i < panel.dim(0); ++i) {
            panel.at(i, j) = sd > 0.0 ? (panel.at(i, j) - m) / sd : 0.0;
        }
    }
    return stats;
}

// ---------------------------------------------------------------------------
// windows and splits
// ---------------------------------------------------------------------------

/// One training example: the window is the d panel rows ending at `anchor`
/// (inclusive) and the targets are the next-day labels at the anchor.
struct WindowSample {
    std::size_t anchor = 0;
    std::string date;
    std::array<int, kIndexCount> labels{};
};

/// Materializes a sample's (d x F) input from the panel.
inline Array window_input(const Array& panel, std::size_t anchor, std::size_t d) {
    if (anchor + 1 < d || anchor >= panel.dim(0)) {
        throw DataError("window_input: anchor " + std::to_string(anchor) +
                        " invalid for window " + std::to_string(d));
    }
    Array out({d, panel.dim(1)});
    const std::size_t start = anchor + 1 - d;
    std::copy_n(panel.data.begin() + static_cast<std::ptrdiff_t>(start * panel.dim(1)),
                d * panel.dim(1), out.data.begin());
    return out;
}

/// Builds overlapping (stride-1) samples: anchors run from d-1 through
/// N-2 so every window has d days of history and a next-day label.
inline std::vector<WindowSample> make_windows(
    const std::vector<std::string>& dates,
    const std::vector<std::vector<int>>& labels_per_index, std::size_t d) {
    const std::size_t n = dates.size();
    if (d == 0) throw ConfigError("make_windows: window must be positive");
    if (n < d + 1) {
        throw DataError("make_windows: panel of " + std::to_string(n) +
                        " dates is too short for window " + std::to_string(d));
    }
    if (labels_per_index.size() != kIndexCount) {
        throw DataError("make_windows: expected labels for all five indices");
    }
    std::vector<WindowSample> out;
    out.reserve(n - d);
    for (std::size_t t = d - 1; t + 1 < n; ++t) {
        WindowSample s;
        s.anchor = t;
        s.date = dates[t];
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
            if (labels_per_index[mi].size() != n - 1) {
                throw DataError("make_windows: label series has wrong length");
            }
            s.labels[mi] = labels_per_index[mi][t];
        }
        out.push_back(std::move(s));
    }
    return out;
}

struct SplitSpec {
    double train = 0.65;
    double validation = 0.15;
    double test = 0.20;

    static SplitSpec split_65_15_20() { return {0.65, 0.15, 0.20}; }
    static SplitSpec split_42_8_50() { return {0.42, 0.08, 0.50}; }

    std::string str() const;
};

inline std::string SplitSpec::str() const {
    auto pct = [](double v) { return std::to_string(static_cast<int>(std::lround(v * 100))); };
    return pct(train) + "-" + pct(validation) + "-" + pct(test);
}

struct SplitSizes {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
};

/// Contiguous chronological segments by fraction of sample count; train and
/// validation sizes round down, the remainder is the test segment.
inline SplitSizes chrono_split(std::size_t sample_count, const SplitSpec& spec) {
    if (!(spec.train > 0.0 && spec.validation > 0.0 && spec.test > 0.0)) {
        throw ConfigError("chrono_split: fractions must be positive");
    }
    if (std::abs(spec.train + spec.validation + spec.test - 1.0) > 1e-9) {
        throw ConfigError("chrono_split: fractions must sum to 1");
    }
    SplitSizes s;
    s.train = static_cast<std::size_t>(spec.train * static_cast<double>(sample_count));
    s.validation = static_cast<std::size_t>(spec.validation * static_cast<double>(sample_count));
    if (s.train + s.validation > sample_count) {
        throw DataError("chrono_split: degenerate split");
    }
    s.test = sample_count - s.train - s.validation;
    if (s.train == 0 || s.validation == 0 || s.test == 0) {
        throw DataError("chrono_split: a segment is empty with " + std::to_string(sample_count) +
                        " samples");
    }
    return s;
}

}  // namespace gcpred
