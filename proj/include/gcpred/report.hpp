#pragma once

// Text artifacts: experiment results CSV, prediction CSV, backtest CSV and
// the rendered monospace tables (strategy rows; S&P 500, DJI, NASDAQ, NYSE,
// RUSSELL columns, plus Combination for trading metrics).

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gcpred/backtest.hpp"
#include "gcpred/csv.hpp"
#include "gcpred/dataprep.hpp"
#include "gcpred/model.hpp"
#include "gcpred/trainer.hpp"

namespace gcpred {

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// experiment results
// ---------------------------------------------------------------------------

struct ResultRow {
    std::string preset;
    std::uint64_t seed = 0;
    bool ok = false;
    std::array<double, kIndexCount> macro_f{};
    std::string error;
};

inline void write_results_csv(const std::string& path,
                              const std::vector<PresetResult>& results) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write results CSV: " + path);
    out << "preset,seed,status";
    for (Market m : kMarkets) out << "," << market_id(m);
    out << ",error\n";
    for (const auto& pr : results) {
        for (const auto& run : pr.runs) {
            out << pr.preset << "," << run.seed << "," << (run.ok ? "ok" : "failed");
            for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
                out << ",";
                if (run.ok) out << detail::fmt("%.6f", run.macro_f[mi]);
            }
            std::string msg = run.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << "," << msg << "\n";
        }
    }
    if (!out) throw DataError("failed writing results CSV: " + path);
}

inline std::vector<ResultRow> read_results_csv(const std::string& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() != kIndexCount + 4 || csv.header[0] != "preset") {
        throw DataError(path + ": not an experiment results CSV");
    }
    std::vector<ResultRow> rows;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        ResultRow row;
        row.preset = csv.rows[r][0];
        row.seed = std::stoull(csv.rows[r][1]);
        row.ok = csv.rows[r][2] == "ok";
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
            row.macro_f[mi] = row.ok ? parse_cell(csv.rows[r][3 + mi], path,
                                                  csv.line_numbers[r], csv.header[3 + mi])
                                     : std::numeric_limits<double>::quiet_NaN();
        }
        row.error = csv.rows[r][kIndexCount + 3];
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Per-preset mean/best aggregation of result rows (failed runs skipped;
/// a preset with no successful run keeps NaN cells, rendered as absent).
struct FAggregate {
    std::array<double, kIndexCount> mean{};
    std::array<double, kIndexCount> best{};
    std::size_t runs = 0;
};

inline std::map<std::string, FAggregate> aggregate_results(const std::vector<ResultRow>& rows) {
    std::map<std::string, FAggregate> agg;
    for (const auto& row : rows) {
        auto& a = agg[row.preset];
        if (a.runs == 0) {
            a.mean.fill(std::numeric_limits<double>::quiet_NaN());
            a.best.fill(std::numeric_limits<double>::quiet_NaN());
        }
        if (!row.ok) continue;
        ++a.runs;
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
            if (a.runs == 1) {
                a.mean[mi] = row.macro_f[mi];
                a.best[mi] = row.macro_f[mi];
            } else {
                a.mean[mi] += row.macro_f[mi];
                a.best[mi] = std::max(a.best[mi], row.macro_f[mi]);
            }
        }
    }
    for (auto& [name, a] : agg) {
        if (a.runs > 1) {
            for (auto& v : a.mean) v /= static_cast<double>(a.runs);
        }
    }
    return agg;
}

/// Sorts strategy names into the canonical table row order; unknown names
/// follow alphabetically.
inline std::vector<std::string> ordered_strategies(std::vector<std::string> names) {
    const auto& order = known_preset_order();
    auto rank = [&](const std::string& n) {
        const auto it = std::find(order.begin(), order.end(), n);
        return it == order.end() ? order.size() : static_cast<std::size_t>(it - order.begin());
    };
    std::sort(names.begin(), names.end(), [&](const std::string& a, const std::string& b) {
        const auto ra = rank(a), rb = rank(b);
        return ra != rb ? ra < rb : a < b;
    });
    return names;
}

namespace detail {

inline std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline std::string cell_or_dash(double v, const char* spec = "%.4f") {
    return std::isnan(v) ? "-" : fmt(spec, v);
}

}  // namespace detail

/// Renders the mean and best F-measure tables.
inline std::string render_f_tables(const std::map<std::string, FAggregate>& agg) {
    std::vector<std::string> names;
    for (const auto& [n, a] : agg) names.push_back(n);
    names = ordered_strategies(std::move(names));

    std::string out;
    for (const bool best : {false, true}) {
        out += best ? "Best F-measure\n" : "Mean F-measure\n";
        out += detail::pad("Strategy", 16);
        for (Market m : kMarkets) out += detail::pad(market_display(m), 10);
        out += "\n";
        for (const auto& name : names) {
            const auto& a = agg.at(name);
            out += detail::pad(name, 16);
            for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
                out += detail::pad(detail::cell_or_dash(best ? a.best[mi] : a.mean[mi]), 10);
            }
            out += "\n";
        }
        if (!best) out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// prediction series CSV
// ---------------------------------------------------------------------------

inline void write_predictions_csv(const std::string& path, const PredictionSeries& preds) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write predictions CSV: " + path);
    out << "date";
    for (Market m : kMarkets) out << "," << market_id(m);
    out << "\n";
    for (std::size_t i = 0; i < preds.dates.size(); ++i) {
        out << preds.dates[i];
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) out << "," << preds.classes[i][mi];
        out << "\n";
    }
    if (!out) throw DataError("failed writing predictions CSV: " + path);
}

struct PredictionTable {
    std::vector<std::string> dates;
    std::vector<std::array<int, kIndexCount>> classes;
};

inline PredictionTable read_predictions_csv(const std::string& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() != kIndexCount + 1 || csv.header[0] != "date") {
        throw DataError(path + ": not a predictions CSV");
    }
    PredictionTable table;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        table.dates.push_back(csv.rows[r][0]);
        std::array<int, kIndexCount> cls{};
        for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
            cls[mi] = static_cast<int>(parse_cell(csv.rows[r][1 + mi], path,
                                                  csv.line_numbers[r], csv.header[1 + mi]));
        }
        table.classes.push_back(cls);
    }
    return table;
}

// ---------------------------------------------------------------------------
// backtest CSV and tables
// ---------------------------------------------------------------------------

inline void write_backtest_csv(const std::string& path, const BacktestReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write backtest CSV: " + path);
    out << "strategy,column,sharpe,annualized_sharpe,ceq\n";
    auto col_name = [](std::size_t c) {
        return c < kIndexCount ? std::string(market_id(kMarkets[c])) : std::string("Combination");
    };
    auto opt = [](const std::optional<double>& v) {
        return v ? detail::fmt("%.10g", *v) : std::string();
    };
    for (const auto& row : report.rows) {
        for (std::size_t c = 0; c <= kIndexCount; ++c) {
            out << row.strategy << "," << col_name(c) << "," << opt(row.cells[c].sharpe) << ","
                << opt(row.cells[c].sharpe_ann) << "," << opt(row.cells[c].ceq) << "\n";
        }
    }
    if (!out) throw DataError("failed writing backtest CSV: " + path);
}

inline BacktestReport read_backtest_csv(const std::string& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() != 5 || csv.header[0] != "strategy") {
        throw DataError(path + ": not a backtest CSV");
    }
    BacktestReport report;
    std::map<std::string, std::size_t> row_of;
    auto col_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t mi = 0; mi < kIndexCount; ++mi)
            if (name == market_id(kMarkets[mi])) return mi;
        if (name == "Combination") return kIndexCount;
        throw DataError(path + ": unknown backtest column " + name);
    };
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const std::string& strategy = csv.rows[r][0];
        if (!row_of.count(strategy)) {
            row_of[strategy] = report.rows.size();
            report.rows.push_back(BacktestRow{strategy, {}});
        }
        auto& row = report.rows[row_of[strategy]];
        MetricCell cell;
        auto opt = [&](std::size_t j) -> std::optional<double> {
            if (csv.rows[r][j].empty()) return std::nullopt;
            return parse_cell(csv.rows[r][j], path, csv.line_numbers[r], csv.header[j]);
        };
        cell.sharpe = opt(2);
        cell.sharpe_ann = opt(3);
        cell.ceq = opt(4);
        row.cells[col_index(csv.rows[r][1])] = cell;
    }
    return report;
}

/// Renders the Sharpe and CEQ tables (strategy rows, index + Combination
/// columns). "Always long" leads, then the canonical strategy order.
inline std::string render_backtest_tables(const BacktestReport& report) {
    std::vector<std::string> names;
    for (const auto& row : report.rows) names.push_back(row.strategy);
    std::vector<std::string> ordered;
    for (const auto& n : names)
        if (n == "Always long") ordered.push_back(n);
    for (const auto& n : ordered_strategies(names))
        if (n != "Always long") ordered.push_back(n);

    auto row_by_name = [&](const std::string& n) -> const BacktestRow* {
        for (const auto& row : report.rows)
            if (row.strategy == n) return &row;
        return nullptr;
    };

    std::string out;
    struct TableSpec {
        const char* title;
        const char* fmt;
        std::optional<double> MetricCell::* field;
    };
    const TableSpec tables[] = {
        {"Sharpe ratio", "%.4f", &MetricCell::sharpe},
        {"CEQ return", "%.6f", &MetricCell::ceq},
    };
    for (const auto& spec : tables) {
        out += spec.title;
        out += "\n";
        out += detail::pad("Strategy", 16);
        for (Market m : kMarkets) out += detail::pad(market_display(m), 11);
        out += detail::pad("Combination", 11);
        out += "\n";
        for (const auto& name : ordered) {
            const BacktestRow* row = row_by_name(name);
            out += detail::pad(name, 16);
            for (std::size_t c = 0; c <= kIndexCount; ++c) {
                const auto& v = row->cells[c].*spec.field;
                out += detail::pad(v ? detail::fmt(spec.fmt, *v) : "-", 11);
            }
            out += "\n";
        }
        out += "\n";
    }
    return out;
}

}  // namespace gcpred
