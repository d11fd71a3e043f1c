#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gcpred/dataprep.hpp"
#include "gcpred/errors.hpp"

namespace gcpred {

// ---------------------------------------------------------------------------
// positions and PnL
// ---------------------------------------------------------------------------

/// Daily unit positions in one index: +1 long, -1 short, 0 flat.
struct PositionSeries {
    std::vector<std::string> dates;
    std::vector<int> positions;
};

/// Daily PnL of a unit-notional strategy: r_t = position_t * realized
/// next-day return. Arithmetic, no compounding, no costs.
struct PnlSeries {
    std::vector<std::string> dates;
    std::vector<double> values;
};

/// Ternary classes to positions: up (2) -> long, down (0) -> short,
/// neutral (1) -> flat.
inline PositionSeries positions_from_ternary(const std::vector<std::string>& dates,
                                             const std::vector<int>& classes) {
    if (dates.size() != classes.size()) {
        throw BacktestError("positions_from_ternary: dates and classes differ in length");
    }
    PositionSeries out;
    out.dates = dates;
    out.positions.reserve(classes.size());
    for (int c : classes) {
        switch (c) {
            case 2: out.positions.push_back(+1); break;
            case 1: out.positions.push_back(0); break;
            case 0: out.positions.push_back(-1); break;
            default:
                throw BacktestError("positions_from_ternary: class " + std::to_string(c) +
                                    " outside {0,1,2}");
        }
    }
    return out;
}

/// Binary classes to positions: up (1) -> long, down (0) -> flat.
inline PositionSeries positions_from_binary(const std::vector<std::string>& dates,
                                            const std::vector<int>& classes) {
    if (dates.size() != classes.size()) {
        throw BacktestError("positions_from_binary: dates and classes differ in length");
    }
    PositionSeries out;
    out.dates = dates;
    out.positions.reserve(classes.size());
    for (int c : classes) {
        if (c != 0 && c != 1) {
            throw BacktestError("positions_from_binary: class " + std::to_string(c) +
                                " outside {0,1}");
        }
        out.positions.push_back(c == 1 ? +1 : 0);
    }
    return out;
}

inline PositionSeries always_long_positions(const std::vector<std::string>& dates) {
    PositionSeries out;
    out.dates = dates;
    out.positions.assign(dates.size(), +1);
    return out;
}

inline PnlSeries pnl(const PositionSeries& positions, const PnlSeries& realized) {
    if (positions.dates != realized.dates) {
        throw BacktestError("pnl: position dates do not align with return dates");
    }
    PnlSeries out;
    out.dates = positions.dates;
    out.values.resize(positions.positions.size());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = static_cast<double>(positions.positions[i]) * realized.values[i];
    }
    return out;
}

/// Elementwise sum of per-index PnL series (one unit in each of the five).
inline PnlSeries combine(const std::vector<PnlSeries>& series) {
    if (series.empty()) throw BacktestError("combine: no series");
    PnlSeries out;
    out.dates = series.front().dates;
    out.values.assign(out.dates.size(), 0.0);
    for (const auto& s : series) {
        if (s.dates != out.dates) throw BacktestError("combine: misaligned PnL series");
        for (std::size_t i = 0; i < s.values.size(); ++i) out.values[i] += s.values[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

namespace detail {

inline void mean_and_popstd(const std::vector<double>& r, double& mean, double& stdev) {
    mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(r.size());
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(r.size());
    stdev = std::sqrt(var);
}

}  // namespace detail

/// Daily Sharpe: mean(r) / population std(r). Throws on fewer than two
/// observations or zero variance (degenerate strategies report as absent
/// rather than 0).
inline double sharpe(const std::vector<double>& r) {
    if (r.size() < 2) throw BacktestError("sharpe: need at least 2 PnL observations");
    double mean, stdev;
    detail::mean_and_popstd(r, mean, stdev);
    if (stdev == 0.0) throw BacktestError("sharpe: undefined for zero-variance PnL");
    return mean / stdev;
}

inline std::optional<double> sharpe_or_absent(const std::vector<double>& r) {
    try {
        return sharpe(r);
    } catch (const BacktestError&) {
        return std::nullopt;
    }
}

/// Annualization by sqrt(252) trading days.
inline double annualize(double daily_sharpe) { return daily_sharpe * std::sqrt(252.0); }

struct CeqParams {
    double gamma = 1.0;
};

/// Certainty-equivalent return: mean(r) - gamma * var(r) / 2 with
/// population variance.
inline double ceq(const std::vector<double>& r, CeqParams params = {}) {
    if (r.size() < 2) throw BacktestError("ceq: need at least 2 PnL observations");
    double mean, stdev;
    detail::mean_and_popstd(r, mean, stdev);
    return mean - params.gamma * stdev * stdev / 2.0;
}

// ---------------------------------------------------------------------------
// report assembly
// ---------------------------------------------------------------------------

struct MetricCell {
    std::optional<double> sharpe;       // absent when undefined
    std::optional<double> sharpe_ann;   // sharpe * sqrt(252)
    std::optional<double> ceq;
};

/// One strategy row: the five indices plus the Combination column.
struct BacktestRow {
    std::string strategy;
    std::array<MetricCell, kIndexCount + 1> cells;
};

struct BacktestReport {
    std::vector<BacktestRow> rows;
};

inline MetricCell metric_cell(const PnlSeries& series, CeqParams params = {}) {
    MetricCell cell;
    cell.sharpe = sharpe_or_absent(series.values);
    if (cell.sharpe) cell.sharpe_ann = annualize(*cell.sharpe);
    if (series.values.size() >= 2) cell.ceq = ceq(series.values, params);
    return cell;
}

/// Builds a strategy row from its five per-index position series and the
/// matching realized return series.
inline BacktestRow backtest_row(const std::string& strategy,
                                const std::array<PositionSeries, kIndexCount>& positions,
                                const std::array<PnlSeries, kIndexCount>& realized,
                                CeqParams params = {}) {
    BacktestRow row;
    row.strategy = strategy;
    std::vector<PnlSeries> pnls;
    pnls.reserve(kIndexCount);
    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        pnls.push_back(pnl(positions[mi], realized[mi]));
        row.cells[mi] = metric_cell(pnls.back(), params);
    }
    row.cells[kIndexCount] = metric_cell(combine(pnls), params);
    return row;
}

/// The passive calibration row: +1 in every index on every date.
inline BacktestRow always_long_row(const std::array<PnlSeries, kIndexCount>& realized,
                                   CeqParams params = {}) {
    std::array<PositionSeries, kIndexCount> positions;
    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        positions[mi] = always_long_positions(realized[mi].dates);
    }
    return backtest_row("Always long", positions, realized, params);
}

}  // namespace gcpred
