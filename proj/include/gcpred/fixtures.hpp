#pragma once

// Synthetic five-market fixture data with the canonical 82-column schema.
// Closes follow factor-driven geometric walks; indicator columns are real
// functions of the closes (EMAs, momentum, rate of change), so the
// correlation graph at tau = 0.7 is non-trivial. A handful of markets skip
// different "holiday" dates and a few interior cells are blank to exercise
// alignment and forward-filling. Everything is a pure function of the seed.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "gcpred/dataprep.hpp"

namespace gcpred {
namespace fixtures {

// --- civil date helpers (days since 1970-01-01) ----------------------------

inline long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

inline void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

inline std::string iso_date(long days) {
    int y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
}

/// Trading-day calendar: consecutive weekdays from 2010-01-04.
inline std::vector<std::string> trading_days(std::size_t count) {
    std::vector<std::string> out;
    long day = days_from_civil(2010, 1, 4);
    while (out.size() < count) {
        const int dow = static_cast<int>(((day % 7) + 7 + 4) % 7);  // 0 = Sunday
        if (dow != 0 && dow != 6) out.push_back(iso_date(day));
        ++day;
    }
    return out;
}

// --- series builders --------------------------------------------------------

inline std::vector<double> ema(const std::vector<double>& x, std::size_t span) {
    std::vector<double> out(x.size());
    const double alpha = 2.0 / (static_cast<double>(span) + 1.0);
    double acc = x.empty() ? 0.0 : x[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
        acc = alpha * x[i] + (1.0 - alpha) * acc;
        out[i] = acc;
    }
    return out;
}

inline std::vector<double> lag_ratio(const std::vector<double>& x, std::size_t k,
                                     double scale) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i = k; i < x.size(); ++i) out[i] = scale * (x[i] / x[i - k] - 1.0);
    return out;
}

struct FixtureData {
    std::vector<RawMarketTable> tables;
};

/// Builds the five canonical tables over `n_days` trading days.
inline FixtureData make_tables(std::size_t n_days, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto dates = trading_days(n_days);

    // latent drivers
    std::vector<double> global(n_days), rates(n_days);
    double g = 0.0, r = 0.02;
    for (std::size_t t = 0; t < n_days; ++t) {
        g = 0.85 * g + 0.3 * gauss(rng);
        r = std::max(0.001, r + 0.0005 * gauss(rng));
        global[t] = g;
        rates[t] = r;
    }

    auto walk = [&](double start, double drift, double vol, double beta) {
        std::vector<double> out(n_days);
        double level = start;
        for (std::size_t t = 0; t < n_days; ++t) {
            level *= std::exp(drift + vol * (beta * global[t] + gauss(rng)));
            out[t] = level;
        }
        return out;
    };

    // per-market closes and volumes
    std::vector<std::vector<double>> closes(kIndexCount), volumes(kIndexCount);
    const double starts[kIndexCount] = {1100.0, 10400.0, 2300.0, 7200.0, 640.0};
    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        closes[mi] = walk(starts[mi], 0.00045, 0.006, 1.2);
        volumes[mi].resize(n_days);
        double v = 1.0e9;
        for (std::size_t t = 0; t < n_days; ++t) {
            v *= std::exp(0.05 * gauss(rng));
            volumes[mi][t] = v;
        }
    }

    // shared columns, keyed by manifest name
    std::vector<std::vector<double>> shared;
    const auto& shared_names = shared_columns();
    shared.reserve(shared_names.size());
    for (const auto& name : shared_names) {
        if (name.rfind("DTB", 0) == 0 || name.rfind("DGS", 0) == 0 ||
            name.rfind("CTB", 0) == 0 || name == "DAAA" || name == "DBAA" || name == "CPI" ||
            name == "UNRATE") {
            std::vector<double> col(n_days);
            for (std::size_t t = 0; t < n_days; ++t)
                col[t] = 100.0 * rates[t] + 0.05 * gauss(rng);
            shared.push_back(std::move(col));
        } else if (name == "SP-F" || name == "DJ-F" || name == "NASDAQ-F" ||
                   name == "RUSSELL-F") {
            // index futures track the corresponding market close
            const std::size_t mi = name == "SP-F" ? 0 : name == "DJ-F" ? 1
                                   : name == "NASDAQ-F" ? 2 : 4;
            std::vector<double> col(n_days);
            for (std::size_t t = 0; t < n_days; ++t)
                col[t] = closes[mi][t] * (1.0 + 0.0005 * gauss(rng));
            shared.push_back(std::move(col));
        } else {
            shared.push_back(walk(50.0 + 10.0 * gauss(rng), 0.0002, 0.008, 0.8));
        }
    }

    FixtureData fx;
    for (std::size_t mi = 0; mi < kIndexCount; ++mi) {
        RawMarketTable t;
        t.market = kMarkets[mi];
        t.feature_names = canonical_columns();
        t.dates = dates;

        std::vector<std::vector<double>> cols;
        cols.push_back(closes[mi]);
        cols.push_back(volumes[mi]);
        cols.push_back(lag_ratio(closes[mi], 1, 1.0));
        cols.push_back(lag_ratio(closes[mi], 2, 1.0));
        cols.push_back(lag_ratio(closes[mi], 3, 1.0));
        cols.push_back(lag_ratio(closes[mi], 5, 1.0));
        cols.push_back(lag_ratio(closes[mi], 5, 100.0));
        cols.push_back(lag_ratio(closes[mi], 10, 100.0));
        cols.push_back(lag_ratio(closes[mi], 15, 100.0));
        cols.push_back(lag_ratio(closes[mi], 20, 100.0));
        cols.push_back(ema(closes[mi], 10));
        cols.push_back(ema(closes[mi], 20));
        cols.push_back(ema(closes[mi], 50));
        cols.push_back(ema(closes[mi], 200));
        for (const auto& s : shared) cols.push_back(s);

        t.values = Array({n_days, cols.size()});
        for (std::size_t j = 0; j < cols.size(); ++j)
            for (std::size_t i = 0; i < n_days; ++i) t.values.at(i, j) = cols[j][i];

        // interior gaps in one shared column per market (forward-fill fodder)
        const std::size_t gap_col = market_specific_columns().size() + 2 + mi;
        for (std::size_t i = 30 + mi; i + 5 < n_days; i += 47)
            t.values.at(i, gap_col) = std::numeric_limits<double>::quiet_NaN();

        // distinct holidays: market mi skips one date in each 61-day stretch
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < n_days; ++i) {
            if (i > 10 && (i + 7 * mi) % 61 == 0) continue;
            keep.push_back(i);
        }
        if (keep.size() != n_days) {
            RawMarketTable pruned;
            pruned.market = t.market;
            pruned.feature_names = t.feature_names;
            pruned.values = Array({keep.size(), t.values.dim(1)});
            for (std::size_t i = 0; i < keep.size(); ++i) {
                pruned.dates.push_back(t.dates[keep[i]]);
                for (std::size_t j = 0; j < t.values.dim(1); ++j)
                    pruned.values.at(i, j) = t.values.at(keep[i], j);
            }
            t = std::move(pruned);
        }
        fx.tables.push_back(std::move(t));
    }
    return fx;
}

/// Writes one table as the CSV schema load_market_csv() reads.
inline void write_market_csv(const RawMarketTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write fixture CSV: " + path);
    out << "Date";
    for (const auto& name : t.feature_names) out << "," << name;
    out << "\n";
    char buf[40];
    for (std::size_t i = 0; i < t.dates.size(); ++i) {
        out << t.dates[i];
        for (std::size_t j = 0; j < t.values.dim(1); ++j) {
            const double v = t.values.at(i, j);
            if (std::isnan(v)) {
                out << ",";
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << "," << buf;
            }
        }
        out << "\n";
    }
    if (!out) throw DataError("failed writing fixture CSV: " + path);
}

/// Writes all five market CSVs into `dir` as <MARKET>.csv.
inline std::vector<std::string> write_fixture_set(const std::string& dir, std::size_t n_days,
                                                  std::uint64_t seed) {
    const FixtureData fx = make_tables(n_days, seed);
    std::vector<std::string> paths;
    for (const auto& t : fx.tables) {
        std::string path = dir + "/" + market_id(t.market) + ".csv";
        write_market_csv(t, path);
        paths.push_back(std::move(path));
    }
    return paths;
}

}  // namespace fixtures
}  // namespace gcpred
