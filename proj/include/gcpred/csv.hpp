#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gcpred/errors.hpp"

namespace gcpred {

/// Raw CSV contents: one header row plus data rows, all as strings.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line per row
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t start = 0;
        while (start < cell.size() && cell[start] == ' ') ++start;
        out.push_back(cell.substr(start));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(line_no);
    }
    if (table.header.empty()) throw DataError(path + ": empty CSV (no header row)");
    return table;
}

/// Parses a decimal cell; empty cells become NaN (missing value).
inline double parse_cell(const std::string& cell, const std::string& path,
                         std::size_t line_no, const std::string& column) {
    if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DataError(path + ":" + std::to_string(line_no) + ": malformed value '" + cell +
                        "' in column " + column);
    }
    return value;
}

/// Validates an ISO YYYY-MM-DD date cell.
inline void validate_iso_date(const std::string& cell, const std::string& path,
                              std::size_t line_no) {
    const bool ok = cell.size() == 10 && cell[4] == '-' && cell[7] == '-' &&
                    std::all_of(cell.begin(), cell.end(),
                                [](char c) { return c == '-' || (c >= '0' && c <= '9'); });
    if (!ok) {
        throw DataError(path + ":" + std::to_string(line_no) + ": malformed ISO date '" + cell +
                        "'");
    }
}

}  // namespace gcpred
