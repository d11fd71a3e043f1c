#pragma once

#include <stdexcept>
#include <string>

namespace gcpred {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/layer shape violations (mismatched extents, window too short, ...).
struct ShapeError : Error {
    using Error::Error;
};

/// Data ingestion and preparation failures (parse, schema, alignment,
/// insufficient rows).
struct DataError : Error {
    using Error::Error;
};

/// Invalid or inconsistent run configuration.
struct ConfigError : Error {
    using Error::Error;
};

/// Training-time failures (non-finite loss, bad optimizer state).
struct TrainError : Error {
    using Error::Error;
};

/// Backtest failures (date misalignment, undefined Sharpe).
struct BacktestError : Error {
    using Error::Error;
};

}  // namespace gcpred
