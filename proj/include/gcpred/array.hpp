#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "gcpred/errors.hpp"

namespace gcpred {

/// Dense row-major array of doubles with up to three axes.
///
/// The axes carry no intrinsic meaning; by convention the model code uses
/// (time), (time x channel), (node x channel) and (time x node x channel).
/// An Array is immutable by convention once handed to a Tape.
struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Array() = default;

    explicit Array(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)), data(count(shape), fill) {}

    Array(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape)) {
            throw ShapeError("Array: data size " + std::to_string(data.size()) +
                             " does not match shape product " + std::to_string(count(shape)));
        }
    }

    static Array scalar(double v) { return Array({1}, {v}); }
    static Array vec(std::vector<double> d) {
        const std::size_t n = d.size();
        return Array({n}, std::move(d));
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t rank() const { return shape.size(); }
    std::size_t numel() const { return data.size(); }
    std::size_t dim(std::size_t axis) const { return shape.at(axis); }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Array& other) const { return shape == other.shape; }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
    }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

/// Sums a scratch buffer in ascending value order.
///
/// Sorting first makes the result a function of the term multiset alone, so
/// aggregations over graph neighborhoods are bit-identical under any node
/// permutation.
inline double stable_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc;
}

}  // namespace gcpred
