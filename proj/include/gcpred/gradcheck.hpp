#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "gcpred/array.hpp"
#include "gcpred/tape.hpp"

namespace gcpred {

/// Builds a scalar loss from leaf vars on a fresh tape.
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares tape gradients against central finite differences, leaf by leaf
/// and element by element, and returns the worst relative error. When both
/// the analytic and numeric derivative are tiny the absolute difference is
/// used instead, so exact zeros compare cleanly.
inline double grad_check(const ScalarFn& f, const std::vector<Array>& leaves, double h = 1e-6) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(leaves.size());
    for (const auto& leaf : leaves) vars.push_back(tape.leaf(leaf));
    Var loss = f(tape, vars);
    tape.backward(loss);

    auto eval = [&f](const std::vector<Array>& pts) {
        Tape t;
        std::vector<Var> vs;
        vs.reserve(pts.size());
        for (const auto& p : pts) vs.push_back(t.leaf(p));
        return t.value(f(t, vs)).data[0];
    };

    double worst = 0.0;
    std::vector<Array> probe = leaves;
    for (std::size_t leaf = 0; leaf < leaves.size(); ++leaf) {
        const Array& analytic = tape.grad(vars[leaf]);
        for (std::size_t i = 0; i < probe[leaf].numel(); ++i) {
            const double saved = probe[leaf].data[i];
            probe[leaf].data[i] = saved + h;
            const double up = eval(probe);
            probe[leaf].data[i] = saved - h;
            const double down = eval(probe);
            probe[leaf].data[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic.data[i];
            const double denom = std::max(std::abs(a), std::abs(numeric));
            const double err = denom > 1e-10 ? std::abs(a - numeric) / denom
                                             : std::abs(a - numeric);
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace gcpred
