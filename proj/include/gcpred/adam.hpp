#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gcpred/array.hpp"
#include "gcpred/errors.hpp"

namespace gcpred {

/// Named parameter arrays with matching gradient buffers. Order is the
/// creation order and is part of the determinism contract (RNG draws and
/// serialization both follow it).
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Array> values;
    std::vector<Array> grads;

    std::size_t add(std::string name, Array value) {
        names.push_back(std::move(name));
        grads.emplace_back(value.shape, 0.0);
        values.push_back(std::move(value));
        return values.size() - 1;
    }

    std::size_t size() const { return values.size(); }

    void zero_grads() {
        for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
    }
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Per-parameter first/second moment estimates plus the shared step counter.
struct AdamState {
    AdamConfig config;
    std::vector<Array> m;
    std::vector<Array> v;
    long step = 0;

    static AdamState init(const ParamSet& params, AdamConfig cfg = {}) {
        AdamState s;
        s.config = cfg;
        for (const auto& p : params.values) {
            s.m.emplace_back(p.shape, 0.0);
            s.v.emplace_back(p.shape, 0.0);
        }
        return s;
    }
};

/// One bias-corrected Adam update, in place. Gradients are validated to be
/// finite; a bad gradient aborts with the parameter's name.
inline void adam_step(ParamSet& params, AdamState& state) {
    if (state.m.size() != params.size()) {
        throw TrainError("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
    }
    state.step += 1;
    const auto& cfg = state.config;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Array& value = params.values[p];
        const Array& grad = params.grads[p];
        Array& m = state.m[p];
        Array& v = state.v[p];
        for (std::size_t i = 0; i < value.numel(); ++i) {
            const double g = grad.data[i];
            if (!std::isfinite(g)) {
                throw TrainError("adam_step: non-finite gradient in parameter '" +
                                 params.names[p] + "'");
            }
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m.data[i] / bc1;
            const double v_hat = v.data[i] / bc2;
            value.data[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

}  // namespace gcpred
