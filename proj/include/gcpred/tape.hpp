#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "gcpred/array.hpp"
#include "gcpred/errors.hpp"
#include "gcpred/graph.hpp"

namespace gcpred {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;
};

/// Eager reverse-mode tape. Forward results are computed on the spot; each
/// primitive records a closure that routes the output gradient to the
/// gradients of its inputs. Nodes are created in topological order, so
/// backward() is a single reverse sweep. Single-threaded by design.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Array value) { return record(std::move(value), nullptr); }

    Var record(Array value, BackwardFn backward) {
        Node node;
        node.grad = Array(value.shape, 0.0);
        node.value = std::move(value);
        node.backward = std::move(backward);
        nodes_.push_back(std::move(node));
        return Var{this, nodes_.size() - 1};
    }

    const Array& value(const Var& v) const { return nodes_[v.id].value; }
    const Array& grad(const Var& v) const { return nodes_[v.id].grad; }

    const Array& value_of(std::size_t id) const { return nodes_[id].value; }
    Array& grad_of(std::size_t id) { return nodes_[id].grad; }

    /// Runs the reverse sweep from a scalar value, seeding its gradient.
    void backward(const Var& loss, double seed = 1.0) {
        if (loss.tape != this) throw Error("Tape::backward: var from another tape");
        if (nodes_[loss.id].value.numel() != 1) {
            throw ShapeError("Tape::backward: loss must be scalar, shape " +
                             shape_str(nodes_[loss.id].value.shape));
        }
        nodes_[loss.id].grad.data[0] += seed;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            if (nodes_[i].backward) nodes_[i].backward(*this, i);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Array value;
        Array grad;
        BackwardFn backward;
    };
    std::deque<Node> nodes_;  // deque: values stay addressable as nodes are added
};

namespace detail {

inline Tape* tape_of(const Var& a) {
    if (!a.tape) throw Error("op on default-constructed Var");
    return a.tape;
}

inline Tape* same_tape(const Var& a, const Var& b) {
    Tape* t = tape_of(a);
    if (t != tape_of(b)) throw Error("op mixing vars from different tapes");
    return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// linear maps
// ---------------------------------------------------------------------------

/// Matrix product (m x k).(k x n). Backward: dA = G.B^T, dB = A^T.G.
inline Var matmul(const Var& a, const Var& b) {
    Tape* t = detail::same_tape(a, b);
    const Array& av = t->value(a);
    const Array& bv = t->value(b);
    if (av.rank() != 2 || bv.rank() != 2) {
        throw ShapeError("matmul: expected 2-D operands, got " + shape_str(av.shape) + " and " +
                         shape_str(bv.shape));
    }
    if (av.dim(1) != bv.dim(0)) {
        throw ShapeError("matmul: inner extents differ, " + shape_str(av.shape) + " vs " +
                         shape_str(bv.shape));
    }
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Array out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double x = av.at(i, p);
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += x * bv.at(p, j);
        }
    }
    const std::size_t aid = a.id, bid = b.id;
    return t->record(std::move(out), [aid, bid, m, k, n](Tape& tp, std::size_t self) {
        const Array g = tp.grad_of(self);  // copy: grad_of below may realloc nothing, but keep safe
        const Array& av2 = tp.value_of(aid);
        const Array& bv2 = tp.value_of(bid);
        Array& ga = tp.grad_of(aid);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += g.at(i, j) * bv2.at(p, j);
                ga.at(i, p) += acc;
            }
        Array& gb = tp.grad_of(bid);
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i) acc += av2.at(i, p) * g.at(i, j);
                gb.at(p, j) += acc;
            }
    });
}

/// Affine map for a 1-D input: y = x.W + b with x (n,), W (n x m), b (m,).
inline Var dense(const Var& x, const Var& w, const Var& b) {
    Tape* t = detail::same_tape(x, w);
    detail::same_tape(x, b);
    const Array& xv = t->value(x);
    const Array& wv = t->value(w);
    const Array& bv = t->value(b);
    if (xv.rank() != 1 || wv.rank() != 2 || bv.rank() != 1 || xv.dim(0) != wv.dim(0) ||
        bv.dim(0) != wv.dim(1)) {
        throw ShapeError("dense: incompatible shapes " + shape_str(xv.shape) + ", " +
                         shape_str(wv.shape) + ", " + shape_str(bv.shape));
    }
    const std::size_t n = xv.dim(0), m = wv.dim(1);
    Array out({m});
    for (std::size_t j = 0; j < m; ++j) {
        double acc = bv.at(j);
        for (std::size_t i = 0; i < n; ++i) acc += xv.at(i) * wv.at(i, j);
        out.at(j) = acc;
    }
    const std::size_t xid = x.id, wid = w.id, bid = b.id;
    return t->record(std::move(out), [xid, wid, bid, n, m](Tape& tp, std::size_t self) {
        const Array g = tp.grad_of(self);
        const Array& xv2 = tp.value_of(xid);
        const Array& wv2 = tp.value_of(wid);
        Array& gx = tp.grad_of(xid);
        Array& gw = tp.grad_of(wid);
        Array& gb = tp.grad_of(bid);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                acc += g.at(j) * wv2.at(i, j);
                gw.at(i, j) += xv2.at(i) * g.at(j);
            }
            gx.at(i) += acc;
        }
        for (std::size_t j = 0; j < m; ++j) gb.at(j) += g.at(j);
    });
}

// ---------------------------------------------------------------------------
// convolution and pooling along the leading (time) axis
// ---------------------------------------------------------------------------

/// Valid (no padding) 1-D convolution along time.
///
/// x is (time x in_ch) or (time x node x in_ch); kernels are
/// (k x in_ch x out_ch) shared across nodes; bias is (out_ch,). Output time
/// extent is time - k + 1.
inline Var conv1d(const Var& x, const Var& kernels, const Var& bias) {
    Tape* t = detail::same_tape(x, kernels);
    detail::same_tape(x, bias);
    const Array& xv = t->value(x);
    const Array& kv = t->value(kernels);
    const Array& bv = t->value(bias);
    if (kv.rank() != 3) throw ShapeError("conv1d: kernels must be (k x in_ch x out_ch)");
    const bool per_node = xv.rank() == 3;
    if (!per_node && xv.rank() != 2) {
        throw ShapeError("conv1d: input must be 2-D or 3-D, got " + shape_str(xv.shape));
    }
    const std::size_t time = xv.dim(0);
    const std::size_t nodes = per_node ? xv.dim(1) : 1;
    const std::size_t in_ch = per_node ? xv.dim(2) : xv.dim(1);
    const std::size_t k = kv.dim(0), out_ch = kv.dim(2);
    if (kv.dim(1) != in_ch) {
        throw ShapeError("conv1d: kernel in_ch " + std::to_string(kv.dim(1)) +
                         " does not match input channels " + std::to_string(in_ch));
    }
    if (bv.rank() != 1 || bv.dim(0) != out_ch) throw ShapeError("conv1d: bias must be (out_ch,)");
    if (time < k) {
        throw ShapeError("conv1d: window too short, time " + std::to_string(time) + " < kernel " +
                         std::to_string(k));
    }
    const std::size_t out_t = time - k + 1;

    auto xat = [&](const Array& arr, std::size_t tt, std::size_t nn, std::size_t cc) {
        return per_node ? arr.at(tt, nn, cc) : arr.at(tt, cc);
    };
    Array out(per_node ? std::vector<std::size_t>{out_t, nodes, out_ch}
                       : std::vector<std::size_t>{out_t, out_ch});
    for (std::size_t tt = 0; tt < out_t; ++tt)
        for (std::size_t nn = 0; nn < nodes; ++nn)
            for (std::size_t o = 0; o < out_ch; ++o) {
                double acc = bv.at(o);
                for (std::size_t j = 0; j < k; ++j)
                    for (std::size_t c = 0; c < in_ch; ++c)
                        acc += xat(xv, tt + j, nn, c) * kv.at(j, c, o);
                if (per_node) out.at(tt, nn, o) = acc;
                else out.at(tt, o) = acc;
            }

    const std::size_t xid = x.id, kid = kernels.id, bid = bias.id;
    return t->record(std::move(out), [xid, kid, bid, per_node, out_t, nodes, in_ch, k,
                                      out_ch](Tape& tp, std::size_t self) {
        const Array g = tp.grad_of(self);
        const Array& xv2 = tp.value_of(xid);
        const Array& kv2 = tp.value_of(kid);
        Array& gx = tp.grad_of(xid);
        Array& gk = tp.grad_of(kid);
        Array& gb = tp.grad_of(bid);
        auto gat = [&](std::size_t tt, std::size_t nn, std::size_t oo) {
            return per_node ? g.at(tt, nn, oo) : g.at(tt, oo);
        };
        auto xat2 = [&](std::size_t tt, std::size_t nn, std::size_t cc) {
            return per_node ? xv2.at(tt, nn, cc) : xv2.at(tt, cc);
        };
        auto gx_add = [&](std::size_t tt, std::size_t nn, std::size_t cc, double v) {
            if (per_node) gx.at(tt, nn, cc) += v;
            else gx.at(tt, cc) += v;
        };
        for (std::size_t tt = 0; tt < out_t; ++tt)
            for (std::size_t nn = 0; nn < nodes; ++nn)
                for (std::size_t o = 0; o < out_ch; ++o) {
                    const double go = gat(tt, nn, o);
                    if (go == 0.0) continue;
                    gb.at(o) += go;
                    for (std::size_t j = 0; j < k; ++j)
                        for (std::size_t c = 0; c < in_ch; ++c) {
                            gk.at(j, c, o) += xat2(tt + j, nn, c) * go;
                            gx_add(tt + j, nn, c, kv2.at(j, c, o) * go);
                        }
                }
    });
}

/// Non-overlapping max pool along time with stride == window. The odd tail
/// is dropped (floor semantics); gradient routes to the earliest argmax.
/// x is (time x ch) or (time x node x ch).
inline Var maxpool1d(const Var& x, std::size_t window = 2) {
    Tape* t = detail::tape_of(x);
    const Array& xv = t->value(x);
    const bool per_node = xv.rank() == 3;
    if (!per_node && xv.rank() != 2) {
        throw ShapeError("maxpool1d: input must be 2-D or 3-D, got " + shape_str(xv.shape));
    }
    if (window == 0) throw ShapeError("maxpool1d: window must be positive");
    const std::size_t time = xv.dim(0);
    if (time < window) {
        throw ShapeError("maxpool1d: window too short, time " + std::to_string(time) +
                         " < window " + std::to_string(window));
    }
    const std::size_t out_t = time / window;
    const std::size_t nodes = per_node ? xv.dim(1) : 1;
    const std::size_t ch = per_node ? xv.dim(2) : xv.dim(1);

    Array out(per_node ? std::vector<std::size_t>{out_t, nodes, ch}
                       : std::vector<std::size_t>{out_t, ch});
    std::vector<std::size_t> argmax(out.numel());
    auto xat = [&](std::size_t tt, std::size_t nn, std::size_t cc) {
        return per_node ? xv.at(tt, nn, cc) : xv.at(tt, cc);
    };
    std::size_t flat = 0;
    for (std::size_t tt = 0; tt < out_t; ++tt)
        for (std::size_t nn = 0; nn < nodes; ++nn)
            for (std::size_t c = 0; c < ch; ++c, ++flat) {
                std::size_t best = tt * window;
                double bv = xat(best, nn, c);
                for (std::size_t j = 1; j < window; ++j) {
                    const double v = xat(tt * window + j, nn, c);
                    if (v > bv) {  // ties keep the earlier index
                        bv = v;
                        best = tt * window + j;
                    }
                }
                out.data[flat] = bv;
                argmax[flat] = best;
            }

    const std::size_t xid = x.id;
    return t->record(std::move(out), [xid, per_node, out_t, nodes, ch,
                                      argmax = std::move(argmax)](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        Array& gx = tp.grad_of(xid);
        std::size_t flat = 0;
        for (std::size_t tt = 0; tt < out_t; ++tt)
            for (std::size_t nn = 0; nn < nodes; ++nn)
                for (std::size_t c = 0; c < ch; ++c, ++flat) {
                    if (per_node) gx.at(argmax[flat], nn, c) += g.data[flat];
                    else gx.at(argmax[flat], c) += g.data[flat];
                }
    });
}

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

namespace detail {

template <class Fwd, class Dfn>
Var elementwise(const Var& x, Fwd fwd, Dfn dfn) {
    Tape* t = tape_of(x);
    const Array& xv = t->value(x);
    Array out(xv.shape);
    for (std::size_t i = 0; i < xv.numel(); ++i) out.data[i] = fwd(xv.data[i]);
    const std::size_t xid = x.id;
    return t->record(std::move(out), [xid, dfn](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        const Array& xv2 = tp.value_of(xid);
        Array& gx = tp.grad_of(xid);
        for (std::size_t i = 0; i < xv2.numel(); ++i) gx.data[i] += dfn(xv2.data[i]) * g.data[i];
    });
}

inline double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace detail

inline Var relu(const Var& x) {
    return detail::elementwise(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var leaky_relu(const Var& x, double slope = 0.2) {
    return detail::elementwise(
        x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

inline Var sigmoid(const Var& x) {
    return detail::elementwise(
        x, [](double v) { return detail::stable_sigmoid(v); },
        [](double v) {
            const double s = detail::stable_sigmoid(v);
            return s * (1.0 - s);
        });
}

/// Hadamard product of same-shape arrays.
inline Var mul(const Var& a, const Var& b) {
    Tape* t = detail::same_tape(a, b);
    const Array& av = t->value(a);
    const Array& bv = t->value(b);
    if (!av.same_shape(bv)) {
        throw ShapeError("mul: shapes differ, " + shape_str(av.shape) + " vs " +
                         shape_str(bv.shape));
    }
    Array out(av.shape);
    for (std::size_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] * bv.data[i];
    const std::size_t aid = a.id, bid = b.id;
    return t->record(std::move(out), [aid, bid](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        const Array& av2 = tp.value_of(aid);
        const Array& bv2 = tp.value_of(bid);
        Array& ga = tp.grad_of(aid);
        Array& gb = tp.grad_of(bid);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga.data[i] += bv2.data[i] * g.data[i];
            gb.data[i] += av2.data[i] * g.data[i];
        }
    });
}

/// Sum of all elements, as a scalar.
inline Var vsum(const Var& x) {
    Tape* t = detail::tape_of(x);
    const Array& xv = t->value(x);
    std::vector<double> terms(xv.data);
    Array out = Array::scalar(stable_sum(terms));
    const std::size_t xid = x.id;
    return t->record(std::move(out), [xid](Tape& tp, std::size_t self) {
        const double g = tp.grad_of(self).data[0];
        Array& gx = tp.grad_of(xid);
        for (auto& v : gx.data) v += g;
    });
}

// ---------------------------------------------------------------------------
// softmax and reductions
// ---------------------------------------------------------------------------

/// Numerically stable softmax along `axis` of a 1-D or 2-D array. Output
/// sums to 1 along the axis to within 1e-12.
inline Var softmax(const Var& x, std::size_t axis = 0) {
    Tape* t = detail::tape_of(x);
    const Array& xv = t->value(x);
    if (xv.rank() > 2 || axis >= xv.rank()) {
        throw ShapeError("softmax: unsupported axis " + std::to_string(axis) + " for shape " +
                         shape_str(xv.shape));
    }
    const bool rows = (xv.rank() == 2 && axis == 1) || xv.rank() == 1;
    const std::size_t groups = xv.rank() == 1 ? 1 : (rows ? xv.dim(0) : xv.dim(1));
    const std::size_t width = xv.rank() == 1 ? xv.dim(0) : (rows ? xv.dim(1) : xv.dim(0));
    auto idx = [&](std::size_t grp, std::size_t i) {
        if (xv.rank() == 1) return i;
        return rows ? grp * width + i : i * groups + grp;
    };
    Array out(xv.shape);
    for (std::size_t grp = 0; grp < groups; ++grp) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < width; ++i) mx = std::max(mx, xv.data[idx(grp, i)]);
        std::vector<double> ex(width);
        double denom = 0.0;
        for (std::size_t i = 0; i < width; ++i) {
            ex[i] = std::exp(xv.data[idx(grp, i)] - mx);
            denom += ex[i];
        }
        for (std::size_t i = 0; i < width; ++i) out.data[idx(grp, i)] = ex[i] / denom;
    }
    const std::size_t xid = x.id;
    const auto shape = xv.shape;
    return t->record(std::move(out),
                     [xid, rows, groups, width, shape](Tape& tp, std::size_t self) {
                         const Array& g = tp.grad_of(self);
                         const Array& s = tp.value_of(self);
                         Array& gx = tp.grad_of(xid);
                         auto idx2 = [&](std::size_t grp, std::size_t i) {
                             if (shape.size() == 1) return i;
                             return rows ? grp * width + i : i * groups + grp;
                         };
                         for (std::size_t grp = 0; grp < groups; ++grp) {
                             double dot = 0.0;
                             for (std::size_t i = 0; i < width; ++i)
                                 dot += s.data[idx2(grp, i)] * g.data[idx2(grp, i)];
                             for (std::size_t i = 0; i < width; ++i) {
                                 const std::size_t p = idx2(grp, i);
                                 gx.data[p] += s.data[p] * (g.data[p] - dot);
                             }
                         }
                     });
}

namespace detail {

struct AxisView {
    std::size_t out_count;   // number of output elements
    std::size_t axis_len;    // reduced extent
    std::size_t axis_step;   // stride of the reduced axis
    std::size_t outer_step;  // elements per outer block
};

inline AxisView axis_view(const Array& x, std::size_t axis) {
    if (axis >= x.rank()) {
        throw ShapeError("reduce: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape));
    }
    AxisView v{};
    v.axis_len = x.dim(axis);
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    v.axis_step = inner;
    v.outer_step = inner * v.axis_len;
    v.out_count = x.numel() / v.axis_len;
    return v;
}

inline std::vector<std::size_t> drop_axis(const std::vector<std::size_t>& shape,
                                          std::size_t axis) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (i != axis) out.push_back(shape[i]);
    if (out.empty()) out.push_back(1);
    return out;
}

// maps output element index -> base offset in the input
inline std::size_t reduce_base(const AxisView& v, std::size_t out_idx) {
    const std::size_t outer = out_idx / v.axis_step;
    const std::size_t inner = out_idx % v.axis_step;
    return outer * v.outer_step + inner;
}

}  // namespace detail

/// Mean along an axis; the axis is removed from the shape.
inline Var reduce_mean(const Var& x, std::size_t axis) {
    Tape* t = detail::tape_of(x);
    const Array& xv = t->value(x);
    const auto v = detail::axis_view(xv, axis);
    if (v.axis_len == 0) throw ShapeError("reduce_mean: empty axis");
    Array out(detail::drop_axis(xv.shape, axis));
    std::vector<double> terms(v.axis_len);
    for (std::size_t o = 0; o < v.out_count; ++o) {
        const std::size_t base = detail::reduce_base(v, o);
        for (std::size_t i = 0; i < v.axis_len; ++i) terms[i] = xv.data[base + i * v.axis_step];
        out.data[o] = stable_sum(terms) / static_cast<double>(v.axis_len);
    }
    const std::size_t xid = x.id;
    return t->record(std::move(out), [xid, v](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        Array& gx = tp.grad_of(xid);
        const double inv = 1.0 / static_cast<double>(v.axis_len);
        for (std::size_t o = 0; o < v.out_count; ++o) {
            const std::size_t base = detail::reduce_base(v, o);
            for (std::size_t i = 0; i < v.axis_len; ++i)
                gx.data[base + i * v.axis_step] += g.data[o] * inv;
        }
    });
}

/// Max along an axis; gradient routes to the earliest argmax.
inline Var reduce_max(const Var& x, std::size_t axis) {
    Tape* t = detail::tape_of(x);
    const Array& xv = t->value(x);
    const auto v = detail::axis_view(xv, axis);
    if (v.axis_len == 0) throw ShapeError("reduce_max: empty axis");
    Array out(detail::drop_axis(xv.shape, axis));
    std::vector<std::size_t> argmax(v.out_count);
    for (std::size_t o = 0; o < v.out_count; ++o) {
        const std::size_t base = detail::reduce_base(v, o);
        std::size_t best = 0;
        double bv = xv.data[base];
        for (std::size_t i = 1; i < v.axis_len; ++i) {
            const double val = xv.data[base + i * v.axis_step];
            if (val > bv) {
                bv = val;
                best = i;
            }
        }
        out.data[o] = bv;
        argmax[o] = best;
    }
    const std::size_t xid = x.id;
    return t->record(std::move(out),
                     [xid, v, argmax = std::move(argmax)](Tape& tp, std::size_t self) {
                         const Array& g = tp.grad_of(self);
                         Array& gx = tp.grad_of(xid);
                         for (std::size_t o = 0; o < v.out_count; ++o) {
                             const std::size_t base = detail::reduce_base(v, o);
                             gx.data[base + argmax[o] * v.axis_step] += g.data[o];
                         }
                     });
}

// ---------------------------------------------------------------------------
// shape plumbing
// ---------------------------------------------------------------------------

inline Var reshape(const Var& x, std::vector<std::size_t> shape) {
    Tape* t = detail::tape_of(x);
    const Array& xv = t->value(x);
    if (Array::count(shape) != xv.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(xv.shape) + " as " +
                         shape_str(shape));
    }
    Array out(std::move(shape), xv.data);
    const std::size_t xid = x.id;
    return t->record(std::move(out), [xid](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        Array& gx = tp.grad_of(xid);
        for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
    });
}

inline Var flatten(const Var& x) {
    return reshape(x, {detail::tape_of(x)->value(x).numel()});
}

/// Extracts time step `t` from a (time x node x ch) tensor as (node x ch).
inline Var time_slice(const Var& x, std::size_t step) {
    Tape* t = detail::tape_of(x);
    const Array& xv = t->value(x);
    if (xv.rank() != 3) throw ShapeError("time_slice: input must be 3-D");
    if (step >= xv.dim(0)) throw ShapeError("time_slice: step out of range");
    const std::size_t nodes = xv.dim(1), ch = xv.dim(2);
    const std::size_t block = nodes * ch;
    Array out({nodes, ch});
    std::copy_n(xv.data.begin() + static_cast<std::ptrdiff_t>(step * block), block,
                out.data.begin());
    const std::size_t xid = x.id;
    return t->record(std::move(out), [xid, step, block](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        Array& gx = tp.grad_of(xid);
        for (std::size_t i = 0; i < block; ++i) gx.data[step * block + i] += g.data[i];
    });
}

/// Stacks T equal-length vectors into a (T x ch) matrix.
inline Var stack_time(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("stack_time: no parts");
    Tape* t = detail::tape_of(parts.front());
    const std::size_t ch = t->value(parts.front()).numel();
    Array out({parts.size(), ch});
    std::vector<std::size_t> ids(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        detail::same_tape(parts.front(), parts[i]);
        const Array& pv = t->value(parts[i]);
        if (pv.numel() != ch) throw ShapeError("stack_time: ragged parts");
        std::copy(pv.data.begin(), pv.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(i * ch));
        ids[i] = parts[i].id;
    }
    return t->record(std::move(out), [ids = std::move(ids), ch](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            Array& gp = tp.grad_of(ids[i]);
            for (std::size_t c = 0; c < ch; ++c) gp.data[c] += g.data[i * ch + c];
        }
    });
}

// ---------------------------------------------------------------------------
// graph message passing
// ---------------------------------------------------------------------------

/// Degree-normalized aggregation over the feature graph:
///   out_v = x_v / d_v + sum_{u in N(v)} x_u / sqrt(d_v d_u)
/// Isolated nodes pass through unchanged (self divisor 1). The map is a
/// fixed symmetric linear operator, so backward applies the same map to the
/// output gradient. `graph` must outlive the tape.
inline Var gcn_aggregate(const Var& x, const FeatureGraph& graph) {
    Tape* t = detail::tape_of(x);
    const Array& xv = t->value(x);
    if (xv.rank() != 2 || xv.dim(0) != graph.node_count) {
        throw ShapeError("gcn_aggregate: node features " + shape_str(xv.shape) +
                         " do not match graph with " + std::to_string(graph.node_count) +
                         " nodes");
    }
    const std::size_t ch = xv.dim(1);
    const FeatureGraph* g = &graph;

    auto apply = [g, ch](const Array& in, Array& out) {
        std::vector<double> terms;
        for (std::size_t v = 0; v < g->node_count; ++v) {
            const double dv = static_cast<double>(g->degree[v]);
            const double self_w = g->degree[v] > 0 ? 1.0 / dv : 1.0;
            for (std::size_t c = 0; c < ch; ++c) {
                terms.clear();
                terms.push_back(in.at(v, c) * self_w);
                for (auto u : g->neighbors[v]) {
                    terms.push_back(in.at(u, c) /
                                    std::sqrt(dv * static_cast<double>(g->degree[u])));
                }
                out.at(v, c) = stable_sum(terms);
            }
        }
    };

    Array out({graph.node_count, ch});
    apply(xv, out);
    const std::size_t xid = x.id;
    return t->record(std::move(out), [xid, apply](Tape& tp, std::size_t self) {
        const Array& g2 = tp.grad_of(self);
        Array scratch(g2.shape);
        apply(g2, scratch);
        Array& gx = tp.grad_of(xid);
        for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += scratch.data[i];
    });
}

/// Attention-weighted aggregation over closed neighborhoods:
///   s_vu    = a[:C] . z_v + a[C:] . z_u          for u in {v} + N(v)
///   alpha_v = softmax_u(leaky_relu(s_vu, slope))
///   out_v   = sum_u alpha_vu z_u
/// z is (F x C) already linearly transformed; a is (2C,). The caller wraps
/// the result in relu to complete a GAT layer.
inline Var gat_attend(const Var& z, const Var& att, const FeatureGraph& graph,
                      double slope = 0.2) {
    Tape* t = detail::same_tape(z, att);
    const Array& zv = t->value(z);
    const Array& av = t->value(att);
    if (zv.rank() != 2 || zv.dim(0) != graph.node_count) {
        throw ShapeError("gat_attend: node features " + shape_str(zv.shape) +
                         " do not match graph with " + std::to_string(graph.node_count) +
                         " nodes");
    }
    const std::size_t ch = zv.dim(1);
    if (av.rank() != 1 || av.dim(0) != 2 * ch) {
        throw ShapeError("gat_attend: attention vector must have length " +
                         std::to_string(2 * ch));
    }
    const FeatureGraph* g = &graph;

    // flattened closed-neighborhood lists: node v owns slots
    // [offset[v], offset[v+1]) with nbr[slot0] == v itself
    std::vector<std::size_t> offset(graph.node_count + 1, 0);
    for (std::size_t v = 0; v < graph.node_count; ++v)
        offset[v + 1] = offset[v] + 1 + graph.neighbors[v].size();
    std::vector<std::uint32_t> nbr(offset.back());
    for (std::size_t v = 0; v < graph.node_count; ++v) {
        std::size_t s = offset[v];
        nbr[s++] = static_cast<std::uint32_t>(v);
        for (auto u : g->neighbors[v]) nbr[s++] = u;
    }

    std::vector<double> src_dot(graph.node_count), dst_dot(graph.node_count);
    for (std::size_t v = 0; v < graph.node_count; ++v) {
        double sd = 0.0, dd = 0.0;
        for (std::size_t c = 0; c < ch; ++c) {
            sd += av.at(c) * zv.at(v, c);
            dd += av.at(ch + c) * zv.at(v, c);
        }
        src_dot[v] = sd;
        dst_dot[v] = dd;
    }

    std::vector<double> score(nbr.size());   // pre-activation s_vu
    std::vector<double> alpha(nbr.size());   // attention weights
    std::vector<double> terms;
    for (std::size_t v = 0; v < graph.node_count; ++v) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t s = offset[v]; s < offset[v + 1]; ++s) {
            const double raw = src_dot[v] + dst_dot[nbr[s]];
            score[s] = raw;
            const double e = raw > 0.0 ? raw : slope * raw;
            alpha[s] = e;  // e_vu stored temporarily
            mx = std::max(mx, e);
        }
        terms.clear();
        for (std::size_t s = offset[v]; s < offset[v + 1]; ++s) {
            alpha[s] = std::exp(alpha[s] - mx);
            terms.push_back(alpha[s]);
        }
        const double denom = stable_sum(terms);
        for (std::size_t s = offset[v]; s < offset[v + 1]; ++s) alpha[s] /= denom;
    }

    Array out({graph.node_count, ch});
    for (std::size_t v = 0; v < graph.node_count; ++v) {
        for (std::size_t c = 0; c < ch; ++c) {
            terms.clear();
            for (std::size_t s = offset[v]; s < offset[v + 1]; ++s)
                terms.push_back(alpha[s] * zv.at(nbr[s], c));
            out.at(v, c) = stable_sum(terms);
        }
    }

    const std::size_t zid = z.id, aid = att.id;
    return t->record(
        std::move(out),
        [zid, aid, ch, slope, offset = std::move(offset), nbr = std::move(nbr),
         score = std::move(score), alpha = std::move(alpha)](Tape& tp, std::size_t self) {
            const Array& gout = tp.grad_of(self);
            const Array& zv2 = tp.value_of(zid);
            const Array& av2 = tp.value_of(aid);
            Array& gz = tp.grad_of(zid);
            Array& ga = tp.grad_of(aid);
            const std::size_t nodes = offset.size() - 1;
            std::vector<double> g_alpha(nbr.size());
            for (std::size_t v = 0; v < nodes; ++v) {
                // gradient through the weighted combination
                for (std::size_t s = offset[v]; s < offset[v + 1]; ++s) {
                    const std::uint32_t u = nbr[s];
                    double dot = 0.0;
                    for (std::size_t c = 0; c < ch; ++c) {
                        dot += gout.at(v, c) * zv2.at(u, c);
                        gz.at(u, c) += alpha[s] * gout.at(v, c);
                    }
                    g_alpha[s] = dot;
                }
                // softmax backward
                double mix = 0.0;
                for (std::size_t s = offset[v]; s < offset[v + 1]; ++s)
                    mix += alpha[s] * g_alpha[s];
                for (std::size_t s = offset[v]; s < offset[v + 1]; ++s) {
                    const double de = alpha[s] * (g_alpha[s] - mix);
                    const double ds = de * (score[s] > 0.0 ? 1.0 : slope);
                    const std::uint32_t u = nbr[s];
                    for (std::size_t c = 0; c < ch; ++c) {
                        ga.at(c) += ds * zv2.at(v, c);
                        ga.at(ch + c) += ds * zv2.at(u, c);
                        gz.at(v, c) += ds * av2.at(c);
                        gz.at(u, c) += ds * av2.at(ch + c);
                    }
                }
            }
        });
}

/// Trainable fully connected graph pooling: out = w^T X with w (F,), X (F x ch).
inline Var graph_pool_fc(const Var& x, const Var& w) {
    Tape* t = detail::same_tape(x, w);
    const Array& xv = t->value(x);
    const Array& wv = t->value(w);
    if (xv.rank() != 2 || wv.rank() != 1 || wv.dim(0) != xv.dim(0)) {
        throw ShapeError("graph_pool_fc: weights " + shape_str(wv.shape) +
                         " do not match node features " + shape_str(xv.shape));
    }
    const std::size_t nodes = xv.dim(0), ch = xv.dim(1);
    Array out({ch});
    for (std::size_t c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (std::size_t v = 0; v < nodes; ++v) acc += wv.at(v) * xv.at(v, c);
        out.at(c) = acc;
    }
    const std::size_t xid = x.id, wid = w.id;
    return t->record(std::move(out), [xid, wid, nodes, ch](Tape& tp, std::size_t self) {
        const Array& g = tp.grad_of(self);
        const Array& xv2 = tp.value_of(xid);
        const Array& wv2 = tp.value_of(wid);
        Array& gx = tp.grad_of(xid);
        Array& gw = tp.grad_of(wid);
        for (std::size_t v = 0; v < nodes; ++v) {
            double acc = 0.0;
            for (std::size_t c = 0; c < ch; ++c) {
                gx.at(v, c) += wv2.at(v) * g.at(c);
                acc += xv2.at(v, c) * g.at(c);
            }
            gw.at(v) += acc;
        }
    });
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

inline constexpr double kLogClamp = 1e-12;

/// Mean binary cross-entropy over independent sigmoid outputs; logs are
/// clamped at 1e-12.
inline Var bce_loss(const Var& probs, const std::vector<int>& targets) {
    Tape* t = detail::tape_of(probs);
    const Array& pv = t->value(probs);
    if (pv.numel() != targets.size()) {
        throw ShapeError("bce_loss: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(pv.numel()) + " outputs");
    }
    const std::size_t n = targets.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = pv.data[i];
        const double y = static_cast<double>(targets[i]);
        loss -= y * std::log(std::max(p, kLogClamp)) +
                (1.0 - y) * std::log(std::max(1.0 - p, kLogClamp));
    }
    loss /= static_cast<double>(n);
    const std::size_t pid = probs.id;
    return t->record(Array::scalar(loss), [pid, targets, n](Tape& tp, std::size_t self) {
        const double g = tp.grad_of(self).data[0];
        const Array& pv2 = tp.value_of(pid);
        Array& gp = tp.grad_of(pid);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = pv2.data[i];
            const double y = static_cast<double>(targets[i]);
            double d = 0.0;
            if (p > kLogClamp) d -= y / p;
            if (1.0 - p > kLogClamp) d += (1.0 - y) / (1.0 - p);
            gp.data[i] += g * d / static_cast<double>(n);
        }
    });
}

/// Mean cross-entropy over groups of class scores; `scores` is
/// (groups x classes) with rows already normalized, `labels` one class per
/// group. Logs are clamped at 1e-12.
inline Var group_ce_loss(const Var& scores, const std::vector<int>& labels) {
    Tape* t = detail::tape_of(scores);
    const Array& sv = t->value(scores);
    if (sv.rank() != 2 || sv.dim(0) != labels.size()) {
        throw ShapeError("group_ce_loss: scores " + shape_str(sv.shape) + " vs " +
                         std::to_string(labels.size()) + " labels");
    }
    const std::size_t groups = sv.dim(0), classes = sv.dim(1);
    double loss = 0.0;
    for (std::size_t gI = 0; gI < groups; ++gI) {
        const int y = labels[gI];
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw Error("group_ce_loss: label " + std::to_string(y) + " out of range");
        }
        loss -= std::log(std::max(sv.at(gI, static_cast<std::size_t>(y)), kLogClamp));
    }
    loss /= static_cast<double>(groups);
    const std::size_t sid = scores.id;
    return t->record(Array::scalar(loss), [sid, labels, groups](Tape& tp, std::size_t self) {
        const double g = tp.grad_of(self).data[0];
        const Array& sv2 = tp.value_of(sid);
        Array& gs = tp.grad_of(sid);
        for (std::size_t gI = 0; gI < groups; ++gI) {
            const auto y = static_cast<std::size_t>(labels[gI]);
            const double s = sv2.at(gI, y);
            if (s > kLogClamp) gs.at(gI, y) -= g / (s * static_cast<double>(groups));
        }
    });
}

}  // namespace gcpred
