#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "gnmr/tensor.hpp"

namespace gnmr::nd {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    std::int64_t id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
};

class Gradients {
public:
    explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

    // Gradient of the loss w.r.t. the value at `v`; zero tensor if the loss
    // does not depend on it.
    const Tensor& at(Var v) const { return grads_.at(static_cast<std::size_t>(v.id)); }

private:
    std::vector<Tensor> grads_;
};

// Define-by-run tape: ops append nodes in execution order, which is a
// topological order by construction. One backward pass per tape.
class Tape {
public:
    using BackFn = std::function<void(const Tensor& gout, Tape& tape, std::vector<Tensor>& grads)>;

    Var leaf(const Tensor& t) { return Var{this, push(t, t.requires_grad(), {}, nullptr)}; }

    Var constant(Tensor t) {
        t.set_requires_grad(false);
        return Var{this, push(std::move(t), false, {}, nullptr)};
    }

    Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }

    std::size_t size() const { return nodes_.size(); }

    bool needs_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).needs_grad; }

    Gradients backward(Var loss) {
        if (loss.tape != this) throw std::logic_error("backward: loss lives on another tape");
        if (consumed_) throw std::logic_error("backward: tape already consumed");
        const Tensor& lv = value(loss);
        if (!lv.is_scalar())
            throw shape_error("backward: loss must be scalar, got " + shape_str(lv.shape()));
        consumed_ = true;

        std::vector<Tensor> grads(nodes_.size());
        grads[static_cast<std::size_t>(loss.id)] = Tensor(lv.shape(), 1.0);
        for (std::int64_t i = loss.id; i >= 0; --i) {
            auto& node = nodes_[static_cast<std::size_t>(i)];
            if (!node.needs_grad || grads[static_cast<std::size_t>(i)].empty()) continue;
            if (node.backprop) node.backprop(grads[static_cast<std::size_t>(i)], *this, grads);
        }
        // materialize zeros for untouched leaves so callers can index uniformly
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (grads[i].empty()) grads[i] = Tensor::zeros_like(nodes_[i].value);
        }
        return Gradients(std::move(grads));
    }

    std::int64_t push(Tensor value, bool needs_grad, std::vector<std::int64_t> parents, BackFn fn) {
        nodes_.push_back(Node{std::move(value), needs_grad, std::move(parents), std::move(fn)});
        return static_cast<std::int64_t>(nodes_.size()) - 1;
    }

private:
    struct Node {
        Tensor value;
        bool needs_grad;
        std::vector<std::int64_t> parents;
        BackFn backprop;
    };

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

namespace detail {

inline void same_tape(Var a, Var b, const char* op) {
    if (a.tape == nullptr || a.tape != b.tape)
        throw std::logic_error(std::string(op) + ": operands live on different tapes");
}

inline void accumulate(std::vector<Tensor>& grads, Tape& tape, std::int64_t id, const Tensor& g) {
    auto& slot = grads[static_cast<std::size_t>(id)];
    if (slot.empty()) slot = Tensor::zeros_like(tape.value(Var{&tape, id}));
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
}

// accumulate a single scalar contribution
inline void accumulate_at(std::vector<Tensor>& grads, Tape& tape, std::int64_t id, std::size_t flat,
                          double v) {
    auto& slot = grads[static_cast<std::size_t>(id)];
    if (slot.empty()) slot = Tensor::zeros_like(tape.value(Var{&tape, id}));
    slot[flat] += v;
}

inline Var record(Tape& tape, Tensor value, std::vector<Var> parents, Tape::BackFn fn,
                  const char* op) {
    ensure_finite(value, op);
    bool ng = false;
    std::vector<std::int64_t> pids;
    pids.reserve(parents.size());
    for (Var p : parents) {
        ng = ng || tape.needs_grad(p);
        pids.push_back(p.id);
    }
    return Var{&tape, tape.push(std::move(value), ng, std::move(pids), ng ? std::move(fn) : nullptr)};
}

}  // namespace detail

// ---- elementwise binary ops (exact shape match or scalar broadcast) ----

namespace detail {

enum class BinKind { add, sub, mul };

inline Var binary(Var a, Var b, BinKind kind, const char* name) {
    same_tape(a, b, name);
    Tape& tape = *a.tape;
    const Tensor& av = tape.value(a);
    const Tensor& bv = tape.value(b);

    const bool a_scalar = av.is_scalar();
    const bool b_scalar = bv.is_scalar();
    if (!av.same_shape(bv) && !a_scalar && !b_scalar)
        throw shape_error(std::string(name) + ": incompatible shapes " + shape_str(av.shape()) +
                          " vs " + shape_str(bv.shape()));

    const Tensor& big = b_scalar ? av : bv;
    Tensor out(big.shape());
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a_scalar ? av[0] : av[i];
        const double y = b_scalar ? bv[0] : bv[i];
        switch (kind) {
            case BinKind::add: out[i] = x + y; break;
            case BinKind::sub: out[i] = x - y; break;
            case BinKind::mul: out[i] = x * y; break;
        }
    }

    auto back = [a = a.id, b = b.id, a_scalar, b_scalar, kind](const Tensor& g, Tape& t,
                                                               std::vector<Tensor>& grads) {
        const Tensor& av = t.value(Var{&t, a});
        const Tensor& bv = t.value(Var{&t, b});
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double gi = g[i];
            const double x = a_scalar ? av[0] : av[i];
            const double y = b_scalar ? bv[0] : bv[i];
            double ga = 0.0, gb = 0.0;
            switch (kind) {
                case BinKind::add: ga = gi, gb = gi; break;
                case BinKind::sub: ga = gi, gb = -gi; break;
                case BinKind::mul: ga = gi * y, gb = gi * x; break;
            }
            accumulate_at(grads, t, a, a_scalar ? 0 : i, ga);
            accumulate_at(grads, t, b, b_scalar ? 0 : i, gb);
        }
    };
    return record(tape, std::move(out), {a, b}, std::move(back), name);
}

}  // namespace detail

inline Var add(Var a, Var b) { return detail::binary(a, b, detail::BinKind::add, "add"); }
inline Var sub(Var a, Var b) { return detail::binary(a, b, detail::BinKind::sub, "sub"); }
inline Var mul(Var a, Var b) { return detail::binary(a, b, detail::BinKind::mul, "mul"); }

inline Var scale(Var a, double c) {
    Tape& tape = *a.tape;
    const Tensor& av = tape.value(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
    auto back = [a = a.id, c](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        for (std::size_t i = 0; i < g.size(); ++i) detail::accumulate_at(grads, t, a, i, g[i] * c);
    };
    return detail::record(tape, std::move(out), {a}, std::move(back), "scale");
}

// ---- elementwise unary ----

inline Var relu(Var a) {
    Tape& tape = *a.tape;
    const Tensor& av = tape.value(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    // subgradient at 0 is 0
    auto back = [a = a.id](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        const Tensor& av = t.value(Var{&t, a});
        for (std::size_t i = 0; i < g.size(); ++i)
            if (av[i] > 0.0) detail::accumulate_at(grads, t, a, i, g[i]);
    };
    return detail::record(tape, std::move(out), {a}, std::move(back), "relu");
}

inline Var exp(Var a) {
    Tape& tape = *a.tape;
    const Tensor& av = tape.value(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::exp(av[i]);
    auto back = [a = a.id, self = tape.size()](const Tensor& g, Tape& t,
                                               std::vector<Tensor>& grads) {
        const Tensor& ov = t.value(Var{&t, static_cast<std::int64_t>(self)});
        for (std::size_t i = 0; i < g.size(); ++i)
            detail::accumulate_at(grads, t, a, i, g[i] * ov[i]);
    };
    return detail::record(tape, std::move(out), {a}, std::move(back), "exp");
}

// ---- matrix ops ----

inline Var matmul(Var a, Var b) {
    detail::same_tape(a, b, "matmul");
    Tape& tape = *a.tape;
    const Tensor& A = tape.value(a);
    const Tensor& B = tape.value(b);
    if (!A.is_matrix() || !B.is_matrix() || A.shape()[1] != B.shape()[0])
        throw shape_error("matmul: incompatible shapes " + shape_str(A.shape()) + " vs " +
                          shape_str(B.shape()));
    const std::size_t m = A.shape()[0], k = A.shape()[1], n = B.shape()[1];
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A.at(i, p);
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += aip * B.at(p, j);
        }

    auto back = [a = a.id, b = b.id, m, k, n](const Tensor& g, Tape& t,
                                              std::vector<Tensor>& grads) {
        const Tensor& A = t.value(Var{&t, a});
        const Tensor& B = t.value(Var{&t, b});
        // dA = g * B^T
        Tensor ga({m, k});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double gij = g.at(i, j);
                if (gij == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) ga.at(i, p) += gij * B.at(p, j);
            }
        detail::accumulate(grads, t, a, ga);
        // dB = A^T * g
        Tensor gb({k, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = A.at(i, p);
                if (aip == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) gb.at(p, j) += aip * g.at(i, j);
            }
        detail::accumulate(grads, t, b, gb);
    };
    return detail::record(tape, std::move(out), {a, b}, std::move(back), "matmul");
}

inline Var transpose(Var a) {
    Tape& tape = *a.tape;
    const Tensor& A = tape.value(a);
    if (!A.is_matrix()) throw shape_error("transpose: expected matrix, got " + shape_str(A.shape()));
    const std::size_t m = A.shape()[0], n = A.shape()[1];
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
    auto back = [a = a.id, m, n](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        Tensor ga({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga.at(i, j) = g.at(j, i);
        detail::accumulate(grads, t, a, ga);
    };
    return detail::record(tape, std::move(out), {a}, std::move(back), "transpose");
}

// concatenate matrices with equal row counts along the last axis
inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw shape_error("concat_cols: no inputs");
    Tape& tape = *parts.front().tape;
    const std::size_t m = tape.value(parts.front()).shape()[0];
    std::size_t total = 0;
    for (Var p : parts) {
        detail::same_tape(parts.front(), p, "concat_cols");
        const Tensor& v = tape.value(p);
        if (!v.is_matrix() || v.shape()[0] != m)
            throw shape_error("concat_cols: row count mismatch");
        total += v.shape()[1];
    }
    Tensor out({m, total});
    std::size_t off = 0;
    std::vector<std::pair<std::int64_t, std::pair<std::size_t, std::size_t>>> spans;
    for (Var p : parts) {
        const Tensor& v = tape.value(p);
        const std::size_t n = v.shape()[1];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out.at(i, off + j) = v.at(i, j);
        spans.push_back({p.id, {off, n}});
        off += n;
    }
    auto back = [spans, m](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        for (const auto& [id, span] : spans) {
            const auto [off, n] = span;
            Tensor gp({m, n});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gp.at(i, j) = g.at(i, off + j);
            detail::accumulate(grads, t, id, gp);
        }
    };
    return detail::record(tape, std::move(out), parts, std::move(back), "concat_cols");
}

// stack 1xN rows into an MxN matrix
inline Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw shape_error("stack_rows: no inputs");
    Tape& tape = *rows.front().tape;
    const std::size_t n = tape.value(rows.front()).cols();
    Tensor out({rows.size(), n});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        detail::same_tape(rows.front(), rows[r], "stack_rows");
        const Tensor& v = tape.value(rows[r]);
        if (v.size() != n || v.rows() != 1) throw shape_error("stack_rows: expected 1x" + std::to_string(n));
        for (std::size_t j = 0; j < n; ++j) out.at(r, j) = v[j];
    }
    std::vector<std::int64_t> ids;
    ids.reserve(rows.size());
    for (Var v : rows) ids.push_back(v.id);
    auto back = [ids, n](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        for (std::size_t r = 0; r < ids.size(); ++r) {
            Tensor gr({1, n});
            for (std::size_t j = 0; j < n; ++j) gr[j] = g.at(r, j);
            detail::accumulate(grads, t, ids[r], gr);
        }
    };
    return detail::record(tape, std::move(out), rows, std::move(back), "stack_rows");
}

inline Var row(Var a, std::size_t i) {
    Tape& tape = *a.tape;
    const Tensor& A = tape.value(a);
    if (!A.is_matrix() || i >= A.shape()[0])
        throw shape_error("row: index " + std::to_string(i) + " out of range for " +
                          shape_str(A.shape()));
    const std::size_t n = A.shape()[1];
    Tensor out({1, n});
    for (std::size_t j = 0; j < n; ++j) out[j] = A.at(i, j);
    auto back = [a = a.id, i, n](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        for (std::size_t j = 0; j < n; ++j) detail::accumulate_at(grads, t, a, i * n + j, g[j]);
    };
    return detail::record(tape, std::move(out), {a}, std::move(back), "row");
}

inline Var gather_rows(Var a, std::vector<std::uint32_t> idx) {
    Tape& tape = *a.tape;
    const Tensor& A = tape.value(a);
    if (!A.is_matrix()) throw shape_error("gather_rows: expected matrix");
    const std::size_t n = A.shape()[1];
    Tensor out({idx.size(), n});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= A.shape()[0]) throw shape_error("gather_rows: index out of range");
        for (std::size_t j = 0; j < n; ++j) out.at(r, j) = A.at(idx[r], j);
    }
    auto back = [a = a.id, idx = std::move(idx), n](const Tensor& g, Tape& t,
                                                    std::vector<Tensor>& grads) {
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t j = 0; j < n; ++j)
                detail::accumulate_at(grads, t, a, std::size_t{idx[r]} * n + j, g.at(r, j));
    };
    return detail::record(tape, std::move(out), {a}, Tape::BackFn(back), "gather_rows");
}

// per-list sums of rows of `a`: out[r] = sum_{j in lists[r]} a[j]
// (mean=true divides by the list length; empty lists give zero rows)
inline Var neighbor_sum(Var a, std::shared_ptr<const std::vector<std::vector<std::uint32_t>>> lists,
                        bool mean = false) {
    Tape& tape = *a.tape;
    const Tensor& A = tape.value(a);
    if (!A.is_matrix()) throw shape_error("neighbor_sum: expected matrix");
    const std::size_t n = A.shape()[1];
    const std::size_t m = lists->size();
    Tensor out({m, n});
    for (std::size_t r = 0; r < m; ++r) {
        const auto& nb = (*lists)[r];
        for (std::uint32_t j : nb) {
            if (j >= A.shape()[0]) throw shape_error("neighbor_sum: index out of range");
            for (std::size_t c = 0; c < n; ++c) out.at(r, c) += A.at(j, c);
        }
        if (mean && !nb.empty())
            for (std::size_t c = 0; c < n; ++c) out.at(r, c) /= static_cast<double>(nb.size());
    }
    auto back = [a = a.id, lists = std::move(lists), n, mean](const Tensor& g, Tape& t,
                                                              std::vector<Tensor>& grads) {
        for (std::size_t r = 0; r < lists->size(); ++r) {
            const auto& nb = (*lists)[r];
            const double w = (mean && !nb.empty()) ? 1.0 / static_cast<double>(nb.size()) : 1.0;
            for (std::uint32_t j : nb)
                for (std::size_t c = 0; c < n; ++c)
                    detail::accumulate_at(grads, t, a, std::size_t{j} * n + c, w * g.at(r, c));
        }
    };
    return detail::record(tape, std::move(out), {a}, Tape::BackFn(back), "neighbor_sum");
}

inline Var sum_rows(Var a, const std::vector<std::uint32_t>& idx) {
    auto lists = std::make_shared<const std::vector<std::vector<std::uint32_t>>>(
        std::vector<std::vector<std::uint32_t>>{idx});
    return neighbor_sum(a, std::move(lists), false);
}

// ---- reductions ----

inline Var sum_axis(Var a, int axis) {
    Tape& tape = *a.tape;
    const Tensor& A = tape.value(a);
    if (!A.is_matrix() || (axis != 0 && axis != 1))
        throw shape_error("sum_axis: expected matrix and axis in {0,1}");
    const std::size_t m = A.shape()[0], n = A.shape()[1];
    Tensor out(axis == 0 ? Shape{1, n} : Shape{m, 1});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += A.at(i, j);
    auto back = [a = a.id, m, n, axis](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                detail::accumulate_at(grads, t, a, i * n + j, g[axis == 0 ? j : i]);
    };
    return detail::record(tape, std::move(out), {a}, std::move(back), "sum_axis");
}

inline Var sum_all(Var a) {
    Tape& tape = *a.tape;
    const Tensor& A = tape.value(a);
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    auto back = [a = a.id](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(Var{&t, a});
        for (std::size_t i = 0; i < A.size(); ++i) detail::accumulate_at(grads, t, a, i, g[0]);
    };
    return detail::record(tape, Tensor::scalar(s), {a}, std::move(back), "sum_all");
}

// ---- softmax ----

inline Var softmax_axis(Var a, int axis) {
    Tape& tape = *a.tape;
    const Tensor& A = tape.value(a);
    if (!A.is_matrix() || (axis != 0 && axis != 1))
        throw shape_error("softmax_axis: expected matrix and axis in {0,1}");
    const std::size_t m = A.shape()[0], n = A.shape()[1];
    Tensor out({m, n});
    const std::size_t slices = axis == 1 ? m : n;
    const std::size_t extent = axis == 1 ? n : m;
    auto idx = [&](std::size_t s, std::size_t e) { return axis == 1 ? s * n + e : e * n + s; };
    for (std::size_t s = 0; s < slices; ++s) {
        double mx = A[idx(s, 0)];
        for (std::size_t e = 1; e < extent; ++e) mx = std::max(mx, A[idx(s, e)]);
        double den = 0.0;
        for (std::size_t e = 0; e < extent; ++e) den += std::exp(A[idx(s, e)] - mx);
        for (std::size_t e = 0; e < extent; ++e) out[idx(s, e)] = std::exp(A[idx(s, e)] - mx) / den;
    }
    auto back = [a = a.id, self = tape.size(), m, n, axis](const Tensor& g, Tape& t,
                                                           std::vector<Tensor>& grads) {
        const Tensor& y = t.value(Var{&t, static_cast<std::int64_t>(self)});
        const std::size_t slices = axis == 1 ? m : n;
        const std::size_t extent = axis == 1 ? n : m;
        auto idx = [&](std::size_t s, std::size_t e) { return axis == 1 ? s * n + e : e * n + s; };
        for (std::size_t s = 0; s < slices; ++s) {
            double gy = 0.0;
            for (std::size_t e = 0; e < extent; ++e) gy += g[idx(s, e)] * y[idx(s, e)];
            for (std::size_t e = 0; e < extent; ++e)
                detail::accumulate_at(grads, t, a, idx(s, e), y[idx(s, e)] * (g[idx(s, e)] - gy));
        }
    };
    return detail::record(tape, std::move(out), {a}, std::move(back), "softmax_axis");
}

// ---- broadcast helpers ----

inline Var tile_rows(Var v, std::size_t m) {
    Tape& tape = *v.tape;
    const Tensor& V = tape.value(v);
    if (V.rows() != 1) throw shape_error("tile_rows: expected 1xN, got " + shape_str(V.shape()));
    const std::size_t n = V.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = V[j];
    auto back = [v = v.id, m, n](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += g.at(i, j);
            detail::accumulate_at(grads, t, v, j, s);
        }
    };
    return detail::record(tape, std::move(out), {v}, std::move(back), "tile_rows");
}

inline Var col(Var a, std::size_t j) {
    Tape& tape = *a.tape;
    const Tensor& A = tape.value(a);
    if (!A.is_matrix() || j >= A.shape()[1]) throw shape_error("col: index out of range");
    const std::size_t m = A.shape()[0], n = A.shape()[1];
    Tensor out({m, 1});
    for (std::size_t i = 0; i < m; ++i) out[i] = A.at(i, j);
    auto back = [a = a.id, j, m, n](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        for (std::size_t i = 0; i < m; ++i) detail::accumulate_at(grads, t, a, i * n + j, g[i]);
    };
    return detail::record(tape, std::move(out), {a}, std::move(back), "col");
}

inline Var tile_cols(Var v, std::size_t n) {
    Tape& tape = *v.tape;
    const Tensor& V = tape.value(v);
    if (!V.is_matrix() || V.shape()[1] != 1)
        throw shape_error("tile_cols: expected Mx1, got " + shape_str(V.shape()));
    const std::size_t m = V.shape()[0];
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = V[i];
    auto back = [v = v.id, m, n](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g.at(i, j);
            detail::accumulate_at(grads, t, v, i, s);
        }
    };
    return detail::record(tape, std::move(out), {v}, std::move(back), "tile_cols");
}

// inner product of two 1xN rows
inline Var dot(Var a, Var b) { return sum_all(mul(a, b)); }

}  // namespace gnmr::nd
