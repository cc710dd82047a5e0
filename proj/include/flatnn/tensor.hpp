#pragma once

// Dense 64-bit-float tensors plus a per-forward-pass gradient tape.
//
// Operations are plain array math until one of their inputs is watched by a
// GradientRecord; from then on every derived result is appended to that
// record and reverse-mode adjoints can be pulled out after backward(). A
// record is meant to live for exactly one forward/backward pass and is
// rebuilt for the next one.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "flatnn/errors.hpp"

namespace flatnn {

using Shape = std::vector<std::size_t>;

class GradientRecord;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

struct Tensor {
    Shape shape;
    std::vector<double> data;
    GradientRecord* record = nullptr;  // handle into the active record, if any
    std::size_t node = 0;              // node id, valid iff record != nullptr

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        std::size_t expect = 1;
        for (std::size_t dim : shape) {
            if (dim == 0) throw ShapeError("tensor dimension must be positive, got shape " + shape_str(shape));
            expect *= dim;
        }
        if (expect != data.size())
            throw ShapeError("tensor shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    }

    static Tensor zeros(Shape s) {
        std::size_t n = 1;
        for (std::size_t dim : s) n *= dim;
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }
    static Tensor full(Shape s, double v) {
        std::size_t n = 1;
        for (std::size_t dim : s) n *= dim;
        return Tensor(std::move(s), std::vector<double>(n, v));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> d) {
        return Tensor({r, c}, std::move(d));
    }
    static Tensor vec(std::vector<double> d) {
        std::size_t n = d.size();
        return Tensor({n}, std::move(d));
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.size() == 1 ? shape[0] : shape.at(1); }

    double operator()(std::size_t i) const { return data[i]; }
    double& operator()(std::size_t i) { return data[i]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }

    bool tracked() const { return record != nullptr; }

    /// Same tensor value with any record handle stripped.
    Tensor detached() const { return Tensor(shape, data); }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

inline bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

enum class ElementwiseOp { add, sub, mul };

/// Reverse-mode tape. Leaves are registered with watch(); every primitive
/// whose inputs touch this record appends one node. backward() fills the
/// node_id -> adjoint map, and adjoint() reads it back per tensor.
class GradientRecord {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    enum class Op : std::uint8_t { leaf, matmul, add, sub, mul, relu, sum, concat_cols, softmax_xent };

    /// Registers `t` as a leaf of this record (parameters, inputs).
    void watch(Tensor& t) {
        Node n;
        n.op = Op::leaf;
        n.shape = t.shape;
        n.value = t.data;
        t.record = this;
        t.node = push(std::move(n));
    }

    bool owns(const Tensor& t) const { return t.record == this && t.node < nodes_.size(); }

    std::size_t node_count() const { return nodes_.size(); }

    /// Runs the chain rule once over the whole record, newest node first.
    /// `output` must be a scalar on this record.
    void backward(const Tensor& output) {
        if (!owns(output))
            throw ValueError("backward: output tensor is not on this record");
        if (output.size() != 1)
            throw ShapeError("backward: output must be scalar, got shape " + shape_str(output.shape));

        adjoints_.assign(nodes_.size(), {});
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            adjoints_[i].assign(value_size(nodes_[i].shape), 0.0);
        adjoints_[output.node][0] = 1.0;

        for (std::size_t i = nodes_.size(); i-- > 0;) propagate(i);
        ran_ = true;
    }

    /// Accumulated adjoint of a tensor on this record; call after backward().
    Tensor adjoint(const Tensor& t) const {
        if (!owns(t)) throw ValueError("adjoint: tensor is not on this record");
        if (!ran_) throw ValueError("adjoint: backward() has not run on this record");
        return Tensor(nodes_[t.node].shape, adjoints_[t.node]);
    }

private:
    friend Tensor matmul(const Tensor&, const Tensor&);
    friend Tensor elementwise(const Tensor&, const Tensor&, ElementwiseOp);
    friend Tensor relu(const Tensor&);
    friend Tensor sum(const Tensor&);
    friend Tensor concat_cols(const Tensor&, const Tensor&);
    friend Tensor softmax_cross_entropy(const Tensor&, std::span<const int>);

    // One operand: either a reference to an earlier node or an inline
    // constant (a tensor that was never watched, e.g. frozen parameters).
    struct Operand {
        std::size_t node = npos;
        Shape shape;
        std::vector<double> value;  // used only when node == npos
    };

    struct Node {
        Op op = Op::leaf;
        Operand a, b;
        Shape shape;
        std::vector<double> value;
        std::vector<int> labels;  // softmax_xent only
    };

    static std::size_t value_size(const Shape& s) {
        std::size_t n = 1;
        for (std::size_t dim : s) n *= dim;
        return n;
    }

    std::size_t push(Node n) {
        nodes_.push_back(std::move(n));
        ran_ = false;
        return nodes_.size() - 1;
    }

    Operand capture(const Tensor& t) const {
        Operand o;
        o.shape = t.shape;
        if (t.record == this) {
            o.node = t.node;
        } else {
            o.value = t.data;
        }
        return o;
    }

    const std::vector<double>& operand_value(const Operand& o) const {
        return o.node == npos ? o.value : nodes_[o.node].value;
    }

    void accumulate(const Operand& o, std::size_t idx, double v) {
        if (o.node != npos) adjoints_[o.node][idx] += v;
    }

    void propagate(std::size_t id);

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> adjoints_;
    bool ran_ = false;
};

namespace detail {

inline GradientRecord* pick_record(const Tensor& a, const Tensor* b = nullptr) {
    GradientRecord* rec = a.record;
    if (b && b->record) {
        if (rec && rec != b->record)
            throw ValueError("operation mixes tensors from two different gradient records");
        rec = b->record;
    }
    return rec;
}

inline void check_matmul_shapes(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape) + " and " + shape_str(b.shape));
}

inline void matmul_values(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
                          std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
            out[i * n + j] = acc;
        }
}

// True when `b` is a length-n vector broadcast over the rows of an m x n `a`.
inline bool is_bias_broadcast(const Tensor& a, const Tensor& b) {
    return a.rank() == 2 && b.rank() == 1 && b.shape[0] == a.shape[1];
}

inline void check_elementwise_shapes(const Tensor& a, const Tensor& b) {
    if (!same_shape(a, b) && !is_bias_broadcast(a, b))
        throw ShapeError("elementwise: incompatible shapes " + shape_str(a.shape) + " and " +
                         shape_str(b.shape));
}

// Per-row logsumexp of an r x c logits block, stabilized by max-subtraction.
inline void row_logsumexp(const double* logits, std::size_t r, std::size_t c, double* lse) {
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = logits + i * c;
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
        lse[i] = mx + std::log(s);
    }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::check_matmul_shapes(a, b);
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = Tensor::zeros({m, n});
    detail::matmul_values(a.data.data(), b.data.data(), out.data.data(), m, k, n);

    if (GradientRecord* rec = detail::pick_record(a, &b)) {
        GradientRecord::Node node;
        node.op = GradientRecord::Op::matmul;
        node.a = rec->capture(a);
        node.b = rec->capture(b);
        node.shape = out.shape;
        node.value = out.data;
        out.record = rec;
        out.node = rec->push(std::move(node));
    }
    return out;
}

inline Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op) {
    detail::check_elementwise_shapes(a, b);
    const bool broadcast = !same_shape(a, b);
    Tensor out = Tensor::zeros(a.shape);
    const std::size_t n = a.size();
    const std::size_t width = broadcast ? a.shape[1] : 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double bv = broadcast ? b.data[i % width] : b.data[i];
        switch (op) {
            case ElementwiseOp::add: out.data[i] = a.data[i] + bv; break;
            case ElementwiseOp::sub: out.data[i] = a.data[i] - bv; break;
            case ElementwiseOp::mul: out.data[i] = a.data[i] * bv; break;
        }
    }

    if (GradientRecord* rec = detail::pick_record(a, &b)) {
        GradientRecord::Node node;
        node.op = op == ElementwiseOp::add   ? GradientRecord::Op::add
                  : op == ElementwiseOp::sub ? GradientRecord::Op::sub
                                             : GradientRecord::Op::mul;
        node.a = rec->capture(a);
        node.b = rec->capture(b);
        node.shape = out.shape;
        node.value = out.data;
        out.record = rec;
        out.node = rec->push(std::move(node));
    }
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::mul); }

/// max(0, x); the subgradient at exactly 0 is taken as 0.
inline Tensor relu(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] > 0.0 ? a.data[i] : 0.0;

    if (GradientRecord* rec = detail::pick_record(a)) {
        GradientRecord::Node node;
        node.op = GradientRecord::Op::relu;
        node.a = rec->capture(a);
        node.shape = out.shape;
        node.value = out.data;
        out.record = rec;
        out.node = rec->push(std::move(node));
    }
    return out;
}

/// Sum of all elements as a scalar tensor.
inline Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v;
    Tensor out = Tensor::scalar(acc);

    if (GradientRecord* rec = detail::pick_record(a)) {
        GradientRecord::Node node;
        node.op = GradientRecord::Op::sum;
        node.a = rec->capture(a);
        node.shape = out.shape;
        node.value = out.data;
        out.record = rec;
        out.node = rec->push(std::move(node));
    }
    return out;
}

/// Column-wise concatenation of two matrices with equal row counts.
inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[0] != b.shape[0])
        throw ShapeError("concat_cols: incompatible shapes " + shape_str(a.shape) + " and " +
                         shape_str(b.shape));
    const std::size_t r = a.shape[0], ca = a.shape[1], cb = b.shape[1];
    Tensor out = Tensor::zeros({r, ca + cb});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < ca; ++j) out(i, j) = a(i, j);
        for (std::size_t j = 0; j < cb; ++j) out(i, ca + j) = b(i, j);
    }

    if (GradientRecord* rec = detail::pick_record(a, &b)) {
        GradientRecord::Node node;
        node.op = GradientRecord::Op::concat_cols;
        node.a = rec->capture(a);
        node.b = rec->capture(b);
        node.shape = out.shape;
        node.value = out.data;
        out.record = rec;
        out.node = rec->push(std::move(node));
    }
    return out;
}

/// Mean over the batch of -log softmax(logits)[label], stabilized by
/// max-subtraction; returns a scalar tensor.
inline Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2)
        throw ShapeError("softmax_cross_entropy: logits must be 2-D, got " + shape_str(logits.shape));
    const std::size_t batch = logits.shape[0], classes = logits.shape[1];
    if (batch == 0 || labels.size() != batch)
        throw ShapeError("softmax_cross_entropy: got " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(batch));
    for (std::size_t i = 0; i < batch; ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw ValueError("softmax_cross_entropy: label " + std::to_string(labels[i]) + " at row " +
                             std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");

    std::vector<double> lse(batch);
    detail::row_logsumexp(logits.data.data(), batch, classes, lse.data());
    double loss = 0.0;
    for (std::size_t i = 0; i < batch; ++i)
        loss += lse[i] - logits.data[i * classes + static_cast<std::size_t>(labels[i])];
    loss /= static_cast<double>(batch);
    Tensor out = Tensor::scalar(loss);

    if (GradientRecord* rec = detail::pick_record(logits)) {
        GradientRecord::Node node;
        node.op = GradientRecord::Op::softmax_xent;
        node.a = rec->capture(logits);
        node.shape = out.shape;
        node.value = out.data;
        node.labels.assign(labels.begin(), labels.end());
        out.record = rec;
        out.node = rec->push(std::move(node));
    }
    return out;
}

inline void backward(GradientRecord& rec, const Tensor& output) { rec.backward(output); }

inline void GradientRecord::propagate(std::size_t id) {
    const Node& n = nodes_[id];
    const std::vector<double>& up = adjoints_[id];
    switch (n.op) {
        case Op::leaf:
            break;
        case Op::matmul: {
            const std::vector<double>& av = operand_value(n.a);
            const std::vector<double>& bv = operand_value(n.b);
            const std::size_t m = n.a.shape[0], k = n.a.shape[1], c = n.b.shape[1];
            if (n.a.node != npos) {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < c; ++j) acc += up[i * c + j] * bv[t * c + j];
                        adjoints_[n.a.node][i * k + t] += acc;
                    }
            }
            if (n.b.node != npos) {
                for (std::size_t t = 0; t < k; ++t)
                    for (std::size_t j = 0; j < c; ++j) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < m; ++i) acc += av[i * k + t] * up[i * c + j];
                        adjoints_[n.b.node][t * c + j] += acc;
                    }
            }
            break;
        }
        case Op::add:
        case Op::sub:
        case Op::mul: {
            const std::vector<double>& av = operand_value(n.a);
            const std::vector<double>& bv = operand_value(n.b);
            const bool broadcast = n.a.shape != n.b.shape;
            const std::size_t width = broadcast ? n.a.shape[1] : 0;
            const double sign = n.op == Op::sub ? -1.0 : 1.0;
            for (std::size_t i = 0; i < up.size(); ++i) {
                const std::size_t bi = broadcast ? i % width : i;
                if (n.op == Op::mul) {
                    accumulate(n.a, i, up[i] * bv[bi]);
                    accumulate(n.b, bi, up[i] * av[i]);
                } else {
                    accumulate(n.a, i, up[i]);
                    accumulate(n.b, bi, sign * up[i]);
                }
            }
            break;
        }
        case Op::relu: {
            const std::vector<double>& av = operand_value(n.a);
            for (std::size_t i = 0; i < up.size(); ++i)
                accumulate(n.a, i, av[i] > 0.0 ? up[i] : 0.0);
            break;
        }
        case Op::sum: {
            const double g = up[0];
            if (n.a.node != npos)
                for (std::size_t i = 0; i < adjoints_[n.a.node].size(); ++i) adjoints_[n.a.node][i] += g;
            break;
        }
        case Op::concat_cols: {
            const std::size_t r = n.a.shape[0], ca = n.a.shape[1], cb = n.b.shape[1];
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < ca; ++j) accumulate(n.a, i * ca + j, up[i * (ca + cb) + j]);
                for (std::size_t j = 0; j < cb; ++j) accumulate(n.b, i * cb + j, up[i * (ca + cb) + ca + j]);
            }
            break;
        }
        case Op::softmax_xent: {
            if (n.a.node == npos) break;
            const std::vector<double>& logits = operand_value(n.a);
            const std::size_t batch = n.a.shape[0], classes = n.a.shape[1];
            std::vector<double> lse(batch);
            detail::row_logsumexp(logits.data(), batch, classes, lse.data());
            const double g = up[0] / static_cast<double>(batch);
            for (std::size_t i = 0; i < batch; ++i)
                for (std::size_t j = 0; j < classes; ++j) {
                    const double p = std::exp(logits[i * classes + j] - lse[i]);
                    const double y = static_cast<std::size_t>(n.labels[i]) == j ? 1.0 : 0.0;
                    adjoints_[n.a.node][i * classes + j] += g * (p - y);
                }
            break;
        }
    }
}

/// Central-difference gradient of a scalar function; the standard test oracle
/// for every differentiable path in this library.
inline Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                   double h) {
    if (!(h > 0.0)) throw ValueError("finite_diff_gradient: step h must be positive");
    Tensor grad = Tensor::zeros(x.shape);
    Tensor probe = x.detached();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe.data[i];
        probe.data[i] = orig + h;
        const double fp = f(probe);
        probe.data[i] = orig - h;
        const double fm = f(probe);
        probe.data[i] = orig;
        grad.data[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace flatnn
