#include "sharpefolio/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <type_traits>

#include <Eigen/Dense>

#include "sharpefolio/error.hpp"

namespace sharpefolio {

// ---------------------------------------------------------------------------
// ParameterSet
// ---------------------------------------------------------------------------

void ParameterSet::add(const std::string& name, Tensor value) {
    if (contains(name)) throw DataError("duplicate parameter '" + name + "'");
    grads_.emplace(name, Tensor(value.shape()));
    values_.emplace(name, std::move(value));
}

const Tensor& ParameterSet::value(const std::string& name) const {
    const auto it = values_.find(name);
    if (it == values_.end()) throw DataError("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParameterSet::value(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).value(name));
}

const Tensor& ParameterSet::grad(const std::string& name) const {
    const auto it = grads_.find(name);
    if (it == grads_.end()) throw DataError("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParameterSet::grad(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).grad(name));
}

std::vector<std::string> ParameterSet::names() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : values_) out.push_back(n);
    return out;
}

std::size_t ParameterSet::element_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : values_) n += v.size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& [name, g] : grads_) g = Tensor(values_.at(name).shape());
}

namespace ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())); }
MutMap as_matrix(Tensor& t) { return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())); }

void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw NumericalError(std::string("non-finite output from ") + op);
}

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw DataError(std::string(op) + ": expected a rank-2 tensor, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DataError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

Tape& same_tape(Var a, Var b) {
    if (&a.tape() != &b.tape()) throw DataError("operands live on different tapes");
    return a.tape();
}

// Elementwise unary op: f(x) forward, df(x, y) local derivative.
template <typename F, typename D>
Var unary(Var a, const char* op, F f, D df) {
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    check_finite(y, op);
    const std::size_t ia = a.id();
    Tape& tape = a.tape();
    const std::size_t out = tape.size();
    return tape.record(std::move(y), {ia},
                       [ia, out, df](Tape& t, const Tensor& g) {
                           const Tensor& xv = t.value(ia);
                           const Tensor& yv = t.value(out);
                           Tensor& ga = t.grad(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(xv[i], yv[i]);
                       },
                       op);
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Var Tape::constant(Tensor value) {
    check_finite(value, "constant");
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false, false, "constant"});
    return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
    check_finite(value, "parameter");
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true, false, "parameter"});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op) {
    bool needs = false;
    for (auto i : inputs) needs = needs || nodes_.at(i).needs_grad;
    nodes_.push_back(Node{std::move(value), {}, std::move(inputs), needs ? std::move(backward) : nullptr, needs, false, op});
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.grad_ready) {
        n.grad = Tensor(n.value.shape());
        n.grad_ready = true;
    }
    return n.grad;
}

void Tape::backward(Var output) {
    if (&output.tape() != this) throw DataError("backward: output belongs to another tape");
    if (output.value().size() != 1)
        throw DataError("backward needs a scalar output, got " + shape_string(output.value().shape()));
    for (auto& n : nodes_) {
        n.grad_ready = false;
        n.grad = Tensor();
    }
    grad(output.id())[0] = 1.0;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.grad_ready || !n.backward) continue;
        n.backward(*this, n.grad);
    }
}

Var Binding::operator[](const std::string& name) const {
    const auto it = vars.find(name);
    if (it == vars.end()) throw DataError("parameter '" + name + "' is not bound");
    return it->second;
}

Binding bind(Tape& tape, const ParameterSet& params) {
    Binding b;
    for (const auto& [name, value] : params.values()) b.vars.emplace(name, tape.leaf(value));
    return b;
}

void backward(Tape& tape, Var output, const Binding& binding, ParameterSet& params) {
    tape.backward(output);
    bool connected = false;
    for (const auto& name : params.names()) {
        Tensor& g = params.grad(name);
        const auto it = binding.vars.find(name);
        if (it != binding.vars.end() && tape.has_grad(it->second.id())) {
            g = tape.grad(it->second.id());
            connected = true;
        } else {
            g = Tensor(params.value(name).shape());
        }
    }
    if (!connected) throw DataError("backward: output does not depend on any parameter (disconnected tape)");
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
    Tape& tape = same_tape(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    require_matrix(x, "matmul");
    require_matrix(y, "matmul");
    if (x.cols() != y.rows())
        throw DataError("matmul: shape mismatch " + shape_string(x.shape()) + " x " + shape_string(y.shape()));
    Tensor out({x.rows(), y.cols()});
    as_matrix(out).noalias() = as_matrix(x) * as_matrix(y);
    check_finite(out, "matmul");
    const std::size_t ia = a.id(), ib = b.id();
    return tape.record(std::move(out), {ia, ib},
                       [ia, ib](Tape& t, const Tensor& g) {
                           if (t.needs_grad(ia)) as_matrix(t.grad(ia)).noalias() += as_matrix(g) * as_matrix(t.value(ib)).transpose();
                           if (t.needs_grad(ib)) as_matrix(t.grad(ib)).noalias() += as_matrix(t.value(ia)).transpose() * as_matrix(g);
                       },
                       "matmul");
}

namespace {

template <typename F, typename DA, typename DB>
Var binary(Var a, Var b, const char* op, F f, DA da, DB db) {
    Tape& tape = same_tape(a, b);
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    require_same_shape(x, y, op);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
    check_finite(out, op);
    const std::size_t ia = a.id(), ib = b.id();
    return tape.record(std::move(out), {ia, ib},
                       [ia, ib, da, db](Tape& t, const Tensor& g) {
                           const Tensor& xv = t.value(ia);
                           const Tensor& yv = t.value(ib);
                           if (t.needs_grad(ia)) {
                               Tensor& ga = t.grad(ia);
                               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(xv[i], yv[i]);
                           }
                           if (t.needs_grad(ib)) {
                               Tensor& gb = t.grad(ib);
                               for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(xv[i], yv[i]);
                           }
                       },
                       op);
}

}  // namespace

Var add(Var a, Var b) {
    return binary(a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                  [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return binary(a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                  [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return binary(a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                  [](double x, double) { return x; });
}

Var div(Var a, Var b) {
    return binary(a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
                  [](double x, double y) { return -x / (y * y); });
}

Var add_row(Var a, Var row) {
    Tape& tape = same_tape(a, row);
    const Tensor& x = a.value();
    const Tensor& r = row.value();
    require_matrix(x, "add_row");
    if (r.size() != x.cols())
        throw DataError("add_row: row of shape " + shape_string(r.shape()) + " does not match " + shape_string(x.shape()));
    Tensor out = x;
    const std::size_t n = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) += r[j];
    check_finite(out, "add_row");
    const std::size_t ia = a.id(), ir = row.id();
    return tape.record(std::move(out), {ia, ir},
                       [ia, ir, n](Tape& t, const Tensor& g) {
                           if (t.needs_grad(ia)) {
                               Tensor& ga = t.grad(ia);
                               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                           }
                           if (t.needs_grad(ir)) {
                               Tensor& gr = t.grad(ir);
                               for (std::size_t i = 0; i < g.size(); ++i) gr[i % n] += g[i];
                           }
                       },
                       "add_row");
}

Var scale(Var a, double factor) {
    return unary(a, "scale", [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double c) {
    return unary(a, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var sigmoid(Var a) {
    return unary(a, "sigmoid",
                 [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
                 [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
    return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
    return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    for (double v : a.value().values())
        if (!(v > 0.0)) throw NumericalError("log of non-positive value");
    return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softmax(Var a, int axis) {
    const Tensor& x = a.value();
    require_matrix(x, "softmax");
    if (axis != 0 && axis != 1) throw DataError("softmax axis must be 0 or 1");
    const std::size_t rows = x.rows(), cols = x.cols();
    // Lines are rows for axis 1 and columns for axis 0.
    const std::size_t lines = axis == 1 ? rows : cols, len = axis == 1 ? cols : rows;
    auto at = [axis, cols](std::size_t line, std::size_t k) { return axis == 1 ? line * cols + k : k * cols + line; };
    Tensor y(x.shape());
    for (std::size_t l = 0; l < lines; ++l) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, x[at(l, k)]);
        double s = 0.0;
        for (std::size_t k = 0; k < len; ++k) s += (y[at(l, k)] = std::exp(x[at(l, k)] - mx));
        for (std::size_t k = 0; k < len; ++k) y[at(l, k)] /= s;
    }
    check_finite(y, "softmax");
    const std::size_t ia = a.id();
    Tape& tape = a.tape();
    const std::size_t out = tape.size();
    return tape.record(std::move(y), {ia},
                       [ia, out, lines, len, at](Tape& t, const Tensor& g) {
                           const Tensor& p = t.value(out);
                           Tensor& ga = t.grad(ia);
                           for (std::size_t l = 0; l < lines; ++l) {
                               double dot = 0.0;
                               for (std::size_t k = 0; k < len; ++k) dot += g[at(l, k)] * p[at(l, k)];
                               for (std::size_t k = 0; k < len; ++k) ga[at(l, k)] += p[at(l, k)] * (g[at(l, k)] - dot);
                           }
                       },
                       "softmax");
}

Var sum(Var a) {
    const Tensor& x = a.value();
    const double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
    Tensor out = Tensor::scalar(s);
    check_finite(out, "sum");
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia},
                           [ia](Tape& t, const Tensor& g) {
                               Tensor& ga = t.grad(ia);
                               for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
                           },
                           "sum");
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw DataError("mean of empty tensor");
    return scale(sum(a), 1.0 / n);
}

Var std_population(Var a) {
    const Tensor& x = a.value();
    const std::size_t n = x.size();
    if (n == 0) throw DataError("std of empty tensor");
    const double m = std::accumulate(x.values().begin(), x.values().end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : x.values()) ss += (v - m) * (v - m);
    const double s = std::sqrt(ss / static_cast<double>(n));
    const std::size_t ia = a.id();
    return a.tape().record(Tensor::scalar(s), {ia},
                           [ia, m, s, n](Tape& t, const Tensor& g) {
                               if (s == 0.0) return;  // subgradient 0 at a constant input
                               const Tensor& xv = t.value(ia);
                               Tensor& ga = t.grad(ia);
                               for (std::size_t i = 0; i < n; ++i)
                                   ga[i] += g[0] * (xv[i] - m) / (static_cast<double>(n) * s);
                           },
                           "std_population");
}

Var row_sum(Var a) {
    const Tensor& x = a.value();
    require_matrix(x, "row_sum");
    const std::size_t rows = x.rows(), cols = x.cols();
    Tensor out({rows, 1});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[i] += x(i, j);
    check_finite(out, "row_sum");
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia},
                           [ia, rows, cols](Tape& t, const Tensor& g) {
                               Tensor& ga = t.grad(ia);
                               for (std::size_t i = 0; i < rows; ++i)
                                   for (std::size_t j = 0; j < cols; ++j) ga(i, j) += g[i];
                           },
                           "row_sum");
}

Var transpose(Var a) {
    const Tensor& x = a.value();
    require_matrix(x, "transpose");
    Tensor out({x.cols(), x.rows()});
    as_matrix(out) = as_matrix(x).transpose();
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia},
                           [ia](Tape& t, const Tensor& g) { as_matrix(t.grad(ia)) += as_matrix(g).transpose(); },
                           "transpose");
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DataError("concat_cols of nothing");
    Tape& tape = parts.front().tape();
    const std::size_t rows = parts.front().rows();
    std::vector<std::size_t> ids, widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p.value(), "concat_cols");
        if (&p.tape() != &tape) throw DataError("operands live on different tapes");
        if (p.rows() != rows) throw DataError("concat_cols: row count mismatch");
        ids.push_back(p.id());
        widths.push_back(p.cols());
        total += p.cols();
    }
    Tensor out({rows, total});
    std::size_t off = 0;
    for (const auto& p : parts) {
        as_matrix(out).middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(p.cols())) = as_matrix(p.value());
        off += p.cols();
    }
    return tape.record(std::move(out), ids,
                       [ids, widths](Tape& t, const Tensor& g) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < ids.size(); ++k) {
                               if (t.needs_grad(ids[k]))
                                   as_matrix(t.grad(ids[k])) +=
                                       as_matrix(g).middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(widths[k]));
                               off += widths[k];
                           }
                       },
                       "concat_cols");
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DataError("concat_rows of nothing");
    Tape& tape = parts.front().tape();
    const std::size_t cols = parts.front().cols();
    std::vector<std::size_t> ids, heights;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p.value(), "concat_rows");
        if (&p.tape() != &tape) throw DataError("operands live on different tapes");
        if (p.cols() != cols) throw DataError("concat_rows: column count mismatch");
        ids.push_back(p.id());
        heights.push_back(p.rows());
        total += p.rows();
    }
    Tensor out({total, cols});
    double* dst = out.data();
    for (const auto& p : parts) dst = std::copy(p.value().data(), p.value().data() + p.value().size(), dst);
    return tape.record(std::move(out), ids,
                       [ids, heights, cols](Tape& t, const Tensor& g) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < ids.size(); ++k) {
                               if (t.needs_grad(ids[k])) {
                                   Tensor& gk = t.grad(ids[k]);
                                   for (std::size_t i = 0; i < heights[k] * cols; ++i) gk[i] += g[off + i];
                               }
                               off += heights[k] * cols;
                           }
                       },
                       "concat_rows");
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    const Tensor& x = a.value();
    require_matrix(x, "slice_rows");
    if (begin >= end || end > x.rows()) throw DataError("slice_rows: range out of bounds");
    const std::size_t cols = x.cols();
    Tensor out({end - begin, cols});
    std::copy(x.data() + begin * cols, x.data() + end * cols, out.data());
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia},
                           [ia, begin, cols](Tape& t, const Tensor& g) {
                               Tensor& ga = t.grad(ia);
                               for (std::size_t i = 0; i < g.size(); ++i) ga[begin * cols + i] += g[i];
                           },
                           "slice_rows");
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    const Tensor& x = a.value();
    require_matrix(x, "slice_cols");
    if (begin >= end || end > x.cols()) throw DataError("slice_cols: range out of bounds");
    const auto b = static_cast<Eigen::Index>(begin), w = static_cast<Eigen::Index>(end - begin);
    Tensor out({x.rows(), end - begin});
    as_matrix(out) = as_matrix(x).middleCols(b, w);
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia},
                           [ia, b, w](Tape& t, const Tensor& g) { as_matrix(t.grad(ia)).middleCols(b, w) += as_matrix(g); },
                           "slice_cols");
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
    Tape& tape = same_tape(a, gain);
    same_tape(a, bias);
    const Tensor& x = a.value();
    require_matrix(x, "layer_norm");
    const std::size_t rows = x.rows(), n = x.cols();
    if (gain.value().size() != n || bias.value().size() != n) throw DataError("layer_norm: gain/bias width mismatch");
    const Tensor& gv = gain.value();
    const Tensor& bv = bias.value();
    Tensor xhat({rows, n});
    std::vector<double> inv_sd(rows);
    Tensor out({rows, n});
    for (std::size_t i = 0; i < rows; ++i) {
        double m = 0.0;
        for (std::size_t j = 0; j < n; ++j) m += x(i, j);
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t j = 0; j < n; ++j) v += (x(i, j) - m) * (x(i, j) - m);
        v /= static_cast<double>(n);
        inv_sd[i] = 1.0 / std::sqrt(v + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat(i, j) = (x(i, j) - m) * inv_sd[i];
            out(i, j) = xhat(i, j) * gv[j] + bv[j];
        }
    }
    check_finite(out, "layer_norm");
    const std::size_t ia = a.id(), ig = gain.id(), ib = bias.id();
    return tape.record(std::move(out), {ia, ig, ib},
                       [ia, ig, ib, rows, n, xhat = std::move(xhat), inv_sd = std::move(inv_sd)](Tape& t, const Tensor& g) {
                           const Tensor& gv = t.value(ig);
                           if (t.needs_grad(ig)) {
                               Tensor& gg = t.grad(ig);
                               for (std::size_t i = 0; i < rows; ++i)
                                   for (std::size_t j = 0; j < n; ++j) gg[j] += g(i, j) * xhat(i, j);
                           }
                           if (t.needs_grad(ib)) {
                               Tensor& gb = t.grad(ib);
                               for (std::size_t i = 0; i < rows; ++i)
                                   for (std::size_t j = 0; j < n; ++j) gb[j] += g(i, j);
                           }
                           if (t.needs_grad(ia)) {
                               Tensor& gx = t.grad(ia);
                               const double dn = static_cast<double>(n);
                               for (std::size_t i = 0; i < rows; ++i) {
                                   double s1 = 0.0, s2 = 0.0;
                                   for (std::size_t j = 0; j < n; ++j) {
                                       const double d = g(i, j) * gv[j];
                                       s1 += d;
                                       s2 += d * xhat(i, j);
                                   }
                                   for (std::size_t j = 0; j < n; ++j) {
                                       const double d = g(i, j) * gv[j];
                                       gx(i, j) += inv_sd[i] * (d - s1 / dn - xhat(i, j) * s2 / dn);
                                   }
                               }
                           }
                       },
                       "layer_norm");
}

namespace {

// Row-wise log-sum-exp of the (masked) scaled scores; fills `out` with
// probabilities for one query row.
void attention_row(const Tensor& q, const Tensor& k, std::size_t i, std::size_t limit, double scale,
                   std::vector<double>& p) {
    const std::size_t d = q.cols();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < limit; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += q(i, c) * k(j, c);
        p[j] = s * scale;
        mx = std::max(mx, p[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < limit; ++j) z += (p[j] = std::exp(p[j] - mx));
    for (std::size_t j = 0; j < limit; ++j) p[j] /= z;
}

std::size_t visible(bool causal, std::size_t i, std::size_t lk) { return causal ? i + 1 : lk; }

}  // namespace

Tensor attention_probabilities(const Tensor& q, const Tensor& k, bool causal, double scale) {
    require_matrix(q, "attention");
    require_matrix(k, "attention");
    if (q.cols() != k.cols()) throw DataError("attention: query/key width mismatch");
    if (causal && q.rows() != k.rows()) throw DataError("attention: causal mask needs square scores");
    Tensor out({q.rows(), k.rows()});
    std::vector<double> p(k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const std::size_t lim = visible(causal, i, k.rows());
        attention_row(q, k, i, lim, scale, p);
        for (std::size_t j = 0; j < lim; ++j) out(i, j) = p[j];
    }
    return out;
}

Var attention(Var q, Var k, Var v, bool causal, double scale) {
    Tape& tape = same_tape(q, k);
    same_tape(q, v);
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    require_matrix(vv, "attention");
    if (kv.rows() != vv.rows()) throw DataError("attention: key/value length mismatch");
    const Tensor probs = attention_probabilities(qv, kv, causal, scale);
    Tensor out({qv.rows(), vv.cols()});
    as_matrix(out).noalias() = as_matrix(probs) * as_matrix(vv);
    check_finite(out, "attention");
    const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
    const std::size_t io = tape.size();
    return tape.record(std::move(out), {iq, ik, iv},
                       [iq, ik, iv, io, causal, scale](Tape& t, const Tensor& g) {
                           const Tensor& qv = t.value(iq);
                           const Tensor& kv = t.value(ik);
                           const Tensor& vv = t.value(iv);
                           const Tensor& ov = t.value(io);
                           const std::size_t lq = qv.rows(), lk = kv.rows(), d = qv.cols(), dv = vv.cols();
                           const bool gq = t.needs_grad(iq), gk = t.needs_grad(ik), gvv = t.needs_grad(iv);
                           Tensor* dq = gq ? &t.grad(iq) : nullptr;
                           Tensor* dk = gk ? &t.grad(ik) : nullptr;
                           Tensor* dvp = gvv ? &t.grad(iv) : nullptr;
                           std::vector<double> p(lk);
                           for (std::size_t i = 0; i < lq; ++i) {
                               const std::size_t lim = visible(causal, i, lk);
                               attention_row(qv, kv, i, lim, scale, p);
                               double go = 0.0;  // g_i . out_i
                               for (std::size_t c = 0; c < dv; ++c) go += g(i, c) * ov(i, c);
                               for (std::size_t j = 0; j < lim; ++j) {
                                   if (dvp)
                                       for (std::size_t c = 0; c < dv; ++c) (*dvp)(j, c) += p[j] * g(i, c);
                                   double dp = 0.0;
                                   for (std::size_t c = 0; c < dv; ++c) dp += g(i, c) * vv(j, c);
                                   const double ds = p[j] * (dp - go) * scale;
                                   if (dq)
                                       for (std::size_t c = 0; c < d; ++c) (*dq)(i, c) += ds * kv(j, c);
                                   if (dk)
                                       for (std::size_t c = 0; c < d; ++c) (*dk)(j, c) += ds * qv(i, c);
                               }
                           }
                       },
                       "attention");
}

Var dropout(Var a, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    if (mode == Mode::eval || rate == 0.0) return a;
    const Tensor& x = a.value();
    Tensor mask(x.shape());
    const double keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep;
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia},
                           [ia, mask = std::move(mask)](Tape& t, const Tensor& g) {
                               Tensor& ga = t.grad(ia);
                               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
                           },
                           "dropout");
}

}  // namespace ad

Tensor dropout(const Tensor& x, double rate, ad::Mode mode, Rng& rng) {
    ad::Tape tape;
    return ad::dropout(tape.constant(x), rate, mode, rng).value();
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_step(ParameterSet& params, AdamState& state) {
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (const auto& name : params.names()) {
        Tensor& theta = params.value(name);
        const Tensor& grad = params.grad(name);
        if (grad.shape() != theta.shape()) throw DataError("adam: gradient shape mismatch for '" + name + "'");
        auto [m_it, m_new] = state.first_moment.try_emplace(name, theta.shape());
        auto [v_it, v_new] = state.second_moment.try_emplace(name, theta.shape());
        Tensor& m = m_it->second;
        Tensor& v = v_it->second;
        if (m.shape() != theta.shape() || v.shape() != theta.shape())
            throw DataError("adam: moment shape mismatch for '" + name + "'");
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = grad[i] + state.weight_decay * theta[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            theta[i] -= state.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
        }
        if (!theta.all_finite()) throw NumericalError("adam: parameter '" + name + "' became non-finite");
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'F', 'P', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits = 0;
    if constexpr (std::is_same_v<T, double>) {
        std::memcpy(&bits, &v, sizeof v);
    } else {
        bits = static_cast<std::uint64_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof buf);
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof buf)) throw DataError("checkpoint truncated");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    if constexpr (std::is_same_v<T, double>) {
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    } else {
        return static_cast<T>(bits);
    }
}

}  // namespace

void save_checkpoint(std::ostream& out, const ParameterSet& params) {
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params.values()) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
        for (double v : t.values()) put_le<double>(out, v);
    }
    if (!out) throw DataError("failed writing checkpoint");
}

ParameterSet load_checkpoint(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw DataError("not a parameter checkpoint");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    const auto count = get_le<std::uint32_t>(in);
    ParameterSet params;
    for (std::uint32_t p = 0; p < count; ++p) {
        const auto len = get_le<std::uint32_t>(in);
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw DataError("checkpoint truncated");
        const auto rank = get_le<std::uint32_t>(in);
        Tensor::Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
        std::vector<double> values(shape_size(shape));
        for (double& v : values) v = get_le<double>(in);
        params.add(name, Tensor(std::move(shape), std::move(values)));
    }
    return params;
}

void save_checkpoint(const std::string& path, const ParameterSet& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    save_checkpoint(out, params);
}

ParameterSet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint '" + path + "'");
    return load_checkpoint(in);
}

}  // namespace sharpefolio
