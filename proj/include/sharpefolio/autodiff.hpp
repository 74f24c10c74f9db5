#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sharpefolio/rng.hpp"
#include "sharpefolio/tensor.hpp"

namespace sharpefolio {

// Named model parameters and their gradients. Iteration order is the sorted
// name order, which keeps every consumer deterministic.
class ParameterSet {
public:
    void add(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return values_.count(name) != 0; }
    const Tensor& value(const std::string& name) const;
    Tensor& value(const std::string& name);
    const Tensor& grad(const std::string& name) const;
    Tensor& grad(const std::string& name);
    std::vector<std::string> names() const;
    std::size_t size() const { return values_.size(); }
    std::size_t element_count() const;
    void zero_grad();

    const std::map<std::string, Tensor>& values() const { return values_; }

    friend bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.values_ == b.values_; }

private:
    std::map<std::string, Tensor> values_;
    std::map<std::string, Tensor> grads_;
};

namespace ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    const Tensor& value() const;
    const Tensor::Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    std::size_t id() const { return id_; }
    Tape& tape() const { return *tape_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Define-by-run computation record. Nodes are appended in evaluation order,
// so reverse insertion order is a valid topological order for backward.
class Tape {
public:
    // Receives the gradient flowing into the node's output.
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    Var constant(Tensor value);
    Var leaf(Tensor value);
    Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    // Zero-initialized on first access.
    Tensor& grad(std::size_t id);
    bool has_grad(std::size_t id) const { return nodes_[id].grad_ready; }

    // Seeds d(output)/d(output) = 1 and propagates to every reachable node.
    void backward(Var output);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool needs_grad = false;
        bool grad_ready = false;
        const char* op = "";
    };
    std::vector<Node> nodes_;
};

// Parameters bound as tape leaves.
struct Binding {
    std::map<std::string, Var> vars;
    Var operator[](const std::string& name) const;
};

Binding bind(Tape& tape, const ParameterSet& params);

// Runs reverse mode from a scalar output and writes d(output)/d(param) into
// params' gradients. Parameters the output does not depend on get exactly
// zero. Throws if the output is not scalar or reaches no parameter at all.
void backward(Tape& tape, Var output, const Binding& binding, ParameterSet& params);

// ---- Operations. Shapes are rank-2 (rows x cols) unless noted. ----
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var div(Var a, Var b);  // elementwise
// a (m x n) plus a 1 x n row added to every row.
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var neg(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var softmax(Var a, int axis = 1);
Var sum(Var a);    // scalar
Var mean(Var a);   // scalar
Var std_population(Var a);  // scalar, 1/N
Var row_sum(Var a);  // m x 1
Var transpose(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
// Row-wise normalization with learned 1 x n gain and bias.
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
// softmax(q k^T * scale [+ causal mask]) v, recomputing probabilities in the
// backward pass instead of storing them. Causal masking requires q and k to
// have the same row count; row i then attends to rows 0..i.
Var attention(Var q, Var k, Var v, bool causal, double scale);

enum class Mode { train, eval };
// Inverted dropout: in train mode each element is zeroed with probability
// `rate` and survivors are scaled by 1/(1-rate); eval mode is the identity.
Var dropout(Var a, double rate, Mode mode, Rng& rng);

// Attention probabilities (rows sum to one) for inspection.
Tensor attention_probabilities(const Tensor& q, const Tensor& k, bool causal, double scale);

}  // namespace ad

// Tensor-level dropout with the same semantics as ad::dropout.
Tensor dropout(const Tensor& x, double rate, ad::Mode mode, Rng& rng);

struct AdamState {
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;
    std::uint64_t step_count = 0;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // coupled L2: added to the gradient
};

void adam_step(ParameterSet& params, AdamState& state);

// Binary checkpoint: "SFPS" magic, u32 version, u32 count, then per record
// u32 name length, name bytes, u32 rank, u64 dims, f64 payload. All integers
// and floats little-endian.
void save_checkpoint(std::ostream& out, const ParameterSet& params);
ParameterSet load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::string& path);

}  // namespace sharpefolio
