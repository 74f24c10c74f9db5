#include "sharpefolio/allocator_models.hpp"

#include <cmath>

#include <Eigen/QR>
#include <fmt/format.h>

#include "sharpefolio/error.hpp"

namespace sharpefolio {

using ad::Var;

void LstmAllocatorConfig::validate() const {
    if (hidden_units == 0 || lookback == 0 || input_features == 0 || n_assets == 0)
        throw ConfigError("LSTM config values must be positive integers");
}

void TransformerAllocatorConfig::validate() const {
    if (embedding_size == 0 || n_heads == 0 || n_layers == 0 || lookback == 0 || input_features == 0 || n_assets == 0)
        throw ConfigError("transformer config values must be positive integers");
    if (embedding_size % n_heads != 0)
        throw ConfigError(fmt::format("embedding size {} is not divisible by {} heads", embedding_size, n_heads));
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("transformer dropout must lie in [0, 1)");
    if (l2 < 0.0) throw ConfigError("L2 coefficient must be non-negative");
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (double& v : w.values()) v = rng.uniform(-limit, limit);
    return w;
}

Tensor orthogonal(std::size_t rows, std::size_t cols, Rng& rng) {
    const std::size_t tall = std::max(rows, cols), narrow = std::min(rows, cols);
    Eigen::MatrixXd a(tall, narrow);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(tall), static_cast<Eigen::Index>(narrow));
    // Sign fix makes the draw uniform over the orthogonal group.
    const Eigen::MatrixXd r = qr.matrixQR().topRows(static_cast<Eigen::Index>(narrow)).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    Tensor out({rows, cols});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out(i, j) = rows >= cols ? q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                                     : q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    return out;
}

Tensor sinusoidal_encoding(std::size_t positions, std::size_t width) {
    Tensor pe({positions, width});
    for (std::size_t pos = 0; pos < positions; ++pos)
        for (std::size_t i = 0; i < width; ++i) {
            const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
            const double angle = static_cast<double>(pos) / rate;
            pe(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

// ---------------------------------------------------------------------------
// Allocator
// ---------------------------------------------------------------------------

void Allocator::check_batch(const Tensor& batch) const {
    if (batch.rank() != 3 || batch.dim(1) != lookback() || batch.dim(2) != n_features() || batch.dim(0) == 0)
        throw DataError(fmt::format("{} input must be batch x {} x {}, got {}", kind(), lookback(), n_features(),
                                    shape_string(batch.shape())));
}

Tensor Allocator::predict(const ParameterSet& params, const Tensor& batch) const {
    ad::Tape tape;
    ad::Binding b;
    for (const auto& [name, value] : params.values()) b.vars.emplace(name, tape.constant(value));
    Rng unused(0);
    return forward(tape, b, batch, ad::Mode::eval, unused).value();
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

LstmAllocator::LstmAllocator(LstmAllocatorConfig config) : config_(config) { config_.validate(); }

ParameterSet LstmAllocator::init_parameters(Rng& rng) const {
    const std::size_t h = config_.hidden_units, f = config_.input_features, a = config_.n_assets;
    ParameterSet p;
    Rng kernel = rng.split("lstm.W"), recurrent = rng.split("lstm.U"), head = rng.split("head.W");
    p.add("lstm.W", glorot_uniform(f, 4 * h, kernel));
    p.add("lstm.U", orthogonal(h, 4 * h, recurrent));
    Tensor bias({1, 4 * h});
    for (std::size_t j = h; j < 2 * h; ++j) bias[j] = 1.0;  // forget gate
    p.add("lstm.b", std::move(bias));
    p.add("head.W", glorot_uniform(h, a, head));
    p.add("head.b", Tensor({1, a}));
    return p;
}

Var LstmAllocator::forward(ad::Tape& tape, const ad::Binding& p, const Tensor& batch, ad::Mode, Rng&) const {
    check_batch(batch);
    const std::size_t b = batch.dim(0), steps = config_.lookback, f = config_.input_features, h = config_.hidden_units;
    const Var w = p["lstm.W"], u = p["lstm.U"], bias = p["lstm.b"];
    Var hidden, cell;
    for (std::size_t t = 0; t < steps; ++t) {
        Tensor xt({b, f});
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < f; ++j) xt(i, j) = batch(i, t, j);
        Var gates = ad::add_row(ad::matmul(tape.constant(std::move(xt)), w), bias);
        if (t > 0) gates = ad::add(gates, ad::matmul(hidden, u));
        const Var in = ad::sigmoid(ad::slice_cols(gates, 0, h));
        const Var forget = ad::sigmoid(ad::slice_cols(gates, h, 2 * h));
        const Var cand = ad::tanh(ad::slice_cols(gates, 2 * h, 3 * h));
        const Var out = ad::sigmoid(ad::slice_cols(gates, 3 * h, 4 * h));
        cell = t > 0 ? ad::add(ad::mul(forget, cell), ad::mul(in, cand)) : ad::mul(in, cand);
        hidden = ad::mul(out, ad::tanh(cell));
    }
    const Var logits = ad::add_row(ad::matmul(hidden, p["head.W"]), p["head.b"]);
    return ad::softmax(logits, 1);
}

// ---------------------------------------------------------------------------
// Transformer
// ---------------------------------------------------------------------------

TransformerAllocator::TransformerAllocator(TransformerAllocatorConfig config) : config_(config) { config_.validate(); }

namespace {

void add_attention_block(ParameterSet& p, const std::string& prefix, std::size_t e, Rng& rng) {
    for (const char* m : {"Wq", "Wk", "Wv", "Wo"}) {
        Rng r = rng.split(prefix + m);
        p.add(prefix + m, glorot_uniform(e, e, r));
    }
    p.add(prefix + "bo", Tensor({1, e}));
}

void add_norm(ParameterSet& p, const std::string& prefix, std::size_t e) {
    p.add(prefix + "gain", Tensor({1, e}, 1.0));
    p.add(prefix + "bias", Tensor({1, e}));
}

void add_feed_forward(ParameterSet& p, const std::string& prefix, std::size_t e, std::size_t inner, Rng& rng) {
    Rng r1 = rng.split(prefix + "W1"), r2 = rng.split(prefix + "W2");
    p.add(prefix + "W1", glorot_uniform(e, inner, r1));
    p.add(prefix + "b1", Tensor({1, inner}));
    p.add(prefix + "W2", glorot_uniform(inner, e, r2));
    p.add(prefix + "b2", Tensor({1, e}));
}

Var feed_forward(const ad::Binding& p, const std::string& prefix, Var x) {
    const Var inner = ad::relu(ad::add_row(ad::matmul(x, p[prefix + "W1"]), p[prefix + "b1"]));
    return ad::add_row(ad::matmul(inner, p[prefix + "W2"]), p[prefix + "b2"]);
}

// Multi-head attention of `queries` (per-sample row blocks of q_rows) over
// per-sample blocks of `keys`/`values` (kv_rows each). Returns the per-sample
// head outputs stacked back into one matrix, before the output projection.
Var multi_head(Var queries, Var keys, Var values, std::size_t batch, std::size_t q_rows, std::size_t kv_rows,
               std::size_t heads, bool causal, bool shared_query) {
    const std::size_t width = keys.cols() / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(width));
    std::vector<Var> per_sample;
    per_sample.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const Var q = shared_query ? queries : ad::slice_rows(queries, b * q_rows, (b + 1) * q_rows);
        const Var k = ad::slice_rows(keys, b * kv_rows, (b + 1) * kv_rows);
        const Var v = ad::slice_rows(values, b * kv_rows, (b + 1) * kv_rows);
        std::vector<Var> per_head;
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t c0 = h * width, c1 = (h + 1) * width;
            per_head.push_back(ad::attention(ad::slice_cols(q, c0, c1), ad::slice_cols(k, c0, c1),
                                             ad::slice_cols(v, c0, c1), causal, scale));
        }
        per_sample.push_back(heads == 1 ? per_head.front() : ad::concat_cols(per_head));
    }
    return batch == 1 ? per_sample.front() : ad::concat_rows(per_sample);
}

}  // namespace

ParameterSet TransformerAllocator::init_parameters(Rng& rng) const {
    const std::size_t e = config_.embedding_size;
    ParameterSet p;
    Rng embed = rng.split("embed.W");
    p.add("embed.W", glorot_uniform(config_.input_features, e, embed));
    p.add("embed.b", Tensor({1, e}));
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        const std::string prefix = fmt::format("enc{}.", l);
        add_attention_block(p, prefix + "attn.", e, rng);
        add_norm(p, prefix + "ln1.", e);
        add_feed_forward(p, prefix + "ff.", e, config_.ff_size(), rng);
        add_norm(p, prefix + "ln2.", e);
    }
    Rng query = rng.split("dec.query");
    p.add("dec.query", glorot_uniform(1, e, query));
    add_attention_block(p, "dec.attn.", e, rng);
    add_norm(p, "dec.ln1.", e);
    add_feed_forward(p, "dec.ff.", e, config_.ff_size(), rng);
    add_norm(p, "dec.ln2.", e);
    Rng head = rng.split("head.W");
    p.add("head.W", glorot_uniform(e, config_.n_assets, head));
    p.add("head.b", Tensor({1, config_.n_assets}));
    return p;
}

Var TransformerAllocator::encoder_layer(ad::Tape&, const ad::Binding& p, const std::string& prefix, Var x,
                                        std::size_t batch, ad::Mode mode, Rng& rng) const {
    const std::size_t steps = config_.lookback;
    const std::string a = prefix + "attn.";
    const Var q = ad::matmul(x, p[a + "Wq"]);
    const Var k = ad::matmul(x, p[a + "Wk"]);
    const Var v = ad::matmul(x, p[a + "Wv"]);
    const Var heads = multi_head(q, k, v, batch, steps, steps, config_.n_heads, true, false);
    Var attn = ad::add_row(ad::matmul(heads, p[a + "Wo"]), p[a + "bo"]);
    attn = ad::dropout(attn, config_.dropout, mode, rng);
    const Var x1 = ad::layer_norm(ad::add(x, attn), p[prefix + "ln1.gain"], p[prefix + "ln1.bias"]);
    const Var ff = ad::dropout(feed_forward(p, prefix + "ff.", x1), config_.dropout, mode, rng);
    return ad::layer_norm(ad::add(x1, ff), p[prefix + "ln2.gain"], p[prefix + "ln2.bias"]);
}

Var TransformerAllocator::decoder(ad::Tape&, const ad::Binding& p, Var memory, std::size_t batch, ad::Mode mode,
                                  Rng& rng) const {
    const Var query = p["dec.query"];
    const Var q = ad::matmul(query, p["dec.attn.Wq"]);
    const Var k = ad::matmul(memory, p["dec.attn.Wk"]);
    const Var v = ad::matmul(memory, p["dec.attn.Wv"]);
    const Var heads = multi_head(q, k, v, batch, 1, config_.lookback, config_.n_heads, false, true);
    Var attn = ad::add_row(ad::matmul(heads, p["dec.attn.Wo"]), p["dec.attn.bo"]);
    attn = ad::dropout(attn, config_.dropout, mode, rng);
    const Var y1 = ad::layer_norm(ad::add_row(attn, query), p["dec.ln1.gain"], p["dec.ln1.bias"]);
    const Var ff = ad::dropout(feed_forward(p, "dec.ff.", y1), config_.dropout, mode, rng);
    return ad::layer_norm(ad::add(y1, ff), p["dec.ln2.gain"], p["dec.ln2.bias"]);
}

Var TransformerAllocator::forward(ad::Tape& tape, const ad::Binding& p, const Tensor& batch, ad::Mode mode,
                                  Rng& rng) const {
    check_batch(batch);
    const std::size_t b = batch.dim(0), steps = config_.lookback, e = config_.embedding_size;
    const Var x = tape.constant(batch.reshaped({b * steps, config_.input_features}));
    const Tensor pe = sinusoidal_encoding(steps, e);
    Tensor tiled({b * steps, e});
    for (std::size_t i = 0; i < b; ++i) std::copy(pe.data(), pe.data() + pe.size(), tiled.data() + i * pe.size());
    Var h = ad::add(ad::add_row(ad::matmul(x, p["embed.W"]), p["embed.b"]), tape.constant(std::move(tiled)));
    for (std::size_t l = 0; l < config_.n_layers; ++l) h = encoder_layer(tape, p, fmt::format("enc{}.", l), h, b, mode, rng);
    const Var d = decoder(tape, p, h, b, mode, rng);
    const Var logits = ad::add_row(ad::matmul(d, p["head.W"]), p["head.b"]);
    return ad::softmax(logits, 1);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Allocator> make_allocator(const ModelConfig& config) {
    return std::visit(
        [](const auto& c) -> std::unique_ptr<Allocator> {
            using C = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<C, LstmAllocatorConfig>)
                return std::make_unique<LstmAllocator>(c);
            else
                return std::make_unique<TransformerAllocator>(c);
        },
        config);
}

Tensor lstm_forward(const LstmAllocatorConfig& config, const ParameterSet& params, const Tensor& batch) {
    return LstmAllocator(config).predict(params, batch);
}

Tensor transformer_forward(const TransformerAllocatorConfig& config, const ParameterSet& params, const Tensor& batch,
                           ad::Mode mode, Rng& rng) {
    const TransformerAllocator model(config);
    ad::Tape tape;
    ad::Binding b;
    for (const auto& [name, value] : params.values()) b.vars.emplace(name, tape.constant(value));
    return model.forward(tape, b, batch, mode, rng).value();
}

}  // namespace sharpefolio
