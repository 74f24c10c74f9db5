#include <doctest.h>

#include <cmath>

#include "sharpefolio/allocator_models.hpp"
#include "sharpefolio/error.hpp"
#include "sharpefolio/training.hpp"
#include "support/oracles.hpp"

using namespace sharpefolio;
namespace fd = oracle;

namespace {

LstmAllocatorConfig tiny_lstm() {
    LstmAllocatorConfig c;
    c.hidden_units = 2;
    c.lookback = 3;
    c.input_features = 3;
    c.n_assets = 2;
    return c;
}

TransformerAllocatorConfig tiny_transformer() {
    TransformerAllocatorConfig c;
    c.embedding_size = 4;
    c.n_heads = 2;
    c.n_layers = 1;
    c.lookback = 5;
    c.input_features = 3;
    c.n_assets = 2;
    return c;
}

void check_simplex(const Tensor& w) {
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < w.cols(); ++j) {
            CHECK(w(i, j) >= 0.0);
            sum += w(i, j);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

// Sharpe loss of the model on a fixed batch. Dropout masks come from a copy
// of the same generator, so the function is deterministic in the parameters.
fd::GradCheck gradient_check(const Allocator& model, ParameterSet params, const Tensor& x, const Tensor& r,
                             ad::Mode mode) {
    const Rng dropout_rng(99);
    auto loss = [&](const ParameterSet& p) {
        ad::Tape tape;
        const auto b = ad::bind(tape, p);
        Rng drop = dropout_rng;
        return sharpe_loss(model.forward(tape, b, x, mode, drop), tape.constant(r)).value().item();
    };
    ad::Tape tape;
    const auto b = ad::bind(tape, params);
    Rng drop = dropout_rng;
    ad::backward(tape, sharpe_loss(model.forward(tape, b, x, mode, drop), tape.constant(r)), b, params);
    return fd::finite_difference_check(params, params, loss);
}

}  // namespace

TEST_SUITE("allocator_models") {

TEST_CASE("config invariants") {
    LstmAllocatorConfig l;
    l.hidden_units = 0;
    CHECK_THROWS_AS(l.validate(), ConfigError);
    TransformerAllocatorConfig t;
    t.embedding_size = 30;
    t.n_heads = 4;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    CHECK_NOTHROW(TransformerAllocatorConfig{}.validate());
    CHECK_NOTHROW(LstmAllocatorConfig{}.validate());
}

TEST_CASE("all-zero LSTM parameters give equal weights") {
    const LstmAllocator model(tiny_lstm());
    Rng rng(1);
    ParameterSet p = model.init_parameters(rng);
    for (const auto& name : p.names())
        for (double& x : p.value(name).values()) x = 0.0;
    const Tensor x = fd::random_tensor({5, 3, 3}, rng);
    const Tensor w = model.predict(p, x);
    for (double v : w.values()) CHECK(v == 0.5);
}

TEST_CASE("LSTM gradients match finite differences") {
    const LstmAllocator model(tiny_lstm());
    Rng rng(2);
    const ParameterSet p = fd::randomize(model.init_parameters(rng), rng, 0.5);
    const Tensor x = fd::random_tensor({6, 3, 3}, rng);
    const Tensor r = fd::random_tensor({6, 2}, rng, 0.02);
    const auto result = gradient_check(model, p, x, r, ad::Mode::train);
    CAPTURE(result.worst_name);
    CAPTURE(result.worst_rel);
    CHECK(result.checked == p.element_count());
    CHECK(result.failures == 0);
}

TEST_CASE("transformer gradients match finite differences") {
    const TransformerAllocator model(tiny_transformer());
    Rng rng(3);
    const ParameterSet p = fd::randomize(model.init_parameters(rng), rng, 0.5);
    const Tensor x = fd::random_tensor({4, 5, 3}, rng);
    const Tensor r = fd::random_tensor({4, 2}, rng, 0.02);
    for (ad::Mode mode : {ad::Mode::eval, ad::Mode::train}) {
        const auto result = gradient_check(model, p, x, r, mode);
        CAPTURE(result.worst_name);
        CAPTURE(result.worst_rel);
        CHECK(result.failures == 0);
    }
}

TEST_CASE("outputs stay on the simplex for random parameters and inputs") {
    const LstmAllocator lstm(tiny_lstm());
    const TransformerAllocator transformer(tiny_transformer());
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const double scale = trial % 2 ? 5.0 : 0.3;
        check_simplex(lstm.predict(fd::randomize(lstm.init_parameters(rng), rng, scale),
                                   fd::random_tensor({3, 3, 3}, rng, scale)));
        check_simplex(transformer.predict(fd::randomize(transformer.init_parameters(rng), rng, scale),
                                          fd::random_tensor({3, 5, 3}, rng, scale)));
    }
}

TEST_CASE("transformer eval mode is deterministic and train mode applies dropout") {
    TransformerAllocatorConfig cfg = tiny_transformer();
    cfg.dropout = 0.3;
    const TransformerAllocator model(cfg);
    Rng rng(5);
    const ParameterSet p = model.init_parameters(rng);
    const Tensor x = fd::random_tensor({3, 5, 3}, rng);
    Rng a(1), b(2);
    CHECK(transformer_forward(cfg, p, x, ad::Mode::eval, a) == transformer_forward(cfg, p, x, ad::Mode::eval, b));
    Rng c(1), d(1), e(2);
    const Tensor t1 = transformer_forward(cfg, p, x, ad::Mode::train, c);
    CHECK(t1 == transformer_forward(cfg, p, x, ad::Mode::train, d));
    CHECK_FALSE(t1 == transformer_forward(cfg, p, x, ad::Mode::train, e));
}

TEST_CASE("attention probabilities are row-stochastic") {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor q = fd::random_tensor({7, 4}, rng, 3.0);
        const Tensor k = fd::random_tensor({7, 4}, rng, 3.0);
        for (bool causal : {false, true}) {
            const Tensor p = ad::attention_probabilities(q, k, causal, 0.5);
            for (std::size_t i = 0; i < 7; ++i) {
                double sum = 0;
                for (std::size_t j = 0; j < 7; ++j) {
                    sum += p(i, j);
                    if (causal && j > i) CHECK(p(i, j) == 0.0);
                }
                CHECK(std::abs(sum - 1.0) < 1e-12);
            }
        }
    }
}

TEST_CASE("initialization") {
    const LstmAllocator lstm(LstmAllocatorConfig{});
    SUBCASE("same seed, same parameters") {
        Rng a(42), b(42), c(43);
        const ParameterSet pa = lstm.init_parameters(a);
        CHECK(pa == lstm.init_parameters(b));
        CHECK_FALSE(pa == lstm.init_parameters(c));
        const TransformerAllocator tr(TransformerAllocatorConfig{});
        Rng d(42), e(42);
        CHECK(tr.init_parameters(d) == tr.init_parameters(e));
    }
    SUBCASE("forget-gate bias is one, other biases zero") {
        Rng rng(1);
        const ParameterSet p = lstm.init_parameters(rng);
        const Tensor& b = p.value("lstm.b");
        for (std::size_t j = 0; j < 4 * 64; ++j) CHECK(b[j] == (j >= 64 && j < 128 ? 1.0 : 0.0));
        for (double v : p.value("head.b").values()) CHECK(v == 0.0);
    }
    SUBCASE("uniform scheme variance on a 256 x 256 layer") {
        Rng rng(7);
        const Tensor w = glorot_uniform(256, 256, rng);
        const double expected = 2.0 / 512.0;  // limit^2 / 3
        double sum = 0, sq = 0;
        for (double v : w.values()) sum += v, sq += v * v;
        const double n = static_cast<double>(w.size());
        const double var = sq / n - (sum / n) * (sum / n);
        CHECK(std::abs(var / expected - 1.0) < 0.10);
        const double limit = std::sqrt(6.0 / 512.0);
        for (double v : w.values()) CHECK(std::abs(v) <= limit);
    }
    SUBCASE("recurrent weights have orthonormal rows") {
        Rng rng(8);
        const Tensor u = orthogonal(16, 64, rng);
        for (std::size_t i = 0; i < 16; ++i)
            for (std::size_t k = 0; k < 16; ++k) {
                double dot = 0;
                for (std::size_t j = 0; j < 64; ++j) dot += u(i, j) * u(k, j);
                CHECK(dot == doctest::Approx(i == k ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
            }
        const Tensor sq = orthogonal(256, 256, rng);
        double s = 0;
        for (double v : sq.values()) s += v * v;
        CHECK(s / 65536.0 == doctest::Approx(1.0 / 256.0).epsilon(1e-10));
    }
}

TEST_CASE("permuting the head permutes the weights") {
    for (int kind = 0; kind < 2; ++kind) {
        std::unique_ptr<Allocator> model = kind == 0 ? make_allocator(tiny_lstm()) : make_allocator(tiny_transformer());
        Rng rng(9);
        const ParameterSet p = fd::randomize(model->init_parameters(rng), rng, 0.8);
        const Tensor x = fd::random_tensor({4, model->lookback(), 3}, rng);
        ParameterSet swapped = p;
        Tensor& w = swapped.value("head.W");
        Tensor& b = swapped.value("head.b");
        for (std::size_t i = 0; i < w.rows(); ++i) std::swap(w(i, 0), w(i, 1));
        std::swap(b[0], b[1]);
        const Tensor y = model->predict(p, x);
        const Tensor z = model->predict(swapped, x);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(y(i, 0) == doctest::Approx(z(i, 1)).epsilon(1e-14));
            CHECK(y(i, 1) == doctest::Approx(z(i, 0)).epsilon(1e-14));
        }
    }
}

TEST_CASE("LSTM with zero kernels and zero input holds its state") {
    // The hidden state never leaves zero, so the window length is irrelevant.
    LstmAllocatorConfig short_cfg = tiny_lstm(), long_cfg = tiny_lstm();
    short_cfg.lookback = 1;
    long_cfg.lookback = 9;
    const LstmAllocator a(short_cfg), b(long_cfg);
    Rng rng(10);
    ParameterSet p = fd::randomize(a.init_parameters(rng), rng, 1.0);
    for (const char* name : {"lstm.W", "lstm.U"})
        for (double& v : p.value(name).values()) v = 0.0;
    for (std::size_t j = 4; j < 6; ++j) p.value("lstm.b")[j] = 0.0;  // candidate slice
    const Tensor ya = a.predict(p, Tensor({2, 1, 3}));
    const Tensor yb = b.predict(p, Tensor({2, 9, 3}));
    CHECK(ya == yb);
}

TEST_CASE("input shape is checked") {
    const LstmAllocator model(tiny_lstm());
    Rng rng(11);
    const ParameterSet p = model.init_parameters(rng);
    CHECK_THROWS_AS(model.predict(p, Tensor({2, 4, 3})), DataError);
    CHECK_THROWS_AS(model.predict(p, Tensor({2, 3})), DataError);
}

}  // TEST_SUITE
