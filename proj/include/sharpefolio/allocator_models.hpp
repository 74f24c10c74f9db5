#pragma once

#include <memory>
#include <string>
#include <variant>

#include "sharpefolio/autodiff.hpp"
#include "sharpefolio/rng.hpp"
#include "sharpefolio/tensor.hpp"

namespace sharpefolio {

struct LstmAllocatorConfig {
    std::size_t hidden_units = 64;
    std::size_t lookback = 50;
    std::size_t input_features = 8;
    std::size_t n_assets = 4;

    void validate() const;
};

struct TransformerAllocatorConfig {
    std::size_t embedding_size = 32;
    std::size_t n_heads = 2;
    std::size_t n_layers = 1;
    double dropout = 0.05;
    std::size_t lookback = 504;
    double l2 = 1e-5;
    std::size_t input_features = 8;
    std::size_t n_assets = 4;

    std::size_t ff_size() const { return 4 * embedding_size; }
    void validate() const;
};

using ModelConfig = std::variant<LstmAllocatorConfig, TransformerAllocatorConfig>;

// A neural allocator maps a batch of lookback windows
// (batch x lookback x features) to long-only weights (batch x assets) through
// a softmax head.
class Allocator {
public:
    virtual ~Allocator() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t lookback() const = 0;
    virtual std::size_t n_features() const = 0;
    virtual std::size_t n_assets() const = 0;

    virtual ParameterSet init_parameters(Rng& rng) const = 0;
    virtual ad::Var forward(ad::Tape& tape, const ad::Binding& params, const Tensor& batch, ad::Mode mode,
                            Rng& rng) const = 0;

    // Eval-mode weights without recording gradients.
    Tensor predict(const ParameterSet& params, const Tensor& batch) const;

protected:
    void check_batch(const Tensor& batch) const;
};

class LstmAllocator final : public Allocator {
public:
    explicit LstmAllocator(LstmAllocatorConfig config);

    std::string kind() const override { return "lstm"; }
    std::size_t lookback() const override { return config_.lookback; }
    std::size_t n_features() const override { return config_.input_features; }
    std::size_t n_assets() const override { return config_.n_assets; }
    const LstmAllocatorConfig& config() const { return config_; }

    ParameterSet init_parameters(Rng& rng) const override;
    ad::Var forward(ad::Tape& tape, const ad::Binding& params, const Tensor& batch, ad::Mode mode,
                    Rng& rng) const override;

private:
    LstmAllocatorConfig config_;
};

class TransformerAllocator final : public Allocator {
public:
    explicit TransformerAllocator(TransformerAllocatorConfig config);

    std::string kind() const override { return "transformer"; }
    std::size_t lookback() const override { return config_.lookback; }
    std::size_t n_features() const override { return config_.input_features; }
    std::size_t n_assets() const override { return config_.n_assets; }
    const TransformerAllocatorConfig& config() const { return config_; }

    ParameterSet init_parameters(Rng& rng) const override;
    ad::Var forward(ad::Tape& tape, const ad::Binding& params, const Tensor& batch, ad::Mode mode,
                    Rng& rng) const override;

private:
    ad::Var encoder_layer(ad::Tape& tape, const ad::Binding& p, const std::string& prefix, ad::Var x,
                          std::size_t batch, ad::Mode mode, Rng& rng) const;
    ad::Var decoder(ad::Tape& tape, const ad::Binding& p, ad::Var memory, std::size_t batch, ad::Mode mode,
                    Rng& rng) const;

    TransformerAllocatorConfig config_;
};

std::unique_ptr<Allocator> make_allocator(const ModelConfig& config);

// Functional entry points.
Tensor lstm_forward(const LstmAllocatorConfig& config, const ParameterSet& params, const Tensor& batch);
Tensor transformer_forward(const TransformerAllocatorConfig& config, const ParameterSet& params, const Tensor& batch,
                           ad::Mode mode, Rng& rng);

// Initialization schemes.
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
// rows x cols matrix with orthonormal rows (rows <= cols) or columns.
Tensor orthogonal(std::size_t rows, std::size_t cols, Rng& rng);
// positions x width sinusoidal encoding.
Tensor sinusoidal_encoding(std::size_t positions, std::size_t width);

}  // namespace sharpefolio
