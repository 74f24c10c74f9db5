#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sharpefolio/allocator_models.hpp"
#include "sharpefolio/autodiff.hpp"
#include "sharpefolio/market_data.hpp"

namespace sharpefolio {

inline constexpr double kSharpeLossEpsilon = 1e-8;

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    double learning_rate = 0.001;
    double l2 = 0.0;
    double validation_fraction = 0.10;
    std::uint64_t seed = 0;
    // Return the parameters of the epoch with the best validation Sharpe
    // instead of the final epoch.
    bool select_best_epoch = false;

    void validate() const;
};

struct TrainLog {
    std::vector<double> train_sharpe;
    std::vector<double> val_sharpe;
    std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
    // Evaluations before the first update.
    double initial_train_sharpe = std::numeric_limits<double>::quiet_NaN();
    double initial_val_sharpe = std::numeric_limits<double>::quiet_NaN();

    std::string to_csv() const;
};

struct TrainResult {
    ParameterSet params;
    TrainLog log;
};

// -(mean(R) / (std_population(R) + eps)) * sqrt(252) with R = row sums of
// weights * returns.
ad::Var sharpe_loss(ad::Var weights, ad::Var next_day_returns, double epsilon = kSharpeLossEpsilon);
double sharpe_loss(const Tensor& weights, const Tensor& next_day_returns, double epsilon = kSharpeLossEpsilon);

// Annualized Sharpe (with the loss's eps guard) of the eval-mode portfolio
// over every sample of the dataset. NaN when the dataset has < 2 samples.
double evaluate_sharpe(const Allocator& model, const ParameterSet& params, const WindowedDataset& data);
// Eval-mode weights for every sample, batch x assets.
Tensor predict_all(const Allocator& model, const ParameterSet& params, const WindowedDataset& data);

TrainResult train(const Allocator& model, const WindowedDataset& dataset, const TrainConfig& config);
// Continues from `initial` with a fresh optimizer state.
TrainResult train(const Allocator& model, const WindowedDataset& dataset, const TrainConfig& config,
                  ParameterSet initial);

// Like the warm-started train(), but a split too small for one batch runs the
// epochs without updates and returns `initial` unchanged.
TrainResult fine_tune(const Allocator& model, const WindowedDataset& dataset, const TrainConfig& config,
                      ParameterSet initial);

struct PretrainResult {
    ParameterSet params;
    TrainLog pretrain_log;
    TrainLog finetune_log;
};

PretrainResult pretrain_finetune(const Allocator& model, const WindowedDataset& pretrain_data,
                                 const WindowedDataset& finetune_data, const TrainConfig& pretrain_config,
                                 const TrainConfig& finetune_config);

// Target asset slot filled from a proxy column, either with its prices or with
// 100 x its rolling annualized volatility.
struct PretrainSlot {
    std::string target;
    std::string source;
    bool volatility = false;
};

struct PretrainMapping {
    std::vector<PretrainSlot> slots;
    std::size_t vol_window = 30;
};

// Four-slot mapping for a (stock, bond, commodity, volatility index) universe.
PretrainMapping default_pretrain_mapping(const std::vector<std::string>& universe, const std::string& stock,
                                         const std::string& bond, const std::string& commodity,
                                         std::size_t vol_window = 30);

// Drops the first vol_window rows so every slot is defined on every date.
PricePanel build_pretrain_panel(const PricePanel& proxies, const PretrainMapping& mapping);

}  // namespace sharpefolio
