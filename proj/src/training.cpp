#include "sharpefolio/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "sharpefolio/error.hpp"
#include "sharpefolio/perf_metrics.hpp"
#include "sharpefolio/rng.hpp"

namespace sharpefolio {

namespace {

const double kSqrtYear = std::sqrt(static_cast<double>(kTradingDaysPerYear));
constexpr std::size_t kEvalChunk = 64;

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 2)
        throw ConfigError(fmt::format("batch_size {} < 2: the Sharpe loss needs at least two portfolio returns per "
                                      "batch to estimate a standard deviation",
                                      batch_size));
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("validation_fraction must lie in (0, 1)");
}

std::string TrainLog::to_csv() const {
    std::string out = "epoch,train_sharpe,val_sharpe\n";
    out += fmt::format("0,{:.17g},{:.17g}\n", initial_train_sharpe, initial_val_sharpe);
    for (std::size_t e = 0; e < train_sharpe.size(); ++e)
        out += fmt::format("{},{:.17g},{:.17g}\n", e + 1, train_sharpe[e], val_sharpe[e]);
    return out;
}

ad::Var sharpe_loss(ad::Var weights, ad::Var next_day_returns, double epsilon) {
    const Tensor& w = weights.value();
    const Tensor& r = next_day_returns.value();
    if (w.shape() != r.shape() || w.rank() != 2)
        throw DataError(fmt::format("sharpe_loss: weights {} and returns {} must be matching matrices",
                                    shape_string(w.shape()), shape_string(r.shape())));
    if (w.rows() < 2) throw DataError("sharpe_loss needs a batch of at least 2 rows");
    if (!r.all_finite() || !w.all_finite()) throw NumericalError("sharpe_loss: non-finite input");
    const ad::Var portfolio = ad::row_sum(ad::mul(weights, next_day_returns));
    const ad::Var ratio = ad::div(ad::mean(portfolio), ad::add_scalar(ad::std_population(portfolio), epsilon));
    return ad::scale(ratio, -kSqrtYear);
}

double sharpe_loss(const Tensor& weights, const Tensor& next_day_returns, double epsilon) {
    ad::Tape tape;
    return sharpe_loss(tape.constant(weights), tape.constant(next_day_returns), epsilon).value().item();
}

Tensor predict_all(const Allocator& model, const ParameterSet& params, const WindowedDataset& data) {
    Tensor out({data.size(), model.n_assets()});
    std::vector<std::size_t> idx;
    for (std::size_t begin = 0; begin < data.size(); begin += kEvalChunk) {
        const std::size_t end = std::min(data.size(), begin + kEvalChunk);
        idx.resize(end - begin);
        std::iota(idx.begin(), idx.end(), begin);
        const Tensor w = model.predict(params, data.inputs(idx));
        std::copy(w.data(), w.data() + w.size(), out.data() + begin * model.n_assets());
    }
    return out;
}

double evaluate_sharpe(const Allocator& model, const ParameterSet& params, const WindowedDataset& data) {
    if (data.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return -sharpe_loss(predict_all(model, params, data), data.all_targets());
}

namespace {

void check_dataset(const Allocator& model, const WindowedDataset& data, const char* what) {
    if (data.empty()) throw DataError(fmt::format("{} dataset is empty", what));
    if (data.lookback() != model.lookback() || data.n_features() != model.n_features() ||
        data.n_assets() != model.n_assets())
        throw DataError(fmt::format("{} dataset (lookback {}, {} features, {} assets) does not match the {} model "
                                    "(lookback {}, {} features, {} assets)",
                                    what, data.lookback(), data.n_features(), data.n_assets(), model.kind(),
                                    model.lookback(), model.n_features(), model.n_assets()));
}

// With allow_idle, a training split too small for one batch runs the epochs
// without updates instead of failing.
TrainResult run_training(const Allocator& model, const WindowedDataset& dataset, const TrainConfig& config,
                         std::optional<ParameterSet> initial, bool allow_idle) {
    config.validate();
    check_dataset(model, dataset, "training");
    const auto [train_set, val_set] = chronological_split(dataset, config.validation_fraction);
    const std::size_t batches = train_set.size() / config.batch_size;
    if (batches == 0 && !allow_idle)
        throw DataError(fmt::format("training split has {} samples, fewer than batch_size {}", train_set.size(),
                                    config.batch_size));

    const Rng base(config.seed);
    TrainResult result;
    if (initial) {
        result.params = std::move(*initial);
    } else {
        Rng init = base.split("init");
        result.params = model.init_parameters(init);
    }
    AdamState adam;
    adam.learning_rate = config.learning_rate;
    adam.weight_decay = config.l2;

    TrainLog& log = result.log;
    log.initial_train_sharpe = evaluate_sharpe(model, result.params, train_set);
    log.initial_val_sharpe = evaluate_sharpe(model, result.params, val_set);

    const Rng shuffle_root = base.split("shuffle");
    const Rng dropout_root = base.split("dropout");
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::optional<ParameterSet> best;
    double best_val = -std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffler = shuffle_root.split(epoch);
        shuffle(order, shuffler);
        const Rng epoch_dropout = dropout_root.split(epoch);
        for (std::size_t b = 0; b < batches; ++b) {
            const std::span<const std::size_t> idx(order.data() + b * config.batch_size, config.batch_size);
            ad::Tape tape;
            const ad::Binding binding = ad::bind(tape, result.params);
            Rng drop = epoch_dropout.split(b);
            try {
                const ad::Var w = model.forward(tape, binding, train_set.inputs(idx), ad::Mode::train, drop);
                const ad::Var loss = sharpe_loss(w, tape.constant(train_set.targets(idx)));
                ad::backward(tape, loss, binding, result.params);
            } catch (const NumericalError& e) {
                throw NumericalError(fmt::format("training diverged at epoch {} batch {}: {}", epoch + 1, b + 1, e.what()));
            }
            adam_step(result.params, adam);
        }
        const double tr = evaluate_sharpe(model, result.params, train_set);
        const double va = evaluate_sharpe(model, result.params, val_set);
        if (!std::isfinite(tr)) throw NumericalError(fmt::format("training diverged at epoch {}", epoch + 1));
        log.train_sharpe.push_back(tr);
        log.val_sharpe.push_back(va);
        if (log.best_epoch == 0 || (std::isfinite(va) && va > best_val)) {
            best_val = std::isfinite(va) ? va : best_val;
            log.best_epoch = epoch + 1;
            if (config.select_best_epoch) best = result.params;
        }
    }
    if (config.select_best_epoch && best) result.params = std::move(*best);
    return result;
}

}  // namespace

TrainResult train(const Allocator& model, const WindowedDataset& dataset, const TrainConfig& config) {
    return run_training(model, dataset, config, std::nullopt, false);
}

TrainResult train(const Allocator& model, const WindowedDataset& dataset, const TrainConfig& config,
                  ParameterSet initial) {
    return run_training(model, dataset, config, std::move(initial), false);
}

TrainResult fine_tune(const Allocator& model, const WindowedDataset& dataset, const TrainConfig& config,
                      ParameterSet initial) {
    return run_training(model, dataset, config, std::move(initial), true);
}

PretrainResult pretrain_finetune(const Allocator& model, const WindowedDataset& pretrain_data,
                                 const WindowedDataset& finetune_data, const TrainConfig& pretrain_config,
                                 const TrainConfig& finetune_config) {
    check_dataset(model, pretrain_data, "pretrain");
    check_dataset(model, finetune_data, "fine-tune");
    PretrainResult out;
    TrainResult phase1 = run_training(model, pretrain_data, pretrain_config, std::nullopt, false);
    out.pretrain_log = std::move(phase1.log);
    TrainResult phase2 = fine_tune(model, finetune_data, finetune_config, std::move(phase1.params));
    out.params = std::move(phase2.params);
    out.finetune_log = std::move(phase2.log);
    return out;
}

PretrainMapping default_pretrain_mapping(const std::vector<std::string>& universe, const std::string& stock,
                                         const std::string& bond, const std::string& commodity,
                                         std::size_t vol_window) {
    if (universe.size() != 4)
        throw ConfigError(fmt::format("pretraining maps onto a 4-asset (stock, bond, commodity, volatility) "
                                      "universe, got {} assets",
                                      universe.size()));
    PretrainMapping m;
    m.vol_window = vol_window;
    m.slots = {{universe[0], stock, false}, {universe[1], bond, false}, {universe[2], commodity, false},
               {universe[3], stock, true}};
    return m;
}

PricePanel build_pretrain_panel(const PricePanel& proxies, const PretrainMapping& mapping) {
    if (mapping.slots.empty()) throw ConfigError("pretrain mapping has no slots");
    const std::size_t window = mapping.vol_window;
    if (proxies.rows() <= window)
        throw DataError(fmt::format("proxy panel has {} rows, needs more than the {}-day volatility window",
                                    proxies.rows(), window));
    std::vector<Column> columns;
    for (const PretrainSlot& slot : mapping.slots) {
        const Column* src = proxies.find(slot.source);
        if (!src) throw DataError(fmt::format("proxy column '{}' is missing", slot.source));
        Column c{slot.target, {}};
        if (slot.volatility) {
            c.values = rolling_volatility(src->values, window);
            for (double& v : c.values) v *= 100.0;
        } else {
            c.values.assign(src->values.begin() + static_cast<std::ptrdiff_t>(window), src->values.end());
        }
        columns.push_back(std::move(c));
    }
    std::vector<Date> dates(proxies.dates().begin() + static_cast<std::ptrdiff_t>(window), proxies.dates().end());
    return PricePanel(std::move(dates), std::move(columns));
}

}  // namespace sharpefolio
