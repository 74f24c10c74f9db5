#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sharpefolio/allocator_models.hpp"
#include "sharpefolio/benchmark_allocators.hpp"
#include "sharpefolio/market_data.hpp"
#include "sharpefolio/perf_metrics.hpp"
#include "sharpefolio/stat_tests.hpp"
#include "sharpefolio/training.hpp"

namespace sharpefolio {

inline constexpr double kDefaultCostRate = 0.0001;

struct Segment {
    Date train_start;
    Date train_end;
    Date test_start;
    Date test_end;
};

// Expanding-window walk-forward plan. Test windows are consecutive calendar
// blocks; every segment trains from the data start through the day before its
// test window.
struct WalkForwardSchedule {
    std::vector<Segment> segments;

    Date test_start() const { return segments.front().test_start; }
    Date test_end() const { return segments.back().test_end; }
    void validate() const;
};

// Segment k tests [first_test + k * retrain_years, first_test + (k + 1) * retrain_years)
// clipped at `end` (inclusive).
WalkForwardSchedule make_schedule(Date data_start, Date first_test, Date end, int retrain_years = 2);

enum class StrategyKind { lstm, transformer, mvo, balanced, fixed };

std::string_view to_string(StrategyKind k);
StrategyKind parse_strategy_kind(std::string_view s);

struct PretrainSpec {
    // Proxy panel already mapped onto the target universe (build_pretrain_panel).
    PricePanel panel;
    TrainConfig train;
};

struct NeuralSpec {
    ModelConfig model;
    TrainConfig train;
    FeatureSpec features;
    // Z-score each feature with statistics from the segment's training rows.
    bool normalize = false;
    std::optional<PretrainSpec> pretrain;
};

struct StrategySpec {
    std::string name;
    StrategyKind kind = StrategyKind::balanced;
    std::optional<NeuralSpec> neural;  // lstm and transformer
    MvoConfig mvo;
    std::vector<double> fixed_weights;
};

struct BacktestOptions {
    double cost_rate = kDefaultCostRate;
    std::size_t rolling_window = 252;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::function<void(const std::string&)> progress;
};

struct SegmentLog {
    Segment segment;
    std::size_t train_samples = 0;
    std::size_t test_days = 0;
    TrainLog log;
    ParameterSet params;  // trained parameters used for the segment's test days
};

// Rows are keyed by decision date t: weights decided with data through t earn
// the return realized on the next trading day.
struct BacktestReport {
    std::string name;
    std::vector<Date> dates;
    std::vector<double> gross;
    std::vector<double> net;
    std::vector<double> cost;
    std::vector<double> turnover;
    AllocationSeries allocations;
    MetricTable metrics;
    RollingSharpeSeries rolling;

    // Neural strategies only.
    std::vector<std::string> phases;
    std::optional<TrainLog> pretrain_log;
    std::vector<SegmentLog> segments;

    std::size_t size() const { return dates.size(); }
    std::string returns_csv() const;
    std::string rolling_csv() const;
};

// Decision dates in [first, last] that have a next trading day in the panel.
std::vector<Date> decision_dates(const PricePanel& panel, Date first, Date last);

// Net/gross accounting for a weight series against the panel's next-day
// returns. cost_t = cost_rate * sum_i |w_t,i - w_t-1,i| with zero cost on the
// first day.
BacktestReport assemble_report(std::string name, AllocationSeries allocations, const PricePanel& panel,
                               double cost_rate, std::size_t rolling_window);

BacktestReport run_strategy(const StrategySpec& strategy, const PricePanel& panel,
                            const WalkForwardSchedule& schedule, const BacktestOptions& options);

struct PairComparison {
    std::string strategy;
    std::optional<TestResult> full;  // empty when undefined (too few or all tied values)
    std::optional<TestResult> zoom;
    std::optional<double> outperformance_full;
    std::optional<double> outperformance_zoom;
};

struct ComparisonReport {
    std::string baseline;
    std::optional<Date> zoom_start;
    std::vector<std::string> names;
    std::vector<MetricTable> tables;
    std::vector<std::optional<double>> mean_rolling_full;
    std::vector<std::optional<double>> mean_rolling_zoom;
    std::vector<PairComparison> pairs;  // every strategy except the baseline

    std::string to_json() const;
    std::string metrics_csv() const;
};

ComparisonReport compare(const std::vector<BacktestReport>& reports, const std::string& baseline,
                         std::optional<Date> zoom_start = std::nullopt);

struct ReplicateConfig {
    std::size_t runs = 30;
    std::uint64_t base_seed = 0;
    // Every run uses base_seed itself instead of a derived seed.
    bool same_seed = false;
    std::optional<SampleSummary> reference_summary;
    std::vector<double> reference_sample;
};

struct ReplicateSummary {
    std::vector<std::uint64_t> seeds;
    std::vector<BacktestReport> runs;
    std::vector<double> sharpes;  // full-period net Sharpe per run
    std::optional<TestResult> z;

    std::string to_json() const;
};

std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t index);

// Runs are distributed over options.jobs threads; options.seed is ignored.
ReplicateSummary replicate_runs(const StrategySpec& strategy, const PricePanel& panel,
                                const WalkForwardSchedule& schedule, const BacktestOptions& options,
                                const ReplicateConfig& config);

// metrics.csv, returns.csv, weights.csv, rolling_sharpe.csv and any training
// logs. Creates the directory.
void write_report(const BacktestReport& report, const std::filesystem::path& dir);
// Reads returns.csv, weights.csv and rolling_sharpe.csv back; metrics are
// recomputed from the net returns.
BacktestReport load_report(const std::filesystem::path& dir, std::string name);

}  // namespace sharpefolio
