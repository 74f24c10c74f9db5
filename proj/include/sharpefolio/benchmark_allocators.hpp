#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sharpefolio/date.hpp"
#include "sharpefolio/market_data.hpp"
#include "sharpefolio/tensor.hpp"

namespace sharpefolio {

inline constexpr double kSimplexTolerance = 1e-9;

// Throws DataError unless every weight is >= 0 and the sum is 1 within 1e-9.
void validate_weights(std::span<const double> weights);

struct AllocationSeries {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    std::vector<std::vector<double>> weights;  // one row per date

    std::size_t size() const { return dates.size(); }
    void validate() const;
    std::string to_csv() const;
};

struct MvoConfig {
    std::size_t lookback_days = 756;  // three years of trading days
    double weight_floor = 0.1;
    double weight_cap = 0.9;
    std::size_t restarts = 50;
    std::uint64_t seed = 0;
    double tolerance = 1e-10;
    std::size_t max_iterations = 20000;

    void validate(std::size_t n_assets) const;
};

// Euclidean projection onto {w : sum w = 1, lo <= w_i <= hi}.
std::vector<double> project_box_simplex(std::span<const double> v, double lo, double hi);

// Daily (unannualized) Sharpe of the fixed-weight portfolio over `history`
// (rows x assets), population std.
double portfolio_sharpe(const Tensor& history, std::span<const double> weights);

// Box-constrained maximum-Sharpe weights over the full history, solved by
// projected gradient ascent with random restarts. One restart starts at the
// uniform point and wins objective ties within 1e-12.
std::vector<double> mvo_weights(const Tensor& history, const MvoConfig& config);

struct MvoSchedule {
    AllocationSeries allocations;
    std::vector<Date> reset_dates;
};

// Quarterly re-optimized weights for each test date. A reset happens on the
// first test date and on the first test date of every later calendar quarter,
// using the `lookback_days` returns dated strictly before the reset date.
MvoSchedule mvo_schedule(const ReturnPanel& returns, const MvoConfig& config, const std::vector<Date>& test_dates);

AllocationSeries balanced_weights(std::size_t n_assets, const std::vector<Date>& dates,
                                  std::vector<std::string> assets = {});
AllocationSeries fixed_weights(std::span<const double> weights, const std::vector<Date>& dates,
                               std::vector<std::string> assets = {});

}  // namespace sharpefolio
