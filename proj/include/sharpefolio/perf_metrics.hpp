#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sharpefolio/date.hpp"

namespace sharpefolio {

inline constexpr double kTradingDaysPerYear = 252.0;

// Daily-return performance metrics. Annualization uses 252 days and the
// population (1/N) standard deviation throughout; the risk-free rate is zero.
double sharpe(std::span<const double> returns, double risk_free = 0.0);
double cumulative_return(std::span<const double> returns);
double annualized_return(std::span<const double> returns);
double annualized_volatility(std::span<const double> returns);
double downside_deviation(std::span<const double> returns, double target = 0.0);
double sortino(std::span<const double> returns);
double max_drawdown(std::span<const double> returns);
double pct_positive(std::span<const double> returns);
double avg_profit_over_avg_loss(std::span<const double> returns);

double mean(std::span<const double> x);
double population_std(std::span<const double> x);

// Row labels, in table order.
inline constexpr std::array<std::string_view, 9> kMetricLabels = {
    "Cumulative Return", "Annual Return", "Annual Volatility", "Sharpe Ratio", "Downside Deviation",
    "Sortino",           "Max Drawdown",  "% of + Return",     "Ave P/Ave L",
};

// A metric that cannot be computed for the series (zero variance, no losing
// days, ...) is left empty rather than reported as infinity.
struct MetricTable {
    std::optional<double> cumulative_return;
    std::optional<double> annual_return;
    std::optional<double> annual_volatility;
    std::optional<double> sharpe;
    std::optional<double> downside_deviation;
    std::optional<double> sortino;
    std::optional<double> max_drawdown;
    std::optional<double> pct_positive;
    std::optional<double> avg_profit_over_avg_loss;

    std::array<std::optional<double>, 9> values() const;
};

MetricTable compute_metrics(std::span<const double> returns);

struct RollingSharpeSeries {
    std::vector<Date> dates;
    // Empty entries mark zero-variance windows.
    std::vector<std::optional<double>> values;
    std::size_t window = 252;

    std::size_t size() const { return values.size(); }
    RollingSharpeSeries from(Date start) const;
    std::vector<double> defined_values() const;
    std::optional<double> mean_defined() const;
};

// Value at index k covers returns (k, k + window]; dated at the window's last
// return. `dates` must match `returns` in length (pass empty to skip dating).
RollingSharpeSeries rolling_sharpe(std::span<const double> returns, std::span<const Date> dates,
                                   std::size_t window = 252);

// Side-by-side table (one column per strategy) as CSV: "Measure,<names...>".
std::string metrics_csv(std::span<const std::string> names, std::span<const MetricTable> tables);
std::string metrics_json(const MetricTable& table);

}  // namespace sharpefolio
