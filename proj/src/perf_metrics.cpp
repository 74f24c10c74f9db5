#include "sharpefolio/perf_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "sharpefolio/error.hpp"

namespace sharpefolio {

namespace {

constexpr double kZeroStd = 1e-14;

void require_nonempty(std::span<const double> r, const char* what) {
    if (r.empty()) throw DataError(std::string(what) + ": empty return series");
}

void require_above_minus_one(std::span<const double> r, const char* what) {
    for (double v : r)
        if (!(v > -1.0)) throw DataError(std::string(what) + ": return <= -1 wipes out the portfolio");
}

template <typename F>
std::optional<double> guarded(F&& f) {
    try {
        return f();
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

double mean(std::span<const double> x) {
    if (x.empty()) throw DataError("mean of empty series");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double population_std(std::span<const double> x) {
    if (x.empty()) throw DataError("std of empty series");
    // Shifting by the first value makes a constant series exactly zero.
    const double shift = x.front();
    double m = 0.0;
    for (double v : x) m += v - shift;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - shift - m) * (v - shift - m);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

double sharpe(std::span<const double> returns, double risk_free) {
    if (returns.size() < 2) throw DataError("sharpe needs at least 2 observations");
    const double sd = population_std(returns);
    if (sd <= kZeroStd) throw NumericalError("sharpe undefined for zero-variance returns");
    return (mean(returns) - risk_free) / sd * std::sqrt(kTradingDaysPerYear);
}

double cumulative_return(std::span<const double> returns) {
    require_nonempty(returns, "cumulative_return");
    require_above_minus_one(returns, "cumulative_return");
    double w = 1.0;
    for (double r : returns) w *= 1.0 + r;
    return w - 1.0;
}

double annualized_return(std::span<const double> returns) {
    const double growth = 1.0 + cumulative_return(returns);
    return std::pow(growth, kTradingDaysPerYear / static_cast<double>(returns.size())) - 1.0;
}

double annualized_volatility(std::span<const double> returns) {
    if (returns.size() < 2) throw DataError("annualized_volatility needs at least 2 observations");
    return population_std(returns) * std::sqrt(kTradingDaysPerYear);
}

double downside_deviation(std::span<const double> returns, double target) {
    require_nonempty(returns, "downside_deviation");
    double ss = 0.0;
    for (double r : returns) {
        const double d = std::min(r - target, 0.0);
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(returns.size())) * std::sqrt(kTradingDaysPerYear);
}

double sortino(std::span<const double> returns) {
    const double dd = downside_deviation(returns);
    if (dd <= 0.0) throw NumericalError("sortino undefined: zero downside deviation");
    return annualized_return(returns) / dd;
}

double max_drawdown(std::span<const double> returns) {
    require_nonempty(returns, "max_drawdown");
    require_above_minus_one(returns, "max_drawdown");
    double wealth = 1.0, peak = 1.0, worst = 0.0;
    for (double r : returns) {
        wealth *= 1.0 + r;
        peak = std::max(peak, wealth);
        worst = std::max(worst, 1.0 - wealth / peak);
    }
    return worst;
}

double pct_positive(std::span<const double> returns) {
    require_nonempty(returns, "pct_positive");
    const auto n = std::count_if(returns.begin(), returns.end(), [](double r) { return r > 0.0; });
    return static_cast<double>(n) / static_cast<double>(returns.size());
}

double avg_profit_over_avg_loss(std::span<const double> returns) {
    double gain = 0.0, loss = 0.0;
    std::size_t n_gain = 0, n_loss = 0;
    for (double r : returns) {
        if (r > 0.0) {
            gain += r;
            ++n_gain;
        } else if (r < 0.0) {
            loss += r;
            ++n_loss;
        }
    }
    if (n_gain == 0 || n_loss == 0)
        throw NumericalError("avg profit / avg loss needs at least one positive and one negative day");
    return (gain / static_cast<double>(n_gain)) / std::abs(loss / static_cast<double>(n_loss));
}

std::array<std::optional<double>, 9> MetricTable::values() const {
    return {cumulative_return, annual_return, annual_volatility, sharpe, downside_deviation,
            sortino,           max_drawdown,  pct_positive,      avg_profit_over_avg_loss};
}

MetricTable compute_metrics(std::span<const double> returns) {
    MetricTable t;
    t.cumulative_return = guarded([&] { return cumulative_return(returns); });
    t.annual_return = guarded([&] { return annualized_return(returns); });
    t.annual_volatility = guarded([&] { return annualized_volatility(returns); });
    t.sharpe = guarded([&] { return sharpe(returns); });
    t.downside_deviation = guarded([&] { return downside_deviation(returns); });
    t.sortino = guarded([&] { return sortino(returns); });
    t.max_drawdown = guarded([&] { return max_drawdown(returns); });
    t.pct_positive = guarded([&] { return pct_positive(returns); });
    t.avg_profit_over_avg_loss = guarded([&] { return avg_profit_over_avg_loss(returns); });
    return t;
}

RollingSharpeSeries rolling_sharpe(std::span<const double> returns, std::span<const Date> dates, std::size_t window) {
    if (window < 2) throw DataError("rolling Sharpe window must be at least 2");
    if (returns.size() < window)
        throw DataError("series of length " + std::to_string(returns.size()) + " shorter than rolling window " +
                        std::to_string(window));
    if (!dates.empty() && dates.size() != returns.size()) throw DataError("rolling_sharpe: dates/returns mismatch");
    RollingSharpeSeries out;
    out.window = window;
    for (std::size_t k = 0; k + window <= returns.size(); ++k) {
        out.values.push_back(guarded([&] { return sharpe(returns.subspan(k, window)); }));
        if (!dates.empty()) out.dates.push_back(dates[k + window - 1]);
    }
    return out;
}

RollingSharpeSeries RollingSharpeSeries::from(Date start) const {
    RollingSharpeSeries out;
    out.window = window;
    for (std::size_t i = 0; i < dates.size(); ++i)
        if (!(dates[i] < start)) {
            out.dates.push_back(dates[i]);
            out.values.push_back(values[i]);
        }
    return out;
}

std::vector<double> RollingSharpeSeries::defined_values() const {
    std::vector<double> out;
    for (const auto& v : values)
        if (v) out.push_back(*v);
    return out;
}

std::optional<double> RollingSharpeSeries::mean_defined() const {
    const auto v = defined_values();
    if (v.empty()) return std::nullopt;
    return mean(v);
}

std::string metrics_csv(std::span<const std::string> names, std::span<const MetricTable> tables) {
    if (names.size() != tables.size()) throw DataError("metrics_csv: names/tables mismatch");
    std::string out = "Measure";
    for (const auto& n : names) out += "," + n;
    out += "\n";
    std::vector<std::array<std::optional<double>, 9>> cols;
    for (const auto& t : tables) cols.push_back(t.values());
    for (std::size_t m = 0; m < kMetricLabels.size(); ++m) {
        out += kMetricLabels[m];
        for (const auto& c : cols) out += c[m] ? fmt::format(",{:.17g}", *c[m]) : std::string(",");
        out += "\n";
    }
    return out;
}

std::string metrics_json(const MetricTable& table) {
    nlohmann::ordered_json j;
    const auto v = table.values();
    for (std::size_t m = 0; m < kMetricLabels.size(); ++m)
        j[std::string(kMetricLabels[m])] = v[m] ? nlohmann::ordered_json(*v[m]) : nlohmann::ordered_json(nullptr);
    return j.dump(2);
}

}  // namespace sharpefolio
