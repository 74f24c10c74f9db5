#include "sharpefolio/benchmark_allocators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "sharpefolio/error.hpp"
#include "sharpefolio/rng.hpp"

namespace sharpefolio {

void validate_weights(std::span<const double> weights) {
    if (weights.empty()) throw DataError("weight vector is empty");
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w)) throw DataError("weight vector contains a non-finite value");
        if (w < 0.0) throw DataError(fmt::format("negative weight {} (long-only)", w));
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) throw DataError(fmt::format("weights sum to {}, not 1", sum));
}

void AllocationSeries::validate() const {
    if (weights.size() != dates.size()) throw DataError("allocation series: one weight row per date required");
    for (const auto& w : weights) {
        validate_weights(w);
        if (!assets.empty() && w.size() != assets.size()) throw DataError("allocation row width != asset count");
    }
}

std::string AllocationSeries::to_csv() const {
    std::string out = "date";
    for (const auto& a : assets) out += "," + a;
    out += "\n";
    for (std::size_t t = 0; t < dates.size(); ++t) {
        out += format_date(dates[t]);
        for (double w : weights[t]) out += fmt::format(",{:.17g}", w);
        out += "\n";
    }
    return out;
}

void MvoConfig::validate(std::size_t n_assets) const {
    if (n_assets == 0) throw ConfigError("MVO needs at least one asset");
    if (lookback_days < 2) throw ConfigError("MVO lookback_days must be >= 2");
    if (!(weight_floor >= 0.0) || !(weight_cap <= 1.0) || weight_floor > weight_cap)
        throw ConfigError("MVO bounds must satisfy 0 <= floor <= cap <= 1");
    const double n = static_cast<double>(n_assets);
    if (weight_floor * n > 1.0 + 1e-12 || weight_cap * n < 1.0 - 1e-12)
        throw ConfigError(fmt::format("MVO bounds [{}, {}] infeasible for {} assets", weight_floor, weight_cap, n_assets));
    if (restarts == 0) throw ConfigError("MVO needs at least one restart");
}

std::vector<double> project_box_simplex(std::span<const double> v, double lo, double hi) {
    const std::size_t n = v.size();
    const double dn = static_cast<double>(n);
    if (n == 0 || lo * dn > 1.0 + 1e-12 || hi * dn < 1.0 - 1e-12)
        throw ConfigError("box-constrained simplex is empty");
    auto total = [&](double tau) {
        double s = 0.0;
        for (double x : v) s += std::clamp(x - tau, lo, hi);
        return s;
    };
    // total(tau) is piecewise linear and nonincreasing with kinks at v_i - lo
    // and v_i - hi; locate the segment containing total = 1 and interpolate.
    std::vector<double> kinks;
    kinks.reserve(2 * n);
    for (double x : v) {
        kinks.push_back(x - lo);
        kinks.push_back(x - hi);
    }
    std::sort(kinks.begin(), kinks.end());
    double tau = kinks.front();
    if (total(kinks.front()) <= 1.0) {
        tau = kinks.front();
    } else if (total(kinks.back()) >= 1.0) {
        tau = kinks.back();
    } else {
        for (std::size_t k = 0; k + 1 < kinks.size(); ++k) {
            const double a = kinks[k], b = kinks[k + 1];
            const double ga = total(a), gb = total(b);
            if (ga >= 1.0 && gb <= 1.0) {
                tau = ga == gb ? a : a + (ga - 1.0) * (b - a) / (ga - gb);
                break;
            }
        }
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::clamp(v[i] - tau, lo, hi);
    // Spread any residual rounding over coordinates strictly inside the box.
    const double resid = 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
    std::size_t free = 0;
    for (double x : w)
        if (x > lo && x < hi) ++free;
    if (free > 0 && resid != 0.0)
        for (double& x : w)
            if (x > lo && x < hi) x = std::clamp(x + resid / static_cast<double>(free), lo, hi);
    return w;
}

namespace {

struct Moments {
    std::vector<double> mu;
    std::vector<double> cov;  // n x n, population
    std::size_t n = 0;
};

Moments estimate(const Tensor& history) {
    Moments m;
    const std::size_t rows = history.rows();
    m.n = history.cols();
    m.mu.assign(m.n, 0.0);
    m.cov.assign(m.n * m.n, 0.0);
    // Deviations are taken from the first row so constant columns give exactly zero variance.
    std::vector<double> shift(m.n, 0.0);
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t i = 0; i < m.n; ++i) shift[i] += history(t, i) - history(0, i);
    for (double& x : shift) x /= static_cast<double>(rows);
    for (std::size_t i = 0; i < m.n; ++i) m.mu[i] = history(0, i) + shift[i];
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t i = 0; i < m.n; ++i) {
            const double di = history(t, i) - history(0, i) - shift[i];
            for (std::size_t j = 0; j <= i; ++j) m.cov[i * m.n + j] += di * (history(t, j) - history(0, j) - shift[j]);
        }
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            m.cov[i * m.n + j] /= static_cast<double>(rows);
            m.cov[j * m.n + i] = m.cov[i * m.n + j];
        }
    return m;
}

struct Eval {
    double value;
    std::vector<double> grad;
};

Eval evaluate(const Moments& m, std::span<const double> w) {
    std::vector<double> sw(m.n, 0.0);
    double ret = 0.0, var = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
        ret += m.mu[i] * w[i];
        for (std::size_t j = 0; j < m.n; ++j) sw[i] += m.cov[i * m.n + j] * w[j];
    }
    for (std::size_t i = 0; i < m.n; ++i) var += w[i] * sw[i];
    if (!(var > 1e-300)) return {-std::numeric_limits<double>::infinity(), std::vector<double>(m.n, 0.0)};
    const double sd = std::sqrt(var);
    Eval e{ret / sd, std::vector<double>(m.n)};
    for (std::size_t i = 0; i < m.n; ++i) e.grad[i] = m.mu[i] / sd - ret * sw[i] / (var * sd);
    return e;
}

std::pair<std::vector<double>, double> ascend(const Moments& m, std::vector<double> w, const MvoConfig& cfg) {
    Eval cur = evaluate(m, w);
    double step = 0.0;
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        double gmax = 0.0;
        for (double g : cur.grad) gmax = std::max(gmax, std::abs(g));
        if (gmax == 0.0) break;
        if (step == 0.0) step = 0.1 / gmax;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            std::vector<double> trial(m.n);
            for (std::size_t i = 0; i < m.n; ++i) trial[i] = w[i] + step * cur.grad[i];
            trial = project_box_simplex(trial, cfg.weight_floor, cfg.weight_cap);
            Eval next = evaluate(m, trial);
            double predicted = 0.0;
            for (std::size_t i = 0; i < m.n; ++i) predicted += cur.grad[i] * (trial[i] - w[i]);
            if (next.value >= cur.value + 1e-4 * predicted) {
                const double gain = next.value - cur.value;
                w = std::move(trial);
                cur = std::move(next);
                accepted = true;
                step *= 2.0;
                if (gain < cfg.tolerance) return {w, cur.value};
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    return {w, cur.value};
}

}  // namespace

double portfolio_sharpe(const Tensor& history, std::span<const double> weights) {
    const Moments m = estimate(history);
    return evaluate(m, weights).value;
}

std::vector<double> mvo_weights(const Tensor& history, const MvoConfig& config) {
    const std::size_t n = history.cols();
    config.validate(n);
    if (history.rank() != 2 || history.rows() < 2) throw DataError("MVO history needs at least 2 rows");
    if (!history.all_finite()) throw DataError("MVO history contains non-finite returns");
    if (history.rows() < config.lookback_days)
        throw DataError(fmt::format("MVO history has {} rows, lookback needs {}", history.rows(), config.lookback_days));

    const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
    const std::vector<double> start = project_box_simplex(uniform, config.weight_floor, config.weight_cap);
    const Moments m = estimate(history);
    double max_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_var = std::max(max_var, m.cov[i * n + i]);
    if (!(max_var > 0.0)) return start;  // riskless history: every feasible point ties

    auto [best_w, best_f] = ascend(m, start, config);
    Rng rng = Rng(config.seed).split("mvo-restarts");
    for (std::size_t r = 1; r < config.restarts; ++r) {
        std::vector<double> draw(n);
        double sum = 0.0;
        for (double& x : draw) {
            double u = rng.uniform();
            while (u <= 0.0) u = rng.uniform();
            x = -std::log(u);
            sum += x;
        }
        for (double& x : draw) x /= sum;
        auto [w, f] = ascend(m, project_box_simplex(draw, config.weight_floor, config.weight_cap), config);
        if (f > best_f + 1e-12) {
            best_w = std::move(w);
            best_f = f;
        }
    }
    return best_w;
}

MvoSchedule mvo_schedule(const ReturnPanel& returns, const MvoConfig& config, const std::vector<Date>& test_dates) {
    config.validate(returns.n_assets());
    MvoSchedule out;
    out.allocations.assets = returns.assets;
    std::vector<double> current;
    int last_key = -1;
    for (Date d : test_dates) {
        const int key = year_of(d) * 4 + quarter_of(d);
        if (key != last_key) {
            const auto end = static_cast<std::size_t>(std::lower_bound(returns.dates.begin(), returns.dates.end(), d) -
                                                      returns.dates.begin());
            if (end < config.lookback_days)
                throw DataError(fmt::format("MVO reset on {} has {} return rows of history, needs {}", format_date(d),
                                            end, config.lookback_days));
            Tensor window({config.lookback_days, returns.n_assets()});
            for (std::size_t t = 0; t < config.lookback_days; ++t)
                for (std::size_t i = 0; i < returns.n_assets(); ++i)
                    window(t, i) = returns.values(end - config.lookback_days + t, i);
            current = mvo_weights(window, config);
            out.reset_dates.push_back(d);
            last_key = key;
        }
        out.allocations.dates.push_back(d);
        out.allocations.weights.push_back(current);
    }
    return out;
}

AllocationSeries balanced_weights(std::size_t n_assets, const std::vector<Date>& dates, std::vector<std::string> assets) {
    if (n_assets == 0) throw DataError("balanced portfolio needs at least one asset");
    std::vector<double> w(n_assets, 1.0 / static_cast<double>(n_assets));
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= sum;
    return fixed_weights(w, dates, std::move(assets));
}

AllocationSeries fixed_weights(std::span<const double> weights, const std::vector<Date>& dates,
                               std::vector<std::string> assets) {
    validate_weights(weights);
    if (!assets.empty() && assets.size() != weights.size()) throw DataError("fixed weights: width != asset count");
    AllocationSeries out;
    out.dates = dates;
    out.assets = std::move(assets);
    out.weights.assign(dates.size(), std::vector<double>(weights.begin(), weights.end()));
    return out;
}

}  // namespace sharpefolio
