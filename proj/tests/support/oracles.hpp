#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sharpefolio/autodiff.hpp"
#include "sharpefolio/rng.hpp"

namespace oracle {

using sharpefolio::ParameterSet;
using sharpefolio::Rng;
using sharpefolio::Tensor;

// ---- metrics (long double, two-pass) ----

inline long double ld_mean(const std::vector<double>& r) {
    long double s = 0;
    for (double x : r) s += x;
    return s / static_cast<long double>(r.size());
}

inline long double ld_pstd(const std::vector<double>& r) {
    const long double m = ld_mean(r);
    long double ss = 0;
    for (double x : r) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<long double>(r.size()));
}

inline double sharpe(const std::vector<double>& r) {
    return static_cast<double>(ld_mean(r) / ld_pstd(r) * std::sqrt(252.0L));
}

inline double cumulative(const std::vector<double>& r) {
    long double w = 1;
    for (double x : r) w *= 1.0L + x;
    return static_cast<double>(w - 1);
}

inline double annual_return(const std::vector<double>& r) {
    return static_cast<double>(std::pow(1.0L + cumulative(r), 252.0L / static_cast<long double>(r.size())) - 1);
}

inline double annual_vol(const std::vector<double>& r) { return static_cast<double>(ld_pstd(r) * std::sqrt(252.0L)); }

inline double downside(const std::vector<double>& r) {
    long double ss = 0;
    for (double x : r)
        if (x < 0) ss += static_cast<long double>(x) * x;
    return static_cast<double>(std::sqrt(ss / static_cast<long double>(r.size())) * std::sqrt(252.0L));
}

inline double sortino(const std::vector<double>& r) { return annual_return(r) / downside(r); }

// Brute force over every (peak, trough) pair, O(N^2).
inline double max_drawdown(const std::vector<double>& r) {
    std::vector<long double> wealth{1.0L};
    for (double x : r) wealth.push_back(wealth.back() * (1.0L + x));
    long double worst = 0;
    for (std::size_t j = 0; j < wealth.size(); ++j)
        for (std::size_t i = 0; i <= j; ++i) worst = std::max(worst, 1.0L - wealth[j] / wealth[i]);
    return static_cast<double>(worst);
}

inline double pct_positive(const std::vector<double>& r) {
    return static_cast<double>(std::count_if(r.begin(), r.end(), [](double x) { return x > 0; })) /
           static_cast<double>(r.size());
}

inline double profit_loss(const std::vector<double>& r) {
    long double p = 0, l = 0;
    int np = 0, nl = 0;
    for (double x : r) {
        if (x > 0) p += x, ++np;
        if (x < 0) l += x, ++nl;
    }
    return static_cast<double>((p / np) / std::fabs(l / nl));
}

// ---- Mann-Whitney exact permutation p (no ties) ----

// Two-sided exact p for U of the first sample: probability over all
// C(n1+n2, n1) rank assignments that |U - n1 n2 / 2| is at least the observed.
inline double mw_exact_two_sided(std::size_t n1, std::size_t n2, double u_obs) {
    const std::size_t n = n1 + n2;
    const double centre = static_cast<double>(n1 * n2) / 2.0;
    const double observed = std::abs(u_obs - centre);
    std::uint64_t extreme = 0, total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
        ++total;
        // Ranks 1..n; members of the mask belong to sample one.
        std::size_t rank_sum = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) rank_sum += i + 1;
        const double u = static_cast<double>(rank_sum) - static_cast<double>(n1 * (n1 + 1)) / 2.0;
        if (std::abs(u - centre) >= observed - 1e-9) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
}

// U of a against b by direct pair counting.
inline double mw_pair_count(const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0;
    for (double x : a)
        for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    return u;
}

// ---- MVO grid search over the box-constrained 3-simplex ----

struct GridResult {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> weights;
};

inline double daily_sharpe(const std::vector<std::vector<double>>& rows, const std::vector<double>& w) {
    std::vector<double> port;
    for (const auto& r : rows) {
        double s = 0;
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * r[i];
        port.push_back(s);
    }
    return static_cast<double>(ld_mean(port) / ld_pstd(port));
}

inline GridResult grid_mvo3(const std::vector<std::vector<double>>& rows, double lo, double hi, double step) {
    GridResult g;
    const int steps = static_cast<int>(std::lround(1.0 / step));
    for (int a = 0; a <= steps; ++a)
        for (int b = 0; a + b <= steps; ++b) {
            const std::vector<double> w{a * step, b * step, 1.0 - (a + b) * step};
            bool ok = true;
            for (double x : w) ok = ok && x >= lo - 1e-12 && x <= hi + 1e-12;
            if (!ok) continue;
            const double s = daily_sharpe(rows, w);
            if (s > g.best) g.best = s, g.weights = w;
        }
    return g;
}

// ---- central finite differences ----

struct GradCheck {
    std::size_t checked = 0;
    std::size_t failures = 0;
    double worst_rel = 0;
    std::string worst_name;
};

// Compares analytic gradients in `analytic` (already populated) with central
// differences of `loss` at step h. An entry passes when its relative error is
// below rel_tol or its absolute error is below abs_floor.
inline GradCheck finite_difference_check(ParameterSet params, const ParameterSet& analytic,
                                         const std::function<double(const ParameterSet&)>& loss, double h = 1e-5,
                                         double rel_tol = 1e-4, double abs_floor = 1e-7) {
    GradCheck out;
    for (const auto& name : params.names()) {
        Tensor& value = params.value(name);
        const Tensor& grad = analytic.grad(name);
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            value[i] = saved + h;
            const double up = loss(params);
            value[i] = saved - h;
            const double down = loss(params);
            value[i] = saved;
            const double numeric = (up - down) / (2 * h);
            const double a = grad[i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-300});
            ++out.checked;
            if (rel >= rel_tol && abs_err >= abs_floor) ++out.failures;
            if (abs_err >= abs_floor && rel > out.worst_rel) {
                out.worst_rel = rel;
                out.worst_name = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return out;
}

// ---- generators ----

inline std::vector<double> random_returns(Rng& rng, std::size_t n, double scale = 0.02) {
    std::vector<double> r(n);
    for (double& x : r) x = std::clamp(rng.normal() * scale + 0.0005, -0.9, 5.0);
    return r;
}

inline Tensor random_tensor(const Tensor::Shape& shape, Rng& rng, double scale = 1.0) {
    Tensor t(shape);
    for (double& x : t.values()) x = rng.normal() * scale;
    return t;
}

inline ParameterSet randomize(ParameterSet p, Rng& rng, double scale) {
    for (const auto& name : p.names())
        for (double& x : p.value(name).values()) x = rng.normal() * scale;
    return p;
}

}  // namespace oracle
