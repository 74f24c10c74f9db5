#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "sharpefolio/error.hpp"
#include "sharpefolio/perf_metrics.hpp"
#include "support/oracles.hpp"

using namespace sharpefolio;
namespace ref = oracle;

namespace {

const double kSqrt252 = std::sqrt(252.0);

bool close(double a, double b, double tol = 1e-10) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_SUITE("perf_metrics") {

TEST_CASE("hand-computed examples") {
    using V = std::vector<double>;
    CHECK(sharpe(V{0.01, -0.01}) == 0.0);
    CHECK(sharpe(V{0.011, -0.009}) == doctest::Approx(0.1 * kSqrt252).epsilon(1e-12));
    CHECK(sharpe(V{0.011, -0.009}) == doctest::Approx(1.5875).epsilon(1e-4));

    CHECK(cumulative_return(V(10, 0.0)) == 0.0);
    CHECK(cumulative_return(V{0.01, -0.01}) == doctest::Approx(-0.0001).epsilon(1e-12));
    CHECK(cumulative_return(V{0.1, 0.1}) == doctest::Approx(0.21).epsilon(1e-14));

    CHECK(annualized_return(V(252, 0.0)) == 0.0);
    const double d252 = std::pow(1.21, 1.0 / 252.0) - 1.0;
    CHECK(annualized_return(V(252, d252)) == doctest::Approx(0.21).epsilon(1e-12));
    const double d504 = std::pow(1.21, 1.0 / 504.0) - 1.0;
    CHECK(annualized_return(V(504, d504)) == doctest::Approx(0.1).epsilon(1e-12));

    CHECK(annualized_volatility(V(20, 0.003)) == doctest::Approx(0.0).epsilon(1e-12).scale(1e-12));
    CHECK(annualized_volatility(V{0.01, -0.01}) == doctest::Approx(0.01 * kSqrt252).epsilon(1e-14));
    CHECK(annualized_volatility(V{0.01, -0.01}) == doctest::Approx(0.1587).epsilon(1e-3));

    CHECK(downside_deviation(V{0.01, 0.0, 0.2}) == 0.0);
    CHECK(downside_deviation(V{0.02, -0.02}) == doctest::Approx(std::sqrt(0.0004 / 2) * kSqrt252).epsilon(1e-14));
    CHECK(downside_deviation(V{0.02, -0.02}) == doctest::Approx(0.2245).epsilon(1e-3));
    CHECK(downside_deviation(V{-0.01, -0.01}) == doctest::Approx(0.01 * kSqrt252).epsilon(1e-14));

    CHECK_THROWS_AS(sortino(V{0.01, 0.02}), NumericalError);

    CHECK(max_drawdown(V{0.01, 0.02, 0.03}) == 0.0);
    CHECK(max_drawdown(V{-0.2, 0.125}) == doctest::Approx(0.20).epsilon(1e-14));  // 100 -> 80 -> 90
    CHECK(max_drawdown(V{-0.25}) == doctest::Approx(0.25).epsilon(1e-15));

    CHECK(pct_positive(V{0.01, 0.02}) == 1.0);
    CHECK(pct_positive(V{0.01, -0.01, 0.02}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(pct_positive(V{0.0, 0.0}) == 0.0);

    CHECK(avg_profit_over_avg_loss(V{0.01, -0.01}) == 1.0);
    CHECK(avg_profit_over_avg_loss(V{0.02, -0.01}) == 2.0);
    CHECK_THROWS_AS(avg_profit_over_avg_loss(V{0.01, 0.02}), NumericalError);
}

TEST_CASE("sortino ratio example") {
    // Daily returns built so the annual return is 0.30 and the downside
    // deviation 0.10: a single losing day d among N with d^2 / N * 252 = 0.01.
    const std::size_t n = 252;
    const double loss = -std::sqrt(0.01 * static_cast<double>(n) / 252.0);
    std::vector<double> r(n, 0.0);
    r[0] = loss;
    const double others = std::pow(1.30 / (1.0 + loss), 1.0 / static_cast<double>(n - 1)) - 1.0;
    for (std::size_t i = 1; i < n; ++i) r[i] = others;
    CHECK(downside_deviation(r) == doctest::Approx(0.10).epsilon(1e-12));
    CHECK(annualized_return(r) == doctest::Approx(0.30).epsilon(1e-12));
    CHECK(sortino(r) == doctest::Approx(3.0).epsilon(1e-11));
}

TEST_CASE("preconditions") {
    using V = std::vector<double>;
    CHECK_THROWS_AS(sharpe(V{0.01}), DataError);
    CHECK_THROWS_AS(sharpe(V{0.01, 0.01, 0.01}), NumericalError);
    CHECK_THROWS_AS(cumulative_return(V{0.1, -1.0}), DataError);
    CHECK_THROWS_AS(annualized_return(V{}), DataError);
    CHECK_THROWS_AS(annualized_volatility(V{0.1}), DataError);
    CHECK_THROWS_AS(downside_deviation(V{}), DataError);
    CHECK_THROWS_AS(max_drawdown(V{}), DataError);
    CHECK_THROWS_AS(pct_positive(V{}), DataError);
}

TEST_CASE("all metrics agree with the brute-force oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(299);
        const double scale = rng.uniform(0.001, 0.05);
        const std::vector<double> r = ref::random_returns(rng, n, scale);
        CAPTURE(trial);
        CHECK(close(cumulative_return(r), ref::cumulative(r)));
        CHECK(close(annualized_return(r), ref::annual_return(r)));
        CHECK(close(annualized_volatility(r), ref::annual_vol(r)));
        CHECK(close(sharpe(r), ref::sharpe(r)));
        CHECK(close(downside_deviation(r), ref::downside(r)));
        CHECK(close(max_drawdown(r), ref::max_drawdown(r)));
        CHECK(close(pct_positive(r), ref::pct_positive(r)));
        if (ref::downside(r) > 0) CHECK(close(sortino(r), ref::sortino(r)));
        const bool mixed = std::any_of(r.begin(), r.end(), [](double x) { return x > 0; }) &&
                           std::any_of(r.begin(), r.end(), [](double x) { return x < 0; });
        if (mixed) CHECK(close(avg_profit_over_avg_loss(r), ref::profit_loss(r)));
    }
}

TEST_CASE("metric table invariants") {
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const auto r = ref::random_returns(rng, 5 + rng.below(200), rng.uniform(0.001, 0.04));
        const MetricTable t = compute_metrics(r);
        REQUIRE(t.annual_volatility);
        CHECK(*t.annual_volatility >= 0);
        CHECK(*t.downside_deviation >= 0);
        CHECK(*t.max_drawdown >= 0);
        CHECK(*t.max_drawdown <= 1);
        CHECK(*t.pct_positive >= 0);
        CHECK(*t.pct_positive <= 1);
        // Sharpe equals the mean-based annual return over annual volatility.
        CHECK(close(*t.sharpe, mean(r) * 252.0 / *t.annual_volatility));
    }
    const MetricTable flat = compute_metrics(std::vector<double>(10, 0.001));
    CHECK_FALSE(flat.sharpe.has_value());
    CHECK_FALSE(flat.sortino.has_value());
    CHECK(flat.cumulative_return.has_value());
}

TEST_CASE("scale and prefix properties") {
    Rng rng(6);
    for (int trial = 0; trial < 300; ++trial) {
        const auto r = ref::random_returns(rng, 10 + rng.below(100), 0.01);
        const double c = rng.uniform(0.1, 5.0);
        std::vector<double> scaled = r;
        for (double& x : scaled) x *= c;
        CHECK(std::abs(sharpe(scaled) - sharpe(r)) < 1e-10);
        CHECK(pct_positive(scaled) == pct_positive(r));
        // Sortino uses the compounded annual return, which is not linear in
        // the returns, so only the mean/dispersion ratio is scale free.
        const double ratio = mean(r) / (downside_deviation(r) / std::sqrt(252.0));
        const double ratio_scaled = mean(scaled) / (downside_deviation(scaled) / std::sqrt(252.0));
        CHECK(std::abs(ratio - ratio_scaled) < 1e-10);

        std::vector<double> prefixed(rng.below(20), 0.0);
        prefixed.insert(prefixed.end(), r.begin(), r.end());
        CHECK(max_drawdown(prefixed) == doctest::Approx(max_drawdown(r)).epsilon(1e-14));
    }
}

TEST_CASE("rolling sharpe") {
    Rng rng(7);
    SUBCASE("degenerate window equals the full-series Sharpe") {
        const auto r = ref::random_returns(rng, 40);
        const auto s = rolling_sharpe(r, {}, 40);
        REQUIRE(s.size() == 1);
        CHECK(*s.values[0] == sharpe(r));
    }
    SUBCASE("253 returns, window 252") {
        const auto r = ref::random_returns(rng, 253);
        const auto s = rolling_sharpe(r, {}, 252);
        REQUIRE(s.size() == 2);
        CHECK(*s.values[0] == doctest::Approx(ref::sharpe({r.begin(), r.end() - 1})).epsilon(1e-12));
        CHECK(*s.values[1] == doctest::Approx(ref::sharpe({r.begin() + 1, r.end()})).epsilon(1e-12));
    }
    SUBCASE("every window matches a direct slice computation") {
        for (std::size_t n = 2; n <= 30; ++n) {
            const auto r = ref::random_returns(rng, n);
            for (std::size_t w = 2; w <= n; ++w) {
                const auto s = rolling_sharpe(r, {}, w);
                REQUIRE(s.size() == n - w + 1);
                for (std::size_t k = 0; k < s.size(); ++k)
                    CHECK(close(*s.values[k], ref::sharpe({r.begin() + static_cast<long>(k), r.begin() + static_cast<long>(k + w)})));
            }
        }
    }
    SUBCASE("zero-variance windows are marked undefined and dates follow the window end") {
        std::vector<double> r{0.01, 0.01, 0.01, 0.02, -0.01};
        std::vector<Date> d;
        for (int i = 0; i < 5; ++i) d.push_back(make_date(2020, 1, 6) + std::chrono::days{i});
        const auto s = rolling_sharpe(r, d, 3);
        REQUIRE(s.size() == 3);
        CHECK_FALSE(s.values[0].has_value());
        CHECK(s.values[1].has_value());
        CHECK(s.dates == std::vector<Date>{d[2], d[3], d[4]});
        CHECK(s.defined_values().size() == 2);
        CHECK(s.from(d[3]).size() == 2);
    }
    SUBCASE("too short") { CHECK_THROWS_AS(rolling_sharpe(std::vector<double>(10, 0.1), {}, 11), DataError); }
}

TEST_CASE("serialization uses the table labels in order") {
    const std::vector<double> r{0.01, -0.02, 0.03, 0.004};
    const std::vector<std::string> names{"LSTM", "MVO"};
    const std::vector<MetricTable> tables{compute_metrics(r), compute_metrics(std::vector<double>(4, 0.001))};
    const std::string csv = metrics_csv(names, tables);
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const auto nl = csv.find('\n', pos);
        lines.push_back(csv.substr(pos, nl - pos));
        pos = nl + 1;
    }
    REQUIRE(lines.size() == 10);
    CHECK(lines[0] == "Measure,LSTM,MVO");
    for (std::size_t i = 0; i < 9; ++i) CHECK(lines[i + 1].rfind(std::string(kMetricLabels[i]) + ",", 0) == 0);

    const auto j = nlohmann::json::parse(metrics_json(tables[0]));
    CHECK(j["Sharpe Ratio"].get<double>() == doctest::Approx(sharpe(r)).epsilon(1e-15));
    CHECK(j.size() == 9);
}

}  // TEST_SUITE
