#include "sharpefolio/stat_tests.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "sharpefolio/error.hpp"

namespace sharpefolio {

std::string_view to_string(TestMethod m) { return m == TestMethod::mann_whitney_u ? "mann_whitney_u" : "z_test"; }

std::string_view to_string(Alternative a) {
    switch (a) {
        case Alternative::two_sided: return "two_sided";
        case Alternative::greater: return "greater";
        case Alternative::less: return "less";
    }
    return "two_sided";
}

Alternative parse_alternative(std::string_view s) {
    if (s == "two_sided") return Alternative::two_sided;
    if (s == "greater") return Alternative::greater;
    if (s == "less") return Alternative::less;
    throw ConfigError("unknown alternative '" + std::string(s) + "'");
}

std::string TestResult::to_json() const {
    nlohmann::ordered_json j;
    j["method"] = to_string(method);
    j["statistic"] = statistic;
    j["p_value"] = p_value;
    j["n1"] = n1;
    j["n2"] = n2;
    j["alternative"] = to_string(alternative);
    return j.dump();
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

TestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                          Alternative alternative) {
    if (sample_a.empty() || sample_b.empty()) throw DataError("mann_whitney_u: empty sample");
    const std::size_t n1 = sample_a.size(), n2 = sample_b.size(), n = n1 + n2;

    struct Obs {
        double v;
        bool from_a;
    };
    std::vector<Obs> all;
    all.reserve(n);
    for (double v : sample_a) all.push_back({v, true});
    for (double v : sample_b) all.push_back({v, false});
    for (const auto& o : all)
        if (!std::isfinite(o.v)) throw DataError("mann_whitney_u: non-finite observation");
    std::sort(all.begin(), all.end(), [](const Obs& x, const Obs& y) { return x.v < y.v; });

    double rank_sum_a = 0.0, tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && all[j].v == all[i].v) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k)
            if (all[k].from_a) rank_sum_a += midrank;
        i = j;
    }

    const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2), dn = static_cast<double>(n);
    const double u = rank_sum_a - dn1 * (dn1 + 1.0) / 2.0;
    const double mu = dn1 * dn2 / 2.0;
    const double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - (n > 1 ? tie_term / (dn * (dn - 1.0)) : 0.0));
    if (!(var > 0.0)) throw NumericalError("mann_whitney_u: all observations tied");
    const double sd = std::sqrt(var);

    double p = 1.0;
    switch (alternative) {
        case Alternative::two_sided:
            p = 2.0 * normal_sf((std::abs(u - mu) - 0.5) / sd);
            break;
        case Alternative::greater:
            p = normal_sf((u - mu - 0.5) / sd);
            break;
        case Alternative::less:
            p = normal_cdf((u - mu + 0.5) / sd);
            break;
    }
    return {u, std::clamp(p, 0.0, 1.0), n1, n2, TestMethod::mann_whitney_u, alternative};
}

namespace {

SampleSummary summarize(std::span<const double> x) {
    if (x.size() < 2) throw DataError("z-test needs at least 2 entries per sample");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return {m, std::sqrt(ss / static_cast<double>(x.size() - 1)), x.size()};
}

TestResult z_from_summaries(const SampleSummary& a, const SampleSummary& b) {
    const double se2 = a.stddev * a.stddev / static_cast<double>(a.n) + b.stddev * b.stddev / static_cast<double>(b.n);
    if (!(se2 > 0.0)) {
        // Two constant samples: equal means are indistinguishable, distinct ones have no finite z.
        if (a.mean == b.mean) return {0.0, 1.0, a.n, b.n, TestMethod::z_test, Alternative::two_sided};
        throw NumericalError("z-test: both sample variances are zero and the means differ");
    }
    const double z = (a.mean - b.mean) / std::sqrt(se2);
    const double p = std::clamp(2.0 * normal_sf(std::abs(z)), 0.0, 1.0);
    return {z, p, a.n, b.n, TestMethod::z_test, Alternative::two_sided};
}

}  // namespace

TestResult z_test_two_sample(std::span<const double> means_a, std::span<const double> means_b) {
    return z_from_summaries(summarize(means_a), summarize(means_b));
}

TestResult z_test_against_summary(std::span<const double> means_a, const SampleSummary& reference) {
    if (reference.n < 2) throw DataError("z-test reference needs n >= 2");
    return z_from_summaries(summarize(means_a), reference);
}

double outperformance_fraction(const RollingSharpeSeries& a, const RollingSharpeSeries& b) {
    if (a.dates != b.dates || a.values.size() != b.values.size())
        throw DataError("outperformance_fraction: series do not share date indices");
    std::size_t wins = 0, total = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (!a.values[i] || !b.values[i]) continue;
        ++total;
        if (*a.values[i] > *b.values[i]) ++wins;
    }
    if (total == 0) throw DataError("outperformance_fraction: no dates with both values defined");
    return static_cast<double>(wins) / static_cast<double>(total);
}

}  // namespace sharpefolio
