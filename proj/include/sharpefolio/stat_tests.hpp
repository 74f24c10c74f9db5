#pragma once

#include <span>
#include <string>
#include <string_view>

#include "sharpefolio/perf_metrics.hpp"

namespace sharpefolio {

enum class TestMethod { mann_whitney_u, z_test };
enum class Alternative { two_sided, greater, less };

std::string_view to_string(TestMethod m);
std::string_view to_string(Alternative a);
Alternative parse_alternative(std::string_view s);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    TestMethod method = TestMethod::mann_whitney_u;
    Alternative alternative = Alternative::two_sided;

    std::string to_json() const;
};

double normal_cdf(double z);
double normal_sf(double z);

// Mann-Whitney U for sample_a against sample_b. The statistic is U of
// sample_a (count of pairs with a > b, ties counting one half). The p-value
// uses the normal approximation with tie-corrected variance and a 0.5
// continuity correction.
TestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                          Alternative alternative = Alternative::two_sided);

// Two-sample z-test with unequal-variance (Welch) standard error and a
// two-tailed standard-normal p-value.
TestResult z_test_two_sample(std::span<const double> means_a, std::span<const double> means_b);

struct SampleSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample (n-1) standard deviation
    std::size_t n = 0;
};

// Same test against a reference known only through its summary statistics.
TestResult z_test_against_summary(std::span<const double> means_a, const SampleSummary& reference);

// Fraction of shared dates where a > b strictly. Dates where either side is
// undefined are dropped pairwise.
double outperformance_fraction(const RollingSharpeSeries& a, const RollingSharpeSeries& b);

}  // namespace sharpefolio
