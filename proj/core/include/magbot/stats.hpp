#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace magbot {

double mean(const std::vector<double>& x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(const std::vector<double>& x);

/// P(Q <= q) for the studentized range of `k` means with `df` error degrees of
/// freedom (df = infinity for a known variance).
double ptukey(double q, int k, double df);
/// Upper critical value: P(Q > q) = alpha.
double qtukey(double alpha, int k, double df);

/// Two-sided pooled-variance Student t-test. Zero pooled variance gives p = 1
/// for equal means and p = 0 otherwise. Throws InvalidSpecError for n < 2.
double t_test(const std::vector<double>& a, const std::vector<double>& b);

struct PairComparison {
    std::size_t first = 0;
    std::size_t second = 0;
    double mean_difference = 0.0;  // mean(second) - mean(first)
    double statistic = 0.0;        // studentized range q
    double p_value = 1.0;
};

/// Tukey HSD (Tukey-Kramer for unequal sizes) over all pairs of groups.
std::vector<PairComparison> tukey_hsd(const std::vector<std::vector<double>>& groups);

/// Two-group comparison: the pooled t-test, which Tukey HSD reduces to for
/// two groups.
double compare_conditions(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace magbot
