#include "magbot/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "magbot/errors.hpp"

namespace magbot {

namespace {

using boost::math::quadrature::gauss_kronrod;

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846); }
double Phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Distribution of the range of k standard normals: P(R <= w).
double normal_range_cdf(double w, int k) {
    if (w <= 0.0) return 0.0;
    auto f = [&](double z) { return phi(z) * std::pow(std::max(0.0, Phi(z) - Phi(z - w)), k - 1); };
    const double v = k * gauss_kronrod<double, 61>::integrate(f, -8.5, 8.5 + w, 12, 1e-12);
    return std::clamp(v, 0.0, 1.0);
}

/// Two-group zero-variance rule shared by the tests.
double degenerate_p(double diff) { return std::abs(diff) > 0.0 ? 0.0 : 1.0; }

}  // namespace

double mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double ptukey(double q, int k, double df) {
    if (k < 2) throw InvalidSpecError("the studentized range needs at least two means");
    if (!(df > 0.0)) throw InvalidSpecError("degrees of freedom must be positive");
    if (q <= 0.0) return 0.0;
    if (!std::isfinite(q)) return 1.0;
    if (!std::isfinite(df) || df > 25000.0) return normal_range_cdf(q, k);
    // Mix over the scaled chi distribution of s = sqrt(chi2_df / df).
    const double log_norm = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) - (0.5 * df - 1.0) * std::log(2.0);
    auto f = [&](double s) {
        if (s <= 0.0) return 0.0;
        const double log_density = log_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s;
        return std::exp(log_density) * normal_range_cdf(q * s, k);
    };
    const double spread = 1.0 / std::sqrt(2.0 * df);
    const double lo = std::max(0.0, 1.0 - 40.0 * spread), hi = 1.0 + 40.0 * spread + (df < 10.0 ? 60.0 : 0.0);
    const double v = gauss_kronrod<double, 61>::integrate(f, lo, 1.0, 12, 1e-12) +
                     gauss_kronrod<double, 61>::integrate(f, 1.0, hi, 12, 1e-12);
    return std::clamp(v, 0.0, 1.0);
}

double qtukey(double alpha, int k, double df) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidSpecError("alpha must lie in (0, 1)");
    auto g = [&](double q) { return (1.0 - ptukey(q, k, df)) - alpha; };
    boost::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(g, 1e-3, 200.0, boost::math::tools::eps_tolerance<double>(40),
                                                    iters);
    return 0.5 * (r.first + r.second);
}

double t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw InvalidSpecError("each sample needs at least two values");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double df = na + nb - 2.0;
    const double pooled = ((na - 1.0) * std::pow(stddev(a), 2) + (nb - 1.0) * std::pow(stddev(b), 2)) / df;
    const double diff = mean(b) - mean(a);
    if (pooled <= 0.0) return degenerate_p(diff);
    const double t = diff / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    const boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

std::vector<PairComparison> tukey_hsd(const std::vector<std::vector<double>>& groups) {
    const std::size_t k = groups.size();
    if (k < 2) throw InvalidSpecError("Tukey HSD needs at least two groups");
    double ss = 0.0, n_total = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw InvalidSpecError("each group needs at least two values");
        const double m = mean(g);
        for (double v : g) ss += (v - m) * (v - m);
        n_total += static_cast<double>(g.size());
    }
    const double df = n_total - static_cast<double>(k);
    const double mse = ss / df;
    std::vector<PairComparison> out;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            PairComparison c;
            c.first = i;
            c.second = j;
            c.mean_difference = mean(groups[j]) - mean(groups[i]);
            if (mse <= 0.0) {
                c.statistic = c.mean_difference == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
                c.p_value = degenerate_p(c.mean_difference);
            } else {
                const double se = std::sqrt(0.5 * mse * (1.0 / groups[i].size() + 1.0 / groups[j].size()));
                c.statistic = std::abs(c.mean_difference) / se;
                c.p_value = std::clamp(1.0 - ptukey(c.statistic, static_cast<int>(k), df), 0.0, 1.0);
            }
            out.push_back(c);
        }
    return out;
}

double compare_conditions(const std::vector<double>& a, const std::vector<double>& b) { return t_test(a, b); }

}  // namespace magbot
