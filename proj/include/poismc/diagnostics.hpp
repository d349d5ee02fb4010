#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "poismc/discrete_solver.hpp"
#include "poismc/kernel.hpp"
#include "poismc/solution.hpp"

namespace poismc {

/// Result of one statistical check; regenerates identically from (seed, config).
struct StatReport {
    std::string test;
    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = false;
    long n = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Kolmogorov critical coefficient: c(alpha) = sqrt(-ln(alpha/2)/2).
inline double ks_coefficient(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");
    return std::sqrt(-std::log(alpha / 2.0) / 2.0);
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe out;
    if (xs.empty()) return out;
    out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                           static_cast<double>(xs.size()));
    }
    return out;
}

}  // namespace detail

/// Two-sample Kolmogorov-Smirnov decision at level alpha (asymptotic critical
/// value). With atoms in the data the test is conservative.
inline StatReport ks_two_sample(std::vector<double> a, std::vector<double> b, double alpha,
                                std::uint64_t seed_label = 0) {
    if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());

    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }

    StatReport rep;
    rep.test = "ks_two_sample";
    rep.statistic = d;
    rep.threshold = detail::ks_coefficient(alpha) * std::sqrt(1.0 / na + 1.0 / nb);
    rep.pass = rep.statistic <= rep.threshold;
    rep.n = static_cast<long>(a.size() + b.size());
    rep.seed = seed_label;
    return rep;
}

/// One-sample Kolmogorov-Smirnov against a reference CDF. Handles atoms:
/// ties are grouped and the lower comparison uses the CDF's left limit,
/// evaluated just below each distinct value.
inline StatReport ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf,
                                double alpha, std::uint64_t seed_label = 0) {
    if (a.empty()) throw InvalidArgument("ks_one_sample: empty sample");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < a.size()) {
        const double v = a[i];
        std::size_t j = i;
        while (j < a.size() && a[j] == v) ++j;
        const double f_at = cdf(v);
        const double f_below = cdf(v - 1e-6 * std::max(1.0, std::abs(v)));
        d = std::max(d, std::abs(static_cast<double>(j) / n - f_at));
        d = std::max(d, std::abs(static_cast<double>(i) / n - f_below));
        i = j;
    }
    StatReport rep;
    rep.test = "ks_one_sample";
    rep.statistic = d;
    rep.threshold = detail::ks_coefficient(alpha) / std::sqrt(n);
    rep.pass = rep.statistic <= rep.threshold;
    rep.n = static_cast<long>(a.size());
    rep.seed = seed_label;
    return rep;
}

/// Checks that the ensemble mean of every martingale increment is within
/// three standard errors of zero. increments[p][t] is the t-th increment of
/// path p; the statistic is the worst |mean|/se across time indices.
inline StatReport martingale_mc_check(const std::vector<std::vector<double>>& increments,
                                      std::uint64_t seed_label = 0) {
    if (increments.empty()) throw InvalidArgument("martingale_mc_check: no paths");
    std::size_t steps = increments.front().size();
    for (const auto& row : increments) steps = std::min(steps, row.size());

    double worst = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> column;
        column.reserve(increments.size());
        for (const auto& row : increments) column.push_back(row[t]);
        const auto ms = detail::mean_se(column);
        const double ratio = ms.se > 0.0 ? std::abs(ms.mean) / ms.se
                                         : (ms.mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        worst = std::max(worst, ratio);
    }

    StatReport rep;
    rep.test = "martingale_mc_check";
    rep.statistic = worst;
    rep.threshold = 3.0;
    rep.pass = worst <= 3.0;
    rep.n = static_cast<long>(increments.size());
    rep.seed = seed_label;
    return rep;
}

/// Time-average variance constant for S_n(r) computed from an exact discrete
/// solution: sigma^2 = sum_x pi(x) [ (P g^2)(x) - ((P g)(x))^2 ]. Invariant
/// to additive shifts of g; derived from g, not read off any closed form.
inline double tav_constant(const MonotoneKernel& k, const PoissonSolution& sol,
                           const RewardFunction& r, const Tolerances& tol = {}) {
    (void)r;
    const auto& P = k.matrix();
    const int n = k.n_states();
    const Eigen::VectorXd pi = stationary_distribution(k, tol);
    Eigen::VectorXd gv(n);
    for (int i = 0; i < n; ++i) gv(i) = sol.g[static_cast<std::size_t>(i)];
    const Eigen::VectorXd pg = P * gv;
    const Eigen::VectorXd pg2 = P * gv.cwiseProduct(gv);
    double sigma2 = 0.0;
    for (int i = 0; i < n; ++i) sigma2 += pi(i) * (pg2(i) - pg(i) * pg(i));
    return std::max(sigma2, 0.0);
}

}  // namespace poismc
