#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poismc/coupling.hpp"
#include "poismc/kernel.hpp"
#include "poismc/rng.hpp"
#include "poismc/solution.hpp"

namespace poismc {

/// Inputs for the contractive route: the working contraction factor rho
/// (callers conservatively use rho_hat + 3 se), the reward's Lipschitz root
/// constant, and the largest root one-step second moment
/// max_x E^{1/2}|X_1 - x|^2 over the states of interest.
struct ContractiveParams {
    double rho = 0.0;
    double c_root = 0.0;
    double second_moment_root = 0.0;

    double lipschitz_bound() const { return c_root / (1.0 - std::sqrt(rho)); }
};

struct ContractionEstimate {
    struct PairEstimate {
        double x = 0.0, y = 0.0;
        double ratio = 0.0;  // MC mean of |F^{-1}(x,U)-F^{-1}(y,U)|^2 / |x-y|^2
        double se = 0.0;
    };
    double rho_hat = 0.0;  // worst pair ratio
    double se = 0.0;       // standard error of the worst pair
    std::vector<PairEstimate> pairs;
};

/// Monte Carlo estimate of the average-contraction factor: for each pair the
/// same uniform drives both states (that is the defining coupling), and the
/// reported rho_hat is the maximum pair ratio.
inline ContractionEstimate estimate_contraction_factor(
    const MonotoneKernel& k, std::span<const std::pair<double, double>> pairs, long n_samples,
    UniformStream& stream) {
    if (pairs.empty()) throw InvalidArgument("estimate_contraction_factor: no pairs");
    if (n_samples < 1000) {
        throw InvalidArgument("estimate_contraction_factor: need at least 1000 samples");
    }
    ContractionEstimate est;
    for (const auto& [x, y] : pairs) {
        if (x == y) throw InvalidArgument("estimate_contraction_factor: pair with x == y");
        const double denom = (x - y) * (x - y);
        double sum = 0.0, sum2 = 0.0;
        for (long i = 0; i < n_samples; ++i) {
            const double u = stream.next();
            const double d = k.inverse_cdf(x, u) - k.inverse_cdf(y, u);
            const double v = d * d / denom;
            sum += v;
            sum2 += v * v;
        }
        ContractionEstimate::PairEstimate pe;
        pe.x = x;
        pe.y = y;
        pe.ratio = sum / static_cast<double>(n_samples);
        const double var =
            std::max(0.0, (sum2 / static_cast<double>(n_samples) - pe.ratio * pe.ratio));
        pe.se = std::sqrt(var / static_cast<double>(n_samples));
        est.pairs.push_back(pe);
        if (pe.ratio > est.rho_hat) {
            est.rho_hat = pe.ratio;
            est.se = pe.se;
        }
    }
    if (est.rho_hat + 3.0 * est.se >= 1.0) {
        throw NotContractive("estimate_contraction_factor: rho_hat + 3 se >= 1");
    }
    return est;
}

/// MC estimate of max_x E^{1/2}|X_1 - x|^2 over the given states.
inline double estimate_second_moment_root(const MonotoneKernel& k, std::span<const double> xs,
                                          long n_samples, UniformStream& stream) {
    double worst = 0.0;
    for (double x : xs) {
        double sum = 0.0;
        for (long i = 0; i < n_samples; ++i) {
            const double d = k.inverse_cdf(x, stream.next()) - x;
            sum += d * d;
        }
        worst = std::max(worst, sum / static_cast<double>(n_samples));
    }
    return std::sqrt(worst);
}

/// Number of terms J such that the geometric tail bound
/// c_root * sum_{j>J} rho^{j/2} * second_moment_root <= tol.
inline int series_truncation_length(const ContractiveParams& p, double tol,
                                    int term_cap = 1000000) {
    if (tol <= 0.0) throw InvalidArgument("series_truncation_length: tol must be positive");
    if (p.rho >= 1.0 || p.rho < 0.0) {
        throw NotContractive("series_truncation_length: rho must lie in [0,1)");
    }
    const double root = std::sqrt(p.rho);
    const double scale = p.c_root * p.second_moment_root;
    if (scale == 0.0 || root == 0.0) return 0;
    // tail(J) = scale * root^{J+1} / (1 - root)
    int j = 0;
    double tail = scale * root / (1.0 - root);
    while (tail > tol) {
        tail *= root;
        if (++j > term_cap) {
            throw SeriesBudgetExceeded("series_truncation_length: tolerance unreachable");
        }
    }
    return j;
}

/// Truncated-series solution for contractive chains:
/// g(x) = sum_{j=0}^{J} [E_x r(X_j) - pi_r], with term expectations estimated
/// by common-random-number forward paths across all states (one substream per
/// replication) and pi_r taken from long backward iterations. The backward
/// horizon is stretched so that the pi_r bias, multiplied through the J+1
/// centered terms, stays within tol.
inline PoissonSolution solve_contractive(const MonotoneKernel& k, const RewardFunction& r,
                                         const ContractiveParams& params,
                                         std::span<const double> xs, double tol,
                                         UniformStream& stream, long n_reps = 20000,
                                         long n_pi_samples = 100000,
                                         std::optional<int> truncation_override = std::nullopt) {
    if (params.rho >= 1.0) throw NotContractive("solve_contractive: rho >= 1");
    if (!r.lipschitz_root) {
        throw InvalidArgument("solve_contractive: reward needs a lipschitz_root constant");
    }
    if (xs.empty()) throw InvalidArgument("solve_contractive: need at least one state");
    if (n_reps < 2 || n_pi_samples < 2) {
        throw InvalidArgument("solve_contractive: sample sizes too small");
    }

    const int series_len = truncation_override.value_or(series_truncation_length(params, tol));

    // Backward horizon for pi_r: bias * (J+1) must stay within tol.
    int pi_horizon = series_len;
    {
        const double root = std::sqrt(params.rho);
        const double scale = params.c_root * params.second_moment_root;
        if (root > 0.0 && scale > 0.0) {
            const double target = tol / static_cast<double>(series_len + 2);
            double bias = scale * std::pow(root, pi_horizon) / (1.0 - root);
            while (bias > target && pi_horizon < 1000000) {
                bias *= root;
                ++pi_horizon;
            }
        }
    }

    const std::size_t n_states = xs.size();
    std::vector<double> sum_y(n_states, 0.0), sum_y2(n_states, 0.0);
    std::vector<double> sum_dy(n_states, 0.0), sum_dy2(n_states, 0.0);  // adjacent diffs

    std::vector<double> path_sum(n_states);
    for (long rep = 0; rep < n_reps; ++rep) {
        UniformStream sub = stream.substream(static_cast<std::uint64_t>(rep));
        for (std::size_t i = 0; i < n_states; ++i) {
            double state = xs[i];
            double acc = r.eval(state);
            for (int j = 1; j <= series_len; ++j) {
                state = k.inverse_cdf(state, sub.at(static_cast<std::uint64_t>(j - 1)));
                acc += r.eval(state);
            }
            path_sum[i] = acc;
        }
        for (std::size_t i = 0; i < n_states; ++i) {
            sum_y[i] += path_sum[i];
            sum_y2[i] += path_sum[i] * path_sum[i];
            if (i + 1 < n_states) {
                const double d = path_sum[i + 1] - path_sum[i];
                sum_dy[i] += d;
                sum_dy2[i] += d * d;
            }
        }
    }

    // pi_r from backward iterations at the stretched horizon.
    double pi_sum = 0.0, pi_sum2 = 0.0;
    const double x_ref = xs.front();
    for (long s = 0; s < n_pi_samples; ++s) {
        UniformStream sub = stream.substream(0x9e00000000ull + static_cast<std::uint64_t>(s));
        double state = x_ref;
        for (int j = pi_horizon; j >= 1; --j) {
            state = k.inverse_cdf(state, sub.at(static_cast<std::uint64_t>(j - 1)));
        }
        const double v = r.eval(state);
        pi_sum += v;
        pi_sum2 += v * v;
    }
    const double pi_hat = pi_sum / static_cast<double>(n_pi_samples);
    const double pi_var = std::max(
        0.0, pi_sum2 / static_cast<double>(n_pi_samples) - pi_hat * pi_hat);
    const double pi_se = std::sqrt(pi_var / static_cast<double>(n_pi_samples));

    PoissonSolution sol;
    sol.grid.assign(xs.begin(), xs.end());
    sol.method = SolveMethod::series;
    sol.normalization = Normalization::series;
    sol.pi_r = pi_hat;

    const double reps = static_cast<double>(n_reps);
    const double terms = static_cast<double>(series_len + 1);
    for (std::size_t i = 0; i < n_states; ++i) {
        const double mean = sum_y[i] / reps;
        const double var = std::max(0.0, sum_y2[i] / reps - mean * mean);
        const double se_y = std::sqrt(var / reps);
        sol.g.push_back(mean - terms * pi_hat);
        sol.ci_halfwidth.push_back(3.0 * std::hypot(se_y, terms * pi_se));
    }
    for (std::size_t i = 0; i + 1 < n_states; ++i) {
        const double mean = sum_dy[i] / reps;
        const double var = std::max(0.0, sum_dy2[i] / reps - mean * mean);
        sol.adjacent_diff_ci.push_back(3.0 * std::sqrt(var / reps));
    }
    return sol;
}

struct LipschitzCertificate {
    double max_ratio = 0.0;  // worst adjacent |dg| / dx net of statistical slack
    double bound = 0.0;      // c_root / (1 - sqrt(rho))
    double worst_x = 0.0;
    bool certified = false;
};

/// Certifies the adjacent-difference ratios of g against the contractive
/// Lipschitz bound, allowing the recorded statistical slack on differences.
inline LipschitzCertificate certify_lipschitz(const PoissonSolution& sol,
                                              const ContractiveParams& params) {
    if (sol.grid.size() < 3) throw InvalidArgument("certify_lipschitz: need >= 3 grid points");
    LipschitzCertificate cert;
    cert.bound = params.lipschitz_bound();
    for (std::size_t i = 0; i + 1 < sol.grid.size(); ++i) {
        const double dx = sol.grid[i + 1] - sol.grid[i];
        if (dx <= 0.0) throw InvalidArgument("certify_lipschitz: grid must be increasing");
        const double slack = sol.adjacent_diff_ci.empty() ? 0.0 : sol.adjacent_diff_ci[i];
        const double ratio =
            std::max(0.0, std::abs(sol.g[i + 1] - sol.g[i]) - slack) / dx;
        if (ratio > cert.max_ratio) {
            cert.max_ratio = ratio;
            cert.worst_x = sol.grid[i];
        }
    }
    if (cert.max_ratio > cert.bound) {
        throw CertificationFailed("certify_lipschitz: ratio " + std::to_string(cert.max_ratio) +
                                  " exceeds bound " + std::to_string(cert.bound) + " near x=" +
                                  std::to_string(cert.worst_x));
    }
    cert.certified = true;
    return cert;
}

}  // namespace poismc
