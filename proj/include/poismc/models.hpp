#pragma once

#include <cmath>
#include <string>

#include "poismc/kernel.hpp"
#include "poismc/normal.hpp"

namespace poismc {

// ---------------------------------------------------------------------------
// Queueing waiting-time chain: W_{n+1} = [W_n + Z_{n+1}]^+ with
// Z = service - interarrival, service ~ Exp(mu), interarrival ~ Exp(lambda).
// All transition quantities are available in closed form.
// ---------------------------------------------------------------------------

namespace detail {

/// CDF of Z = Exp(mu) - Exp(lambda) (independent).
inline double exp_difference_cdf(double z, double lambda, double mu) {
    if (z <= 0.0) return (mu / (mu + lambda)) * std::exp(lambda * z);
    return 1.0 - (lambda / (mu + lambda)) * std::exp(-mu * z);
}

/// Density of Z = Exp(mu) - Exp(lambda).
inline double exp_difference_density(double z, double lambda, double mu) {
    const double c = lambda * mu / (lambda + mu);
    return (z >= 0.0) ? c * std::exp(-mu * z) : c * std::exp(lambda * z);
}

}  // namespace detail

/// M/M/1 FIFO waiting-time kernel on R+. Requires lambda < mu.
inline MonotoneKernel build_lindley(double lambda, double mu) {
    if (lambda <= 0.0 || mu <= 0.0) {
        throw InvalidArgument("build_lindley: rates must be positive");
    }
    if (lambda >= mu) {
        throw UnstableModel("build_lindley: requires lambda < mu for stability");
    }

    auto cdf = [lambda, mu](double x, double y) {
        if (y < 0.0) return 0.0;
        return detail::exp_difference_cdf(y - x, lambda, mu);
    };
    // inf{y >= 0 : F(x,y) >= u}, split by which branch of the Z-CDF applies.
    auto inverse = [lambda, mu](double x, double u) {
        const double atom = (mu / (mu + lambda)) * std::exp(-lambda * x);
        if (u <= atom) return 0.0;
        const double mid = mu / (mu + lambda);  // F at y = x
        if (u <= mid) return x + std::log(u * (mu + lambda) / mu) / lambda;
        return x - std::log((1.0 - u) * (mu + lambda) / lambda) / mu;
    };
    TransitionDensity dens{
        [lambda, mu](double x) { return (mu / (mu + lambda)) * std::exp(-lambda * x); },
        [lambda, mu](double x, double y) {
            return detail::exp_difference_density(y - x, lambda, mu);
        }};

    // Support hint: stationary wait is Exp(mu - lambda) sized; 40 mean waits
    // covers the mass that grid-based checks care about.
    const double hint = 40.0 / (mu - lambda);
    return MonotoneKernel::continuous(cdf, inverse, /*declared_monotone=*/true,
                                      "lindley(" + std::to_string(lambda) + "," +
                                          std::to_string(mu) + ")",
                                      hint, dens);
}

/// Discrete Lindley chain on {0..N}: W_{n+1} = clamp([W_n + Z]^+, N) with
/// two-point increments Z = +up w.p. p, -down w.p. 1-p. Overflow above the
/// truncation level is folded into state N (a monotone fold).
inline MonotoneKernel build_lindley_discrete(double p, int up, int down, int truncation) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("build_lindley_discrete: p in (0,1)");
    if (up < 1 || down < 1) throw InvalidArgument("build_lindley_discrete: jumps must be >= 1");
    if (truncation < up + 1) {
        throw InvalidArgument("build_lindley_discrete: truncation too small");
    }
    const int n = truncation + 1;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const int hi = std::min(i + up, truncation);
        const int lo = std::max(i - down, 0);
        P(i, hi) += p;
        P(i, lo) += 1.0 - p;
    }
    auto k = MonotoneKernel::discrete(std::move(P), /*declared_monotone=*/true,
                                      "lindley_discrete(p=" + std::to_string(p) + ")");
    // Clamped two-point jumps are order-preserving; certify anyway so the
    // declaration is never taken on faith.
    const auto mono = check_stochastic_monotonicity(k, k.default_grid());
    if (!mono.monotone) {
        throw CertificationFailed("build_lindley_discrete: constructed kernel fails the "
                                  "monotonicity check");
    }
    if (p * up >= (1.0 - p) * down) {
        k.add_warning("mean increment is non-negative; truncation error may be heavy");
    }
    return k;
}

/// Birth-death chain on {0..N}: up w.p. p, down w.p. 1-p, reflecting at 0 and
/// folded at N. Positive recurrence of the untruncated chain needs p < 1/2;
/// p >= 1/2 is built with a warning rather than rejected.
inline MonotoneKernel build_birth_death(double p, int truncation) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("build_birth_death: p in (0,1)");
    if (truncation < 2) throw InvalidArgument("build_birth_death: truncation >= 2");
    auto k = build_lindley_discrete(p, 1, 1, truncation);
    // Rebuild the name; the dynamics coincide with unit-jump discrete Lindley.
    auto named = MonotoneKernel::discrete(k.matrix(), true,
                                          "birth_death(p=" + std::to_string(p) +
                                              ",N=" + std::to_string(truncation) + ")");
    if (p >= 0.5) {
        named.add_warning("p >= 1/2: untruncated chain is not positive recurrent");
    }
    return named;
}

/// Reflected AR(1): X_{n+1} = (a X_n + Z)^+ with Z ~ Normal(mean, sd^2).
/// Contractive on average with factor a^2 away from the reflecting boundary.
inline MonotoneKernel build_reflected_ar1(double a, double noise_mean, double noise_sd) {
    if (a < 0.0) throw InvalidArgument("build_reflected_ar1: a must be >= 0");
    if (a >= 1.0) throw NotContractive("build_reflected_ar1: requires a < 1");
    if (noise_sd <= 0.0) throw InvalidArgument("build_reflected_ar1: sd must be positive");

    auto cdf = [a, noise_mean, noise_sd](double x, double y) {
        if (y < 0.0) return 0.0;
        return normal_cdf((y - a * x - noise_mean) / noise_sd);
    };
    auto inverse = [a, noise_mean, noise_sd](double x, double u) {
        return std::max(0.0, a * x + noise_mean + noise_sd * normal_quantile(u));
    };
    TransitionDensity dens{
        [a, noise_mean, noise_sd](double x) {
            return normal_cdf((0.0 - a * x - noise_mean) / noise_sd);
        },
        [a, noise_mean, noise_sd](double x, double y) {
            return normal_pdf((y - a * x - noise_mean) / noise_sd) / noise_sd;
        }};

    const double hint = (std::abs(noise_mean) + 6.0 * noise_sd) / (1.0 - a) + 1.0;
    return MonotoneKernel::continuous(cdf, inverse, /*declared_monotone=*/true,
                                      "reflected_ar1(a=" + std::to_string(a) + ")", hint,
                                      dens);
}

/// Two-state or general explicit-matrix kernel (used by the config front end).
inline MonotoneKernel build_matrix_kernel(Eigen::MatrixXd P, bool declared_monotone) {
    return MonotoneKernel::discrete(std::move(P), declared_monotone, "matrix");
}

// --------------------------- reward constructors ---------------------------

inline RewardFunction reward_identity() {
    return {[](double x) { return x; }, true, 1.0, true, "identity"};
}

inline RewardFunction reward_constant(double c) {
    return {[c](double) { return c; }, true, 0.0, true, "constant"};
}

inline RewardFunction reward_affine(double scale, double offset) {
    return {[scale, offset](double x) { return scale * x + offset; },
            scale >= 0.0, std::abs(scale), true, "affine"};
}

/// x^k on R+; monotone, not globally Lipschitz for k >= 2.
inline RewardFunction reward_power(int k) {
    if (k < 1) throw InvalidArgument("reward_power: exponent >= 1");
    RewardFunction r;
    r.eval = [k](double x) { return std::pow(x, k); };
    r.monotone = true;
    if (k == 1) r.lipschitz_root = 1.0;
    r.name = "power(" + std::to_string(k) + ")";
    return r;
}

/// Step reward 1{x >= threshold}; monotone but discontinuous.
inline RewardFunction reward_indicator(double threshold) {
    RewardFunction r;
    r.eval = [threshold](double x) { return x >= threshold ? 1.0 : 0.0; };
    r.monotone = true;
    r.continuous = false;
    r.name = "indicator(" + std::to_string(threshold) + ")";
    return r;
}

/// min(x, cap); monotone and 1-Lipschitz.
inline RewardFunction reward_capped(double cap) {
    RewardFunction r;
    r.eval = [cap](double x) { return std::min(x, cap); };
    r.monotone = true;
    r.lipschitz_root = 1.0;
    r.name = "capped(" + std::to_string(cap) + ")";
    return r;
}

}  // namespace poismc
