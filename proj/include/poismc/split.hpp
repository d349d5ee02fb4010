#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poismc/kernel.hpp"
#include "poismc/rng.hpp"
#include "poismc/solution.hpp"

namespace poismc {

/// A probability law on the state space used as the regeneration measure:
/// an atom at 0 plus a density (continuous case) or a full PMF (discrete
/// case). `mass_at` is the density / PMF value used for change-of-measure
/// weights.
struct SplitMeasure {
    double atom0 = 0.0;
    std::function<double(double)> mass_at;
    std::function<double(double)> cdf;
    std::function<double(double)> quantile;  // u in (0,1)
    bool discrete = false;
};

/// Small-set split data: transitions from x <= b decompose as
/// lambda * phi + (1 - lambda) * Q(x, .). The drift pair (v1, v2) controls
/// cycle-length and cycle-reward integrability and is verified, never
/// discovered, by verify_assumption1.
struct SplitConfig {
    double b = 1.0;
    double lambda = 0.5;  // in (0,1]; 1 means every small-set step regenerates
    SplitMeasure phi;
    std::function<double(double)> v1;
    std::function<double(double)> v2;
    long cycle_cap = 10'000'000;
};

/// One split-chain cycle: the path X_0..X_{tau-1}, its length tau, reward
/// accumulations, and the count of small-set visits. The post-regeneration
/// state (distributed as phi) is kept so consecutive cycles can be chained.
struct RegenerationCycle {
    std::vector<double> path;
    long tau = 0;
    double reward_sum = 0.0;
    bool abs_centered_available = true;  // path retained; centered sums on demand
    long small_set_visits = 0;
    double regen_state = 0.0;

    double centered_sum(double pi_r) const {
        return reward_sum - static_cast<double>(tau) * pi_r;
    }
    double abs_centered_sum(const std::function<double(double)>& r, double pi_r) const {
        double s = 0.0;
        for (double x : path) s += std::abs(r(x) - pi_r);
        return s;
    }
};

/// Jointly simulated split-chain cycle from ordered starts x <= y, sharing
/// uniforms so the pathwise order is preserved. tau is the upper path's
/// regeneration time; the lower path may flag an earlier regeneration time.
struct CoupledCycle {
    std::vector<double> lower_path;
    std::vector<double> upper_path;
    long tau = 0;
    std::optional<long> tau_lower_early;
    bool order_held = true;
    double regen_state = 0.0;
};

// ---------------------------------------------------------------------------
// Shipped split constructions.
// ---------------------------------------------------------------------------

/// Maximal small-set split for the M/M/1 waiting-time kernel on [0,b]: phi is
/// the normalized infimum of the one-step laws over x in [0,b], available in
/// closed form; the full minorization mass is exp(-mu*lambda_arr*b/(mu+lambda_arr)).
/// Any lambda at or below that mass yields a valid split with the same phi.
inline SplitMeasure mm1_minorization_measure(double lambda_arr, double mu, double b,
                                             double* lambda_max_out = nullptr) {
    if (lambda_arr <= 0.0 || mu <= 0.0 || b <= 0.0) {
        throw InvalidArgument("mm1_minorization_measure: positive parameters required");
    }
    const double c = lambda_arr * mu / (lambda_arr + mu);
    const double y_star = lambda_arr * b / (mu + lambda_arr);
    const double atom = (mu / (mu + lambda_arr)) * std::exp(-lambda_arr * b);

    // Unnormalized measure: atom at 0 plus the pointwise-minimum density.
    auto raw_density = [=](double y) {
        if (y <= 0.0) return 0.0;
        return (y < y_star) ? c * std::exp(-lambda_arr * (b - y)) : c * std::exp(-mu * y);
    };
    auto raw_cdf = [=](double y) {
        if (y < 0.0) return 0.0;
        if (y <= y_star) {
            return atom + (c / lambda_arr) *
                              (std::exp(-lambda_arr * (b - y)) - std::exp(-lambda_arr * b));
        }
        const double at_star = (mu / (mu + lambda_arr)) * std::exp(-mu * y_star);
        return at_star + (c / mu) * (std::exp(-mu * y_star) - std::exp(-mu * y));
    };
    const double lambda_max = std::exp(-mu * y_star);
    if (lambda_max_out) *lambda_max_out = lambda_max;

    SplitMeasure phi;
    phi.atom0 = atom / lambda_max;
    phi.mass_at = [=](double y) { return raw_density(y) / lambda_max; };
    phi.cdf = [=](double y) { return std::min(raw_cdf(y) / lambda_max, 1.0); };
    phi.quantile = [=](double u) {
        if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("quantile: u in (0,1)");
        const double m = u * lambda_max;
        if (m <= atom) return 0.0;
        const double at_star = (mu / (mu + lambda_arr)) * std::exp(-mu * y_star);
        if (m <= at_star) {
            const double e = (m - atom) * lambda_arr / c + std::exp(-lambda_arr * b);
            return b + std::log(e) / lambda_arr;
        }
        const double e = std::exp(-mu * y_star) - (m - at_star) * mu / c;
        return -std::log(e) / mu;
    };
    phi.discrete = false;
    return phi;
}

/// Maximal split of a discrete kernel over the small set {0..b}: the
/// regeneration PMF is the column-wise minimum of the first b+1 rows,
/// normalized; lambda_max is its total mass.
inline SplitMeasure discrete_minorization_measure(const MonotoneKernel& k, int b,
                                                  double* lambda_max_out = nullptr) {
    const auto& P = k.matrix();
    const int n = k.n_states();
    if (b < 0 || b >= n) throw InvalidArgument("discrete_minorization_measure: bad b");

    Eigen::VectorXd nu(n);
    for (int j = 0; j < n; ++j) {
        double m = P(0, j);
        for (int x = 1; x <= b; ++x) m = std::min(m, P(x, j));
        nu(j) = m;
    }
    const double lambda_max = nu.sum();
    if (lambda_max <= 0.0) {
        throw MinorizationUnsupported("discrete_minorization_measure: empty common component");
    }
    if (lambda_max_out) *lambda_max_out = lambda_max;

    auto pmf = std::make_shared<std::vector<double>>(n);
    auto cum = std::make_shared<std::vector<double>>(n);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        (*pmf)[static_cast<std::size_t>(j)] = nu(j) / lambda_max;
        acc += (*pmf)[static_cast<std::size_t>(j)];
        (*cum)[static_cast<std::size_t>(j)] = acc;
    }

    SplitMeasure phi;
    phi.discrete = true;
    phi.atom0 = (*pmf)[0];
    phi.mass_at = [pmf, n](double y) {
        const int j = static_cast<int>(std::llround(y));
        if (j < 0 || j >= n) return 0.0;
        return (*pmf)[static_cast<std::size_t>(j)];
    };
    phi.cdf = [cum, n](double y) {
        if (y < 0.0) return 0.0;
        const int j = std::min(static_cast<int>(std::floor(y + 1e-9)), n - 1);
        return (*cum)[static_cast<std::size_t>(j)];
    };
    phi.quantile = [cum](double u) {
        if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("quantile: u in (0,1)");
        const auto it = std::lower_bound(cum->begin(), cum->end(), u);
        if (it == cum->end()) return static_cast<double>(cum->size() - 1);
        return static_cast<double>(it - cum->begin());
    };
    return phi;
}

// ---------------------------------------------------------------------------
// Split-step driver.
// ---------------------------------------------------------------------------

namespace detail {

class SplitDriver {
public:
    SplitDriver(const SplitConfig& cfg, const MonotoneKernel& k) : cfg_(cfg), k_(k) {
        if (!(cfg.lambda > 0.0 && cfg.lambda <= 1.0)) {
            throw InvalidArgument("split config: lambda must lie in (0,1]");
        }
        if (cfg.b < 0.0) throw InvalidArgument("split config: b must be >= 0");
        if (k.is_discrete() && cfg.lambda < 1.0) build_residual_rows();
    }

    bool in_small_set(double x) const { return x <= cfg_.b + 1e-12; }

    double sample_phi(UniformStream& s) const { return cfg_.phi.quantile(s.next()); }

    /// Residual CDF G(x, w) = (F(x,w) - lambda Phi(w)) / (1 - lambda), x <= b.
    double residual_cdf(double x, double w) const {
        return (k_.cdf(x, w) - cfg_.lambda * cfg_.phi.cdf(w)) / (1.0 - cfg_.lambda);
    }

    /// inf{w : G(x,w) >= u}, by bisection (discrete rows are precomputed).
    double residual_inverse(double x, double u) const {
        if (cfg_.lambda >= 1.0) {
            throw MinorizationViolated("residual_inverse: lambda = 1 leaves no residual kernel");
        }
        if (k_.is_discrete()) {
            const auto row = static_cast<std::size_t>(k_.state_index(x));
            if (row >= residual_cum_.size()) {
                throw InvalidArgument("residual_inverse: state outside small set");
            }
            const auto& cum = residual_cum_[row];
            const auto it = std::lower_bound(cum.begin(), cum.end(), u);
            if (it == cum.end()) return static_cast<double>(cum.size() - 1);
            return static_cast<double>(it - cum.begin());
        }
        if (residual_cdf(x, 0.0) < -1e-9) {
            throw MinorizationViolated("residual kernel negative at 0 for x=" +
                                       std::to_string(x));
        }
        if (residual_cdf(x, 0.0) >= u) return 0.0;
        double lo = 0.0;
        double hi = std::max(cfg_.b, x) + 1.0;
        int guard = 0;
        while (residual_cdf(x, hi) < u) {
            hi = hi * 2.0 + 1.0;
            if (++guard > 200) {
                throw MinorizationViolated("residual kernel does not reach mass 1");
            }
        }
        while (hi - lo > 1e-12) {
            const double mid = 0.5 * (lo + hi);
            if (residual_cdf(x, mid) >= u) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return hi;
    }

    /// One split transition. Returns (next state, regenerated flag).
    std::pair<double, bool> step(double x, UniformStream& s) const {
        if (in_small_set(x)) {
            const double coin = s.next();
            if (coin <= cfg_.lambda) {
                return {sample_phi(s), true};
            }
            return {residual_inverse(x, s.next()), false};
        }
        return {k_.inverse_cdf(x, s.next()), false};
    }

    Eigen::VectorXd residual_row(double x) const {
        if (!k_.is_discrete()) throw InvalidArgument("residual_row: discrete kernels only");
        const auto row = static_cast<std::size_t>(k_.state_index(x));
        if (row >= residual_pmf_.size()) {
            throw InvalidArgument("residual_row: state outside small set");
        }
        const auto& pmf = residual_pmf_[row];
        Eigen::VectorXd out(static_cast<Eigen::Index>(pmf.size()));
        for (std::size_t j = 0; j < pmf.size(); ++j) {
            out(static_cast<Eigen::Index>(j)) = pmf[j];
        }
        return out;
    }

private:
    void build_residual_rows() {
        const auto& P = k_.matrix();
        const int n = k_.n_states();
        const int top = std::min(static_cast<int>(std::floor(cfg_.b + 1e-9)), n - 1);
        residual_pmf_.resize(static_cast<std::size_t>(top) + 1);
        residual_cum_.resize(static_cast<std::size_t>(top) + 1);
        for (int x = 0; x <= top; ++x) {
            auto& pmf = residual_pmf_[static_cast<std::size_t>(x)];
            auto& cum = residual_cum_[static_cast<std::size_t>(x)];
            pmf.resize(static_cast<std::size_t>(n));
            cum.resize(static_cast<std::size_t>(n));
            double total = 0.0;
            for (int j = 0; j < n; ++j) {
                double q = (P(x, j) - cfg_.lambda * cfg_.phi.mass_at(j)) / (1.0 - cfg_.lambda);
                if (q < -1e-10) {
                    throw MinorizationViolated("residual kernel negative at (" +
                                               std::to_string(x) + "," + std::to_string(j) +
                                               ")");
                }
                q = std::max(q, 0.0);
                pmf[static_cast<std::size_t>(j)] = q;
                total += q;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw MinorizationViolated("residual row mass " + std::to_string(total) +
                                           " at x=" + std::to_string(x));
            }
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                pmf[static_cast<std::size_t>(j)] /= total;
                acc += pmf[static_cast<std::size_t>(j)];
                cum[static_cast<std::size_t>(j)] = acc;
            }
        }
    }

    const SplitConfig& cfg_;
    const MonotoneKernel& k_;
    std::vector<std::vector<double>> residual_pmf_;
    std::vector<std::vector<double>> residual_cum_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations.
// ---------------------------------------------------------------------------

/// One split transition from x: regeneration (sampling phi) with probability
/// lambda on the small set, otherwise a residual-kernel step.
inline std::pair<double, bool> split_step(const SplitConfig& cfg, const MonotoneKernel& k,
                                          double x, UniformStream& stream) {
    return detail::SplitDriver(cfg, k).step(x, stream);
}

/// Runs split transitions until the first regeneration. The cycle holds
/// X_0..X_{tau-1}; the freshly drawn phi-state is kept separately so callers
/// can chain cycles.
inline RegenerationCycle simulate_cycle(const SplitConfig& cfg, const MonotoneKernel& k,
                                        const RewardFunction& r, std::optional<double> start,
                                        UniformStream& stream) {
    const detail::SplitDriver driver(cfg, k);
    RegenerationCycle cycle;
    double x = start ? *start : driver.sample_phi(stream);
    cycle.path.push_back(x);
    while (true) {
        if (static_cast<long>(cycle.path.size()) > cfg.cycle_cap) {
            throw CycleOverflow("simulate_cycle: exceeded cycle cap of " +
                                std::to_string(cfg.cycle_cap) + " steps");
        }
        const auto [next, regenerated] = driver.step(cycle.path.back(), stream);
        if (regenerated) {
            cycle.regen_state = next;
            break;
        }
        cycle.path.push_back(next);
    }
    cycle.tau = static_cast<long>(cycle.path.size());
    for (double s : cycle.path) {
        cycle.reward_sum += r.eval(s);
        if (driver.in_small_set(s)) ++cycle.small_set_visits;
    }
    return cycle;
}

struct RatioEstimate {
    double value = 0.0;
    double se = 0.0;
    long n_cycles = 0;
};

/// Ratio estimator pi_r = E_phi[cycle reward] / E_phi[cycle length] over
/// chained i.i.d. cycles started from phi, with a delta-method standard error.
inline RatioEstimate estimate_pi_r(const SplitConfig& cfg, const MonotoneKernel& k,
                                   const RewardFunction& r, long n_cycles,
                                   UniformStream& stream) {
    if (n_cycles < 30) throw InvalidArgument("estimate_pi_r: need at least 30 cycles");
    std::vector<double> rewards, lengths;
    rewards.reserve(static_cast<std::size_t>(n_cycles));
    lengths.reserve(static_cast<std::size_t>(n_cycles));

    std::optional<double> start;  // first cycle starts from phi
    for (long i = 0; i < n_cycles; ++i) {
        const auto cycle = simulate_cycle(cfg, k, r, start, stream);
        rewards.push_back(cycle.reward_sum);
        lengths.push_back(static_cast<double>(cycle.tau));
        start = cycle.regen_state;
    }

    const double sum_r = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    const double sum_t = std::accumulate(lengths.begin(), lengths.end(), 0.0);
    RatioEstimate est;
    est.n_cycles = n_cycles;
    est.value = sum_r / sum_t;
    const double mean_t = sum_t / static_cast<double>(n_cycles);
    double ss = 0.0;
    for (long i = 0; i < n_cycles; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const double d = rewards[idx] - est.value * lengths[idx];
        ss += d * d;
    }
    if (n_cycles > 1) {
        const double var = ss / static_cast<double>(n_cycles - 1);
        est.se = std::sqrt(var / static_cast<double>(n_cycles)) / mean_t;
    }
    return est;
}

/// Monte Carlo solution g~(x) = E_x sum_{j<tau} (r(X_j) - pi_r) over
/// independent cycles started at each requested state. Confidence half-widths
/// are 3 standard errors.
inline PoissonSolution estimate_g(const SplitConfig& cfg, const MonotoneKernel& k,
                                  const RewardFunction& r, double pi_r,
                                  std::span<const double> xs, long n_cycles,
                                  UniformStream& stream) {
    if (xs.empty()) throw InvalidArgument("estimate_g: need at least one state");
    if (n_cycles < 2) throw InvalidArgument("estimate_g: need at least 2 cycles");

    PoissonSolution sol;
    sol.grid.assign(xs.begin(), xs.end());
    sol.method = SolveMethod::monte_carlo;
    sol.normalization = Normalization::mean_zero;  // inherited from Eq-level centering
    sol.pi_r = pi_r;

    std::vector<double> ses;
    for (double x : xs) {
        std::vector<double> sums;
        sums.reserve(static_cast<std::size_t>(n_cycles));
        for (long i = 0; i < n_cycles; ++i) {
            const auto cycle = simulate_cycle(cfg, k, r, x, stream);
            sums.push_back(cycle.centered_sum(pi_r));
        }
        const double mean =
            std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(n_cycles);
        double ss = 0.0;
        for (double s : sums) ss += (s - mean) * (s - mean);
        const double se = std::sqrt(ss / static_cast<double>(n_cycles - 1) /
                                    static_cast<double>(n_cycles));
        sol.g.push_back(mean);
        sol.ci_halfwidth.push_back(3.0 * se);
        ses.push_back(se);
    }
    for (std::size_t i = 0; i + 1 < ses.size(); ++i) {
        sol.adjacent_diff_ci.push_back(3.0 * std::hypot(ses[i], ses[i + 1]));
    }
    return sol;
}

/// Overload that first estimates pi_r from phi-started cycles.
inline PoissonSolution estimate_g(const SplitConfig& cfg, const MonotoneKernel& k,
                                  const RewardFunction& r, std::span<const double> xs,
                                  long n_cycles, UniformStream& stream) {
    const auto pi_hat = estimate_pi_r(cfg, k, r, n_cycles, stream);
    return estimate_g(cfg, k, r, pi_hat.value, xs, n_cycles, stream);
}

/// Retrospective regeneration weight w(x, next) = lambda * (dphi/dP_x)(next)
/// for x in the small set, clamped to [0,1]. A clamp beyond rounding noise
/// indicates an inconsistent (lambda, phi) pair.
inline double rn_weight(const SplitConfig& cfg, const MonotoneKernel& k, double x, double next,
                        bool* clamped = nullptr) {
    if (clamped) *clamped = false;
    if (!(x <= cfg.b + 1e-12)) throw InvalidArgument("rn_weight: x must lie in the small set");

    double phi_mass, kernel_mass;
    if (k.is_discrete()) {
        const auto row = k.state_index(x);
        const auto col = k.state_index(next);
        phi_mass = cfg.phi.mass_at(next);
        kernel_mass = k.matrix()(row, col);
    } else {
        if (!k.density()) {
            throw InvalidArgument("rn_weight: kernel lacks transition density information");
        }
        if (next <= 0.0) {
            phi_mass = cfg.phi.atom0;
            kernel_mass = k.density()->atom_at_zero(x);
        } else {
            phi_mass = cfg.phi.mass_at(next);
            kernel_mass = k.density()->density(x, next);
        }
    }
    if (phi_mass <= 0.0) return 0.0;
    if (kernel_mass <= 0.0) {
        throw MinorizationUnsupported("rn_weight: phi has mass where the kernel does not");
    }
    double w = cfg.lambda * phi_mass / kernel_mass;
    if (w > 1.0) {
        if (w > 1.0 + 1e-9 && clamped) *clamped = true;
        w = 1.0;
    }
    return std::max(w, 0.0);
}

/// Coupled split-chain cycle from x <= y. Three regimes per step: both in the
/// small set (shared regeneration coin, residual-kernel steps otherwise),
/// lower only (full-kernel shared step with a retrospective regeneration flag
/// for the lower path), neither (full-kernel shared step). Ends when the
/// upper path regenerates; both paths then share the fresh phi-state.
inline CoupledCycle simulate_coupled_cycle(const SplitConfig& cfg, const MonotoneKernel& k,
                                           double x, double y, UniformStream& stream) {
    if (x > y) throw InvalidArgument("simulate_coupled_cycle: requires x <= y");
    const detail::SplitDriver driver(cfg, k);

    CoupledCycle c;
    c.lower_path.push_back(x);
    c.upper_path.push_back(y);
    bool lower_flagged = false;

    while (true) {
        if (static_cast<long>(c.upper_path.size()) > cfg.cycle_cap) {
            throw CycleOverflow("simulate_coupled_cycle: exceeded cycle cap");
        }
        const double lo = c.lower_path.back();
        const double hi = c.upper_path.back();

        if (driver.in_small_set(hi)) {
            const double coin = stream.next();
            if (coin <= cfg.lambda) {
                c.regen_state = driver.sample_phi(stream);
                c.tau = static_cast<long>(c.upper_path.size());
                if (!lower_flagged) c.tau_lower_early = c.tau;
                break;
            }
            const double u = stream.next();
            const double lo2 = driver.residual_inverse(lo, u);
            const double hi2 = driver.residual_inverse(hi, u);
            if (lo2 > hi2) c.order_held = false;
            c.lower_path.push_back(lo2);
            c.upper_path.push_back(hi2);
        } else if (driver.in_small_set(lo)) {
            const double u = stream.next();
            const double lo2 = k.inverse_cdf(lo, u);
            const double hi2 = k.inverse_cdf(hi, u);
            if (!lower_flagged) {
                const double w = rn_weight(cfg, k, lo, lo2);
                if (stream.next() <= w) {
                    lower_flagged = true;
                    c.tau_lower_early = static_cast<long>(c.upper_path.size());
                }
            }
            if (lo2 > hi2) c.order_held = false;
            c.lower_path.push_back(lo2);
            c.upper_path.push_back(hi2);
        } else {
            const double u = stream.next();
            const double lo2 = k.inverse_cdf(lo, u);
            const double hi2 = k.inverse_cdf(hi, u);
            if (lo2 > hi2) c.order_held = false;
            c.lower_path.push_back(lo2);
            c.upper_path.push_back(hi2);
        }
    }
    return c;
}

struct ContinuityReport {
    struct Point {
        double delta = 0.0;
        double estimate = 0.0;  // estimate of g~(x+delta) - g~(x), >= 0
        double se = 0.0;
    };
    double x = 0.0;
    std::vector<Point> points;
};

/// Estimates g~(x+delta) - g~(x) for each delta through common-random-number
/// coupled cycles; the per-cycle difference sum needs no pi_r because the
/// centering cancels. Requires a continuous inverse CDF and a continuous r.
inline ContinuityReport continuity_probe(const SplitConfig& cfg, const MonotoneKernel& k,
                                         const RewardFunction& r, double x,
                                         std::span<const double> deltas, long n_cycles,
                                         UniformStream& stream) {
    if (!k.continuous_inverse()) {
        throw InvalidArgument("continuity_probe: kernel inverse is not continuous in x");
    }
    if (!r.continuous) {
        throw InvalidArgument("continuity_probe: reward must be continuous");
    }
    if (n_cycles < 2) throw InvalidArgument("continuity_probe: need at least 2 cycles");

    ContinuityReport rep;
    rep.x = x;
    for (double delta : deltas) {
        if (delta < 0.0) throw InvalidArgument("continuity_probe: deltas must be >= 0");
        ContinuityReport::Point pt;
        pt.delta = delta;
        if (delta == 0.0) {
            rep.points.push_back(pt);
            continue;
        }
        std::vector<double> diffs;
        diffs.reserve(static_cast<std::size_t>(n_cycles));
        for (long i = 0; i < n_cycles; ++i) {
            const auto cycle = simulate_coupled_cycle(cfg, k, x, x + delta, stream);
            double d = 0.0;
            for (long j = 0; j < cycle.tau; ++j) {
                const auto idx = static_cast<std::size_t>(j);
                d += r.eval(cycle.upper_path[idx]) - r.eval(cycle.lower_path[idx]);
            }
            diffs.push_back(d);
        }
        pt.estimate =
            std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(n_cycles);
        double ss = 0.0;
        for (double d : diffs) ss += (d - pt.estimate) * (d - pt.estimate);
        pt.se = std::sqrt(ss / static_cast<double>(n_cycles - 1) /
                          static_cast<double>(n_cycles));
        rep.points.push_back(pt);
    }
    return rep;
}

/// Residual CDF G(x, .) exposed for validation and tests.
inline double residual_kernel_cdf(const SplitConfig& cfg, const MonotoneKernel& k, double x,
                                  double w) {
    return detail::SplitDriver(cfg, k).residual_cdf(x, w);
}

// ---------------------------------------------------------------------------
// Assumption verification.
// ---------------------------------------------------------------------------

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double whole, double tol,
                               int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-11) {
    if (b <= a) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

struct ValueSe {
    double value = 0.0;
    double se = 0.0;
};

/// E_x f(X_1): exact sum (discrete), quadrature split at the integrand's
/// kinks (continuous with density), or plain Monte Carlo otherwise.
inline ValueSe expected_next(const MonotoneKernel& k, const std::function<double(double)>& f,
                             double x, std::uint64_t mc_seed = 0x5eedULL,
                             long mc_draws = 100000) {
    ValueSe out;
    if (k.is_discrete()) {
        const auto& P = k.matrix();
        const auto row = k.state_index(x);
        for (int j = 0; j < k.n_states(); ++j) {
            out.value += P(row, j) * f(static_cast<double>(j));
        }
        return out;
    }
    if (k.density()) {
        const auto& d = *k.density();
        out.value = d.atom_at_zero(x) * f(0.0);
        const double cut = k.inverse_cdf(x, 1.0 - 1e-13) + 5.0;
        auto integrand = [&](double y) { return d.density(x, y) * f(y); };
        // Split at x: one-step densities of drift-type kernels kink there.
        const double split_at = std::clamp(x, 0.0, cut);
        out.value += integrate(integrand, 0.0, split_at);
        out.value += integrate(integrand, split_at, cut);
        return out;
    }
    UniformStream s(mix64(mc_seed ^ mix64(static_cast<std::uint64_t>(x * 9973.0) + 17)));
    double sum = 0.0, sum2 = 0.0;
    for (long i = 0; i < mc_draws; ++i) {
        const double v = f(k.inverse_cdf(x, s.next()));
        sum += v;
        sum2 += v * v;
    }
    out.value = sum / static_cast<double>(mc_draws);
    const double var =
        std::max(0.0, sum2 / static_cast<double>(mc_draws) - out.value * out.value);
    out.se = std::sqrt(var / static_cast<double>(mc_draws));
    return out;
}

}  // namespace detail

struct AssumptionReport {
    struct Condition {
        std::string name;
        double statistic = 0.0;  // sup / min relevant to the condition
        double margin = 0.0;     // inequality surplus; >= 0 means satisfied
        double se = 0.0;
        bool pass = false;
        double worst_x = 0.0;
    };
    std::vector<Condition> conditions;
    bool pass = false;
};

/// Grid verification of the small-set split data: bounded drift moments on
/// [0,b], unit and reward drifts above b, the CDF-level minorization
/// F(x,.) >= lambda Phi(.), and validity of the residual CDF G. Margins are
/// inequality surpluses; a condition passes when margin >= 2 se (with a tiny
/// floating-point slack, since the inequalities are non-strict).
inline AssumptionReport verify_assumption1(const SplitConfig& cfg, const MonotoneKernel& k,
                                           const RewardFunction& r,
                                           std::span<const double> grid,
                                           std::uint64_t mc_seed = 0x5eedULL) {
    detail::require_sorted_grid(grid);
    if (!(cfg.lambda > 0.0 && cfg.lambda <= 1.0)) {
        throw InvalidArgument("verify_assumption1: lambda must lie in (0,1]");
    }
    if (cfg.b < 0.0) throw InvalidArgument("verify_assumption1: b must be >= 0");
    if (grid.front() > 1e-12 || grid.back() <= cfg.b) {
        throw InvalidArgument("verify_assumption1: grid must cover [0,b] and a tail segment");
    }
    if (!cfg.v1 || !cfg.v2) throw InvalidArgument("verify_assumption1: drift pair required");

    std::vector<double> small, tail;
    for (double x : grid) (x <= cfg.b + 1e-12 ? small : tail).push_back(x);
    if (small.empty() || tail.empty()) {
        throw InvalidArgument("verify_assumption1: grid must hit both [0,b] and (b,inf)");
    }

    // Absolute continuity of phi w.r.t. the one-step laws on the small set.
    for (double x : small) {
        if (k.is_discrete()) {
            const auto row = k.state_index(x);
            for (int j = 0; j < k.n_states(); ++j) {
                if (cfg.phi.mass_at(j) > 0.0 && k.matrix()(row, j) <= 0.0) {
                    throw MinorizationUnsupported(
                        "phi has mass at state " + std::to_string(j) +
                        " unreachable in one step from x=" + std::to_string(x));
                }
            }
        } else if (k.density()) {
            if (cfg.phi.atom0 > 0.0 && k.density()->atom_at_zero(x) <= 0.0) {
                throw MinorizationUnsupported("phi atom unsupported from x=" +
                                              std::to_string(x));
            }
            for (double y : grid) {
                if (y > 0.0 && cfg.phi.mass_at(y) > 0.0 && k.density()->density(x, y) <= 0.0) {
                    throw MinorizationUnsupported("phi density unsupported at y=" +
                                                  std::to_string(y));
                }
            }
        }
    }

    AssumptionReport rep;
    const double pass_slack = 1e-12;
    auto add = [&](std::string name, double statistic, double margin, double se,
                   double worst_x) {
        AssumptionReport::Condition c;
        c.name = std::move(name);
        c.statistic = statistic;
        c.margin = margin;
        c.se = se;
        c.worst_x = worst_x;
        c.pass = std::isfinite(margin) && margin >= 2.0 * se - pass_slack;
        rep.conditions.push_back(std::move(c));
    };

    // a) sup of E_x v_i(X_1) over the small set is finite.
    for (int vi = 1; vi <= 2; ++vi) {
        const auto& v = (vi == 1) ? cfg.v1 : cfg.v2;
        double sup = 0.0, worst = small.front();
        for (double x : small) {
            const auto e = detail::expected_next(k, v, x, mc_seed);
            if (e.value > sup) {
                sup = e.value;
                worst = x;
            }
        }
        add("a_v" + std::to_string(vi) + "_bounded_on_small_set", sup,
            std::isfinite(sup) ? 1.0 : -1.0, 0.0, worst);
    }

    // b) sup |r| over the small set is finite.
    {
        double sup = 0.0, worst = small.front();
        for (double x : small) {
            const double v = std::abs(r.eval(x));
            if (v > sup) {
                sup = v;
                worst = x;
            }
        }
        add("b_reward_bounded_on_small_set", sup, std::isfinite(sup) ? 1.0 : -1.0, 0.0, worst);
    }

    // c) E_x v1(X_1) <= v1(x) - 1 above b.
    {
        double margin = std::numeric_limits<double>::infinity();
        double worst = tail.front(), se = 0.0;
        for (double x : tail) {
            const auto e = detail::expected_next(k, cfg.v1, x, mc_seed);
            const double m = cfg.v1(x) - 1.0 - e.value;
            if (m < margin) {
                margin = m;
                worst = x;
                se = e.se;
            }
        }
        add("c_v1_unit_drift", margin, margin, se, worst);
    }

    // d) E_x v2(X_1) <= v2(x) - |r(x)| above b.
    {
        double margin = std::numeric_limits<double>::infinity();
        double worst = tail.front(), se = 0.0;
        for (double x : tail) {
            const auto e = detail::expected_next(k, cfg.v2, x, mc_seed);
            const double m = cfg.v2(x) - std::abs(r.eval(x)) - e.value;
            if (m < margin) {
                margin = m;
                worst = x;
                se = e.se;
            }
        }
        add("d_v2_reward_drift", margin, margin, se, worst);
    }

    // e) CDF-level minorization F(x,y) >= lambda Phi(y) on the small set.
    {
        double margin = std::numeric_limits<double>::infinity();
        double worst = small.front();
        for (double x : small) {
            for (double y : grid) {
                const double m = k.cdf(x, y) - cfg.lambda * cfg.phi.cdf(y);
                if (m < margin) {
                    margin = m;
                    worst = x;
                }
            }
        }
        add("e_minorization", margin, margin, 0.0, worst);
    }

    // Validity of the residual CDF: increments of F - lambda Phi must be
    // non-negative along the grid for every small-set x (this is the
    // measure-level content that makes G a genuine CDF).
    if (cfg.lambda < 1.0) {
        double margin = std::numeric_limits<double>::infinity();
        double worst = small.front();
        for (double x : small) {
            double prev = k.cdf(x, grid.front()) - cfg.lambda * cfg.phi.cdf(grid.front());
            if (prev < margin) {
                margin = prev;
                worst = x;
            }
            for (std::size_t i = 1; i < grid.size(); ++i) {
                const double cur = k.cdf(x, grid[i]) - cfg.lambda * cfg.phi.cdf(grid[i]);
                if (cur - prev < margin) {
                    margin = cur - prev;
                    worst = x;
                }
                prev = cur;
            }
        }
        add("g_residual_cdf", margin, margin, 0.0, worst);
    }

    rep.pass = std::all_of(rep.conditions.begin(), rep.conditions.end(),
                           [](const auto& c) { return c.pass; });
    return rep;
}

}  // namespace poismc
