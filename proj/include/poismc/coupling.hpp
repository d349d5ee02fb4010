#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "poismc/kernel.hpp"
#include "poismc/rng.hpp"

namespace poismc {

/// One realized random map x -> F^{-1}(x, u). Non-decreasing in x whenever
/// the kernel is stochastically monotone.
struct RandomMap {
    const MonotoneKernel* kernel;
    double u;

    double operator()(double x) const { return kernel->inverse_cdf(x, u); }
};

/// Jointly simulated trajectories from ordered initial states, all driven by
/// the same uniform draw at each time step.
struct CoupledPaths {
    std::vector<double> initial_states;
    int horizon = 0;
    std::uint64_t seed = 0;
    // paths[i][t] = state of the chain started from initial_states[i] at time t.
    std::vector<std::vector<double>> paths;
};

/// Shared-uniform forward coupling: X_{n+1}(x) = F^{-1}(X_n(x), U_{n+1}).
/// One draw per time step drives every path, so adding initial states never
/// perturbs existing trajectories.
inline CoupledPaths simulate_coupled(const MonotoneKernel& k, std::span<const double> xs,
                                     int horizon, std::uint64_t seed) {
    if (xs.empty()) throw InvalidArgument("simulate_coupled: need at least one state");
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (xs[i] < xs[i - 1]) {
            throw InvalidArgument("simulate_coupled: initial states must be sorted");
        }
    }
    if (horizon < 0) throw InvalidArgument("simulate_coupled: horizon must be >= 0");

    CoupledPaths out;
    out.initial_states.assign(xs.begin(), xs.end());
    out.horizon = horizon;
    out.seed = seed;
    out.paths.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out.paths[i].reserve(static_cast<std::size_t>(horizon) + 1);
        out.paths[i].push_back(xs[i]);
    }

    UniformStream stream(seed);
    for (int t = 1; t <= horizon; ++t) {
        const double u = stream.next();
        for (auto& path : out.paths) {
            path.push_back(k.inverse_cdf(path.back(), u));
        }
    }
    return out;
}

/// Backward composition of the same random maps:
/// X~_n(x) = kappa_1(kappa_2(...kappa_n(x)...)) with kappa_j(x) = F^{-1}(x, U_j).
/// Equal in distribution to the forward state at time n for each fixed n.
inline double simulate_backward(const MonotoneKernel& k, double x, int n, std::uint64_t seed) {
    if (n < 0) throw InvalidArgument("simulate_backward: n must be >= 0");
    UniformStream stream(seed);
    double y = x;
    for (int j = n; j >= 1; --j) {
        y = k.inverse_cdf(y, stream.at(static_cast<std::uint64_t>(j - 1)));
    }
    return y;
}

struct OrderReport {
    long violations = 0;
    int first_step = -1;
    int first_pair = -1;   // index i with paths[i][t] > paths[i+1][t] + slack
    double worst_gap = 0.0;
    bool ok = true;
};

/// Scans coupled paths for violations of the pathwise order across initial
/// states. Zero violations expected for monotone kernels.
inline OrderReport check_order_preservation(const CoupledPaths& paths, double slack = 1e-12) {
    OrderReport rep;
    for (std::size_t i = 0; i + 1 < paths.paths.size(); ++i) {
        const auto& lo = paths.paths[i];
        const auto& hi = paths.paths[i + 1];
        for (std::size_t t = 0; t < lo.size(); ++t) {
            const double gap = lo[t] - hi[t];
            if (gap > slack) {
                ++rep.violations;
                if (rep.first_step < 0) {
                    rep.first_step = static_cast<int>(t);
                    rep.first_pair = static_cast<int>(i);
                }
                rep.worst_gap = std::max(rep.worst_gap, gap);
            }
        }
    }
    rep.ok = rep.violations == 0;
    return rep;
}

}  // namespace poismc
