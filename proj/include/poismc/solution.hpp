#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "poismc/errors.hpp"

namespace poismc {

enum class SolveMethod { linear, regenerative, series, monte_carlo };

enum class Normalization { anchor, series, mean_zero };

inline const char* to_string(SolveMethod m) {
    switch (m) {
        case SolveMethod::linear: return "linear";
        case SolveMethod::regenerative: return "regenerative";
        case SolveMethod::series: return "series";
        case SolveMethod::monte_carlo: return "monte_carlo";
    }
    return "?";
}

/// A solution g of (P - I) g = -r_c on a state grid, together with the
/// normalization convention, steady-state mean pi_r, residual diagnostics,
/// and which solver produced it. Monte Carlo solutions carry confidence
/// half-widths instead of an exact residual.
struct PoissonSolution {
    std::vector<double> grid;
    std::vector<double> g;
    Normalization normalization = Normalization::anchor;
    std::optional<double> anchor_state;
    double pi_r = 0.0;
    std::optional<double> residual_sup;  // present for exact (matrix-backed) routes
    SolveMethod method = SolveMethod::linear;

    // Statistical solutions only: 3-standard-error half-widths per grid point
    // and for adjacent differences g(x_{i+1}) - g(x_i).
    std::vector<double> ci_halfwidth;
    std::vector<double> adjacent_diff_ci;

    double value_at(double x) const {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (std::abs(grid[i] - x) <= 1e-9) return g[i];
        }
        throw InvalidArgument("PoissonSolution::value_at: state not on the grid");
    }
};

/// Shifts g by a constant so that g(anchor_state) = 0. Differences are
/// unchanged; only the gauge moves.
inline PoissonSolution anchored(const PoissonSolution& sol, double anchor_state) {
    PoissonSolution out = sol;
    const double shift = sol.value_at(anchor_state);
    for (auto& v : out.g) v -= shift;
    out.normalization = Normalization::anchor;
    out.anchor_state = anchor_state;
    return out;
}

/// True when g is non-decreasing across the grid within the statistical
/// slack recorded in adjacent_diff_ci (0 slack when absent).
inline bool nondecreasing_within_ci(const PoissonSolution& sol) {
    for (std::size_t i = 0; i + 1 < sol.g.size(); ++i) {
        const double slack =
            sol.adjacent_diff_ci.empty() ? 0.0 : sol.adjacent_diff_ci[i];
        if (sol.g[i + 1] - sol.g[i] < -slack) return false;
    }
    return true;
}

}  // namespace poismc
