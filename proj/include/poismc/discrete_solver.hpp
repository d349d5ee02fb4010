#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "poismc/coupling.hpp"
#include "poismc/kernel.hpp"
#include "poismc/solution.hpp"
#include "poismc/tolerances.hpp"

namespace poismc {

namespace detail {

inline Eigen::VectorXd reward_vector(const MonotoneKernel& k, const RewardFunction& r) {
    const int n = k.n_states();
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = r.eval(static_cast<double>(i));
    return v;
}

inline double poisson_residual_sup(const Eigen::MatrixXd& P, const Eigen::VectorXd& g,
                                   const Eigen::VectorXd& r_c) {
    return (P * g - g + r_c).lpNorm<Eigen::Infinity>();
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline std::vector<double> integer_grid(int n) {
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = static_cast<double>(i);
    return grid;
}

}  // namespace detail

/// Direct solve of (I - P) g = r_c on the truncated grid, with the redundant
/// row replaced by the anchor constraint g(z) = 0.
inline PoissonSolution solve_linear(const MonotoneKernel& k, const RewardFunction& r,
                                    int anchor, const Tolerances& tol = {}) {
    const auto& P = k.matrix();
    const int n = k.n_states();
    if (anchor < 0 || anchor >= n) throw InvalidArgument("solve_linear: anchor not on grid");

    const Eigen::VectorXd pi = stationary_distribution(k, tol);
    const Eigen::VectorXd rv = detail::reward_vector(k, r);
    const double pi_r = pi.dot(rv);
    const Eigen::VectorXd r_c = rv.array() - pi_r;

    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - P;
    A.row(anchor).setZero();
    A(anchor, anchor) = 1.0;
    Eigen::VectorXd rhs = r_c;
    rhs(anchor) = 0.0;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < n) {
        throw SolverFailure("solve_linear: system singular beyond the anchored deficiency");
    }
    const Eigen::VectorXd g = lu.solve(rhs);

    PoissonSolution sol;
    sol.grid = detail::integer_grid(n);
    sol.g = detail::to_std(g);
    sol.normalization = Normalization::anchor;
    sol.anchor_state = static_cast<double>(anchor);
    sol.pi_r = pi_r;
    sol.residual_sup = detail::poisson_residual_sup(P, g, r_c);
    sol.method = SolveMethod::linear;
    if (*sol.residual_sup > tol.residual_tol) {
        throw SolverFailure("solve_linear: residual " + std::to_string(*sol.residual_sup) +
                            " exceeds tolerance");
    }
    return sol;
}

/// Regenerative-cycle solve: g_z(x) = E_x sum_{j<tau} r_c(X_j) with tau the
/// first return time to z, evaluated exactly through the taboo linear system
/// h = r_c + P_{taboo} h on the states other than z.
inline PoissonSolution solve_regenerative(const MonotoneKernel& k, const RewardFunction& r,
                                          int z = 0, const Tolerances& tol = {}) {
    const auto& P = k.matrix();
    const int n = k.n_states();
    if (z < 0 || z >= n) throw InvalidArgument("solve_regenerative: z not on grid");

    // All states must be reachable from z, else cycle sums are undefined.
    {
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        std::vector<int> queue{z};
        seen[static_cast<std::size_t>(z)] = true;
        while (!queue.empty()) {
            const int s = queue.back();
            queue.pop_back();
            for (int j = 0; j < n; ++j) {
                if (!seen[static_cast<std::size_t>(j)] && P(s, j) > 0.0) {
                    seen[static_cast<std::size_t>(j)] = true;
                    queue.push_back(j);
                }
            }
        }
        std::string missing;
        for (int j = 0; j < n; ++j) {
            if (!seen[static_cast<std::size_t>(j)]) missing += " " + std::to_string(j);
        }
        if (!missing.empty()) {
            throw SolverFailure("solve_regenerative: states unreachable from z:" + missing);
        }
    }

    const Eigen::VectorXd pi = stationary_distribution(k, tol);
    const Eigen::VectorXd rv = detail::reward_vector(k, r);
    const double pi_r = pi.dot(rv);
    const Eigen::VectorXd r_c = rv.array() - pi_r;

    // Taboo system over states != z.
    const int m = n - 1;
    Eigen::MatrixXd M(m, m);
    Eigen::VectorXd rhs(m);
    auto full_index = [z](int i) { return i < z ? i : i + 1; };
    for (int i = 0; i < m; ++i) {
        const int fi = full_index(i);
        rhs(i) = r_c(fi);
        for (int j = 0; j < m; ++j) {
            const int fj = full_index(j);
            M(i, j) = (i == j ? 1.0 : 0.0) - P(fi, fj);
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.rank() < m) {
        throw SolverFailure("solve_regenerative: taboo system singular");
    }
    const Eigen::VectorXd h = lu.solve(rhs);

    Eigen::VectorXd g(n);
    double gz = r_c(z);
    for (int j = 0; j < m; ++j) gz += P(z, full_index(j)) * h(j);
    for (int i = 0; i < m; ++i) g(full_index(i)) = h(i);
    g(z) = gz;  // equals E_z tau * (pi r_c) = 0 up to rounding

    PoissonSolution sol;
    sol.grid = detail::integer_grid(n);
    sol.g = detail::to_std(g);
    sol.normalization = Normalization::anchor;
    sol.anchor_state = static_cast<double>(z);
    sol.pi_r = pi_r;
    sol.residual_sup = detail::poisson_residual_sup(P, g, r_c);
    sol.method = SolveMethod::regenerative;
    if (*sol.residual_sup > tol.residual_tol) {
        throw SolverFailure("solve_regenerative: residual " +
                            std::to_string(*sol.residual_sup) + " exceeds tolerance");
    }
    return sol;
}

/// Partial sums of g = sum_j P^j r_c, stopping once a term's sup-norm falls
/// below tol_terms. Periodic chains oscillate and are reported as divergent
/// rather than averaged.
inline PoissonSolution solve_series(const MonotoneKernel& k, const RewardFunction& r,
                                    double tol_terms = 1e-10, int max_terms = 10000,
                                    const Tolerances& tol = {}) {
    if (tol_terms <= 0.0) throw InvalidArgument("solve_series: tol must be positive");
    const auto& P = k.matrix();
    const int n = k.n_states();

    const Eigen::VectorXd pi = stationary_distribution(k, tol);
    const Eigen::VectorXd rv = detail::reward_vector(k, r);
    const double pi_r = pi.dot(rv);
    const Eigen::VectorXd r_c = rv.array() - pi_r;

    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd term = r_c;
    int terms = 0;
    while (true) {
        g += term;
        ++terms;
        term = P * term;
        if (term.lpNorm<Eigen::Infinity>() < tol_terms) break;
        if (terms >= max_terms) {
            throw SeriesDiverged("solve_series: no convergence after " +
                                 std::to_string(terms) + " terms");
        }
    }

    PoissonSolution sol;
    sol.grid = detail::integer_grid(n);
    sol.g = detail::to_std(g);
    sol.normalization = Normalization::series;
    sol.pi_r = pi_r;
    sol.residual_sup = detail::poisson_residual_sup(P, g, r_c);
    sol.method = SolveMethod::series;
    return sol;
}

struct MonotonicityCertificate {
    double min_increment = 0.0;
    double at_x = 0.0;  // left endpoint of the minimal increment
    bool certified = false;
};

/// Asserts g is non-decreasing across its grid (within tolerance). Throws
/// CertificationFailed with the offending location otherwise.
inline MonotonicityCertificate certify_monotone(const PoissonSolution& sol,
                                                const Tolerances& tol = {}) {
    if (sol.g.size() < 2) throw InvalidArgument("certify_monotone: need >= 2 grid points");
    MonotonicityCertificate cert;
    cert.min_increment = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < sol.g.size(); ++i) {
        const double inc = sol.g[i + 1] - sol.g[i];
        if (inc < cert.min_increment) {
            cert.min_increment = inc;
            cert.at_x = sol.grid[i];
        }
    }
    if (cert.min_increment < -tol.g_increment_tol) {
        throw CertificationFailed("certify_monotone: g decreases by " +
                                  std::to_string(-cert.min_increment) + " at x=" +
                                  std::to_string(cert.at_x));
    }
    cert.certified = true;
    return cert;
}

struct BiasReport {
    double expected_sum = 0.0;  // E_x S_n(r), exact via matrix powers
    double predicted = 0.0;     // n pi_r + g(x) - pi g
    double gap = 0.0;
    int horizon = 0;
    int state = 0;
};

/// Compares E_x S_n(r) (computed exactly by repeated P-multiplication)
/// against the large-horizon approximation n pi_r + g(x) - pi g.
inline BiasReport bias_expansion_check(const MonotoneKernel& k, const RewardFunction& r,
                                       const PoissonSolution& sol, int state, int horizon,
                                       const Tolerances& tol = {}) {
    if (horizon < 0) throw InvalidArgument("bias_expansion_check: horizon >= 0");
    const auto& P = k.matrix();
    const int n = k.n_states();
    if (state < 0 || state >= n) throw InvalidArgument("bias_expansion_check: bad state");

    const Eigen::VectorXd pi = stationary_distribution(k, tol);
    const Eigen::VectorXd rv = detail::reward_vector(k, r);
    Eigen::VectorXd gv(n);
    for (int i = 0; i < n; ++i) gv(i) = sol.g[static_cast<std::size_t>(i)];

    Eigen::VectorXd w = rv;
    double expected = 0.0;
    for (int j = 0; j < horizon; ++j) {
        expected += w(state);
        w = P * w;
    }

    const double pi_g = pi.dot(gv);
    BiasReport rep;
    rep.expected_sum = expected;
    rep.predicted = horizon * sol.pi_r + gv(state) - pi_g;
    rep.gap = std::abs(rep.expected_sum - rep.predicted);
    rep.horizon = horizon;
    rep.state = state;
    return rep;
}

struct MartingaleTrace {
    std::vector<double> path;
    std::vector<double> values;      // M_n = g(X_n) + sum_{j<n} r_c(X_j)
    std::vector<double> increments;  // M_{n+1} - M_n
    double max_drift = 0.0;          // max over visited states of |(Pg)(x) - g(x) + r_c(x)|
};

/// Builds the martingale trace M_n along each coupled path and reports the
/// worst one-step conditional drift among visited states.
inline std::vector<MartingaleTrace> martingale_drift_check(const MonotoneKernel& k,
                                                           const PoissonSolution& sol,
                                                           const RewardFunction& r,
                                                           const CoupledPaths& paths) {
    const auto& P = k.matrix();
    const int n = k.n_states();
    Eigen::VectorXd gv(n), rv = detail::reward_vector(k, r);
    for (int i = 0; i < n; ++i) gv(i) = sol.g[static_cast<std::size_t>(i)];
    const Eigen::VectorXd r_c = rv.array() - sol.pi_r;
    const Eigen::VectorXd drift = P * gv - gv + r_c;

    std::vector<MartingaleTrace> traces;
    traces.reserve(paths.paths.size());
    for (const auto& path : paths.paths) {
        MartingaleTrace t;
        t.path = path;
        double running = 0.0;
        for (std::size_t j = 0; j < path.size(); ++j) {
            const auto idx = static_cast<Eigen::Index>(std::llround(path[j]));
            t.values.push_back(gv(idx) + running);
            running += r_c(idx);
            t.max_drift = std::max(t.max_drift, std::abs(drift(idx)));
        }
        for (std::size_t j = 0; j + 1 < t.values.size(); ++j) {
            t.increments.push_back(t.values[j + 1] - t.values[j]);
        }
        traces.push_back(std::move(t));
    }
    return traces;
}

}  // namespace poismc
