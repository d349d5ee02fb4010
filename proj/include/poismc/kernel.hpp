#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poismc/errors.hpp"
#include "poismc/tolerances.hpp"

namespace poismc {

enum class StateSpace { DiscreteZPlus, ContinuousRPlus };

/// Optional density information for continuous kernels: the one-step law is
/// an atom at 0 plus a density on (0, inf). Needed by the split-chain
/// machinery (change-of-measure weights, drift quadrature).
struct TransitionDensity {
    std::function<double(double)> atom_at_zero;       // mass of {0} from state x
    std::function<double(double, double)> density;    // density at y > 0 from state x
};

/// One-step transition law of a chain on a totally ordered state space,
/// exposed through its CDF F(x,y) and generalized inverse
/// F^{-1}(x,u) = inf{z : F(x,z) >= u}. Discrete kernels additionally carry a
/// row-stochastic matrix over the truncated range {0..N}. Immutable after
/// construction; all member queries are const and thread-safe.
class MonotoneKernel {
public:
    using CdfFn = std::function<double(double, double)>;
    using InvFn = std::function<double(double, double)>;

    static MonotoneKernel discrete(Eigen::MatrixXd transition, bool declared_monotone,
                                   std::string name) {
        if (transition.rows() != transition.cols() || transition.rows() < 1) {
            throw InvalidArgument("discrete kernel: matrix must be square and non-empty");
        }
        if ((transition.array() < 0.0).any()) {
            throw InvalidArgument("discrete kernel: negative transition probability");
        }
        MonotoneKernel k;
        k.space_ = StateSpace::DiscreteZPlus;
        k.declared_monotone_ = declared_monotone;
        k.name_ = std::move(name);
        k.matrix_ = std::move(transition);
        const auto n = k.matrix_->rows();
        k.row_cum_.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& cum = k.row_cum_[static_cast<std::size_t>(i)];
            cum.resize(static_cast<std::size_t>(n));
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                acc += (*k.matrix_)(i, j);
                cum[static_cast<std::size_t>(j)] = acc;
            }
        }
        k.support_hint_ = static_cast<double>(n - 1);
        k.continuous_inverse_ = false;
        return k;
    }

    static MonotoneKernel continuous(CdfFn cdf, InvFn inverse, bool declared_monotone,
                                     std::string name, double support_hint,
                                     std::optional<TransitionDensity> density = std::nullopt,
                                     bool continuous_inverse = true) {
        MonotoneKernel k;
        k.space_ = StateSpace::ContinuousRPlus;
        k.cdf_ = std::move(cdf);
        k.inv_ = std::move(inverse);
        k.declared_monotone_ = declared_monotone;
        k.name_ = std::move(name);
        k.support_hint_ = support_hint;
        k.density_ = std::move(density);
        k.continuous_inverse_ = continuous_inverse;
        return k;
    }

    /// For kernels with no closed-form inverse: derives the generalized
    /// inverse inf{z : F(x,z) >= u} from the CDF by bracketing bisection to
    /// 1e-12 absolute width. Closed forms, when available, should be passed
    /// to continuous() instead.
    static MonotoneKernel continuous_from_cdf(CdfFn cdf, bool declared_monotone,
                                              std::string name, double support_hint,
                                              std::optional<TransitionDensity> density =
                                                  std::nullopt,
                                              bool continuous_inverse = true) {
        CdfFn cdf_copy = cdf;
        InvFn inverse = [cdf_copy, support_hint](double x, double u) {
            if (cdf_copy(x, 0.0) >= u) return 0.0;
            double lo = 0.0;
            double hi = std::max(support_hint, x) + 1.0;
            int guard = 0;
            while (cdf_copy(x, hi) < u) {
                hi = hi * 2.0 + 1.0;
                if (++guard > 200) {
                    throw InvalidArgument("inverse bisection: CDF does not reach " +
                                          std::to_string(u));
                }
            }
            while (hi - lo > 1e-12) {
                const double mid = 0.5 * (lo + hi);
                if (cdf_copy(x, mid) >= u) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        };
        return continuous(std::move(cdf), std::move(inverse), declared_monotone,
                          std::move(name), support_hint, std::move(density),
                          continuous_inverse);
    }

    StateSpace space() const { return space_; }
    bool is_discrete() const { return space_ == StateSpace::DiscreteZPlus; }

    /// F(x,y) = P_x(X_1 <= y).
    double cdf(double x, double y) const {
        if (is_discrete()) {
            const Eigen::Index row = state_index(x);
            if (y < 0.0) return 0.0;
            const Eigen::Index col = static_cast<Eigen::Index>(std::floor(y + 1e-9));
            const auto& cum = row_cum_[static_cast<std::size_t>(row)];
            if (col >= static_cast<Eigen::Index>(cum.size())) return cum.back();
            return cum[static_cast<std::size_t>(col)];
        }
        return cdf_(x, y);
    }

    /// Generalized inverse; u must lie in (0,1).
    double inverse_cdf(double x, double u) const {
        if (!(u > 0.0 && u < 1.0)) {
            throw InvalidArgument("inverse_cdf: u must lie in (0,1)");
        }
        if (is_discrete()) {
            const Eigen::Index row = state_index(x);
            const auto& cum = row_cum_[static_cast<std::size_t>(row)];
            const auto it = std::lower_bound(cum.begin(), cum.end(), u);
            if (it == cum.end()) return static_cast<double>(cum.size() - 1);
            return static_cast<double>(it - cum.begin());
        }
        return inv_(x, u);
    }

    const Eigen::MatrixXd& matrix() const {
        if (!matrix_) throw InvalidArgument("matrix(): kernel is not discrete");
        return *matrix_;
    }

    int n_states() const {
        if (!matrix_) throw InvalidArgument("n_states(): kernel is not discrete");
        return static_cast<int>(matrix_->rows());
    }

    bool declared_monotone() const { return declared_monotone_; }
    bool continuous_inverse() const { return continuous_inverse_; }
    const std::optional<TransitionDensity>& density() const { return density_; }
    double support_hint() const { return support_hint_; }
    const std::string& name() const { return name_; }

    const std::vector<std::string>& warnings() const { return warnings_; }
    void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

    /// Default evaluation grid: all states for discrete kernels, an evenly
    /// spaced grid over [0, support_hint] otherwise.
    std::vector<double> default_grid(int points = 201) const {
        std::vector<double> grid;
        if (is_discrete()) {
            grid.resize(static_cast<std::size_t>(n_states()));
            for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i);
        } else {
            if (points < 2) throw InvalidArgument("default_grid: need at least 2 points");
            grid.resize(static_cast<std::size_t>(points));
            for (int i = 0; i < points; ++i) {
                grid[static_cast<std::size_t>(i)] =
                    support_hint_ * static_cast<double>(i) / static_cast<double>(points - 1);
            }
        }
        return grid;
    }

    Eigen::Index state_index(double x) const {
        if (!matrix_) throw InvalidArgument("state_index(): kernel is not discrete");
        const double r = std::round(x);
        if (std::abs(x - r) > 1e-9 || r < 0.0 ||
            r > static_cast<double>(matrix_->rows() - 1)) {
            throw InvalidArgument("discrete kernel: state " + std::to_string(x) +
                                  " is not a valid grid state");
        }
        return static_cast<Eigen::Index>(r);
    }

private:
    MonotoneKernel() = default;

    StateSpace space_ = StateSpace::DiscreteZPlus;
    CdfFn cdf_;
    InvFn inv_;
    std::optional<Eigen::MatrixXd> matrix_;
    std::vector<std::vector<double>> row_cum_;
    std::optional<TransitionDensity> density_;
    bool declared_monotone_ = false;
    bool continuous_inverse_ = true;
    double support_hint_ = 1.0;
    std::string name_;
    std::vector<std::string> warnings_;
};

/// Reward with declared shape metadata. `lipschitz_root` is c^{1/2} in
/// |r(x)-r(y)| <= c^{1/2} |x-y|.
struct RewardFunction {
    std::function<double(double)> eval;
    bool monotone = false;
    std::optional<double> lipschitz_root;
    bool continuous = true;
    std::string name;
};

/// Reward centered by its steady-state mean: r_c(x) = r(x) - pi_r.
struct CenteredReward {
    RewardFunction base;
    double pi_r = 0.0;

    double eval_centered(double x) const { return base.eval(x) - pi_r; }
};

struct ValidationReport {
    double max_row_mass_error = 0.0;  // discrete only
    int cdf_monotonicity_violations = 0;
    int inverse_consistency_violations = 0;
    double worst_inverse_gap = 0.0;  // max over probes of (u - F(x, F^{-1}(x,u)))+
    bool pass = false;
    std::vector<std::string> messages;
};

struct MonotonicityReport {
    bool monotone = false;
    double worst_violation = 0.0;  // max over (x<x',y) of F(x',y) - F(x,y)
    double at_x = 0.0, at_x_next = 0.0, at_y = 0.0;
};

namespace detail {

inline void require_sorted_grid(std::span<const double> grid) {
    if (grid.empty()) throw InvalidArgument("grid must be non-empty");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw InvalidArgument("grid must be strictly ascending");
        }
    }
}

}  // namespace detail

/// Checks row mass (discrete), CDF monotonicity in y, and generalized-inverse
/// consistency F(x, F^{-1}(x,u)) >= u on the supplied grid.
inline ValidationReport validate_kernel(const MonotoneKernel& k, std::span<const double> grid,
                                        const Tolerances& tol = {}) {
    detail::require_sorted_grid(grid);
    ValidationReport rep;

    if (k.is_discrete()) {
        const auto& P = k.matrix();
        for (Eigen::Index i = 0; i < P.rows(); ++i) {
            rep.max_row_mass_error =
                std::max(rep.max_row_mass_error, std::abs(P.row(i).sum() - 1.0));
        }
        if (rep.max_row_mass_error > tol.mass_tol) {
            rep.messages.push_back("row mass error " + std::to_string(rep.max_row_mass_error));
        }
    }

    for (double x : grid) {
        double prev = -1.0;
        for (double y : grid) {
            const double f = k.cdf(x, y);
            if (f < -tol.mass_tol || f > 1.0 + tol.mass_tol) {
                ++rep.cdf_monotonicity_violations;
            }
            if (f < prev - tol.mass_tol) ++rep.cdf_monotonicity_violations;
            prev = f;
        }
        for (int ui = 1; ui <= 99; ++ui) {
            const double u = static_cast<double>(ui) / 100.0;
            const double z = k.inverse_cdf(x, u);
            const double gap = u - k.cdf(x, z);
            rep.worst_inverse_gap = std::max(rep.worst_inverse_gap, gap);
            if (gap > 1e-9) ++rep.inverse_consistency_violations;
        }
    }

    rep.pass = rep.max_row_mass_error <= tol.mass_tol &&
               rep.cdf_monotonicity_violations == 0 &&
               rep.inverse_consistency_violations == 0;
    return rep;
}

/// Certifies stochastic monotonicity on a grid: F(x',y) <= F(x,y) + slack for
/// every consecutive x < x' and every grid y. A grid check, not a proof.
inline MonotonicityReport check_stochastic_monotonicity(const MonotoneKernel& k,
                                                        std::span<const double> grid,
                                                        const Tolerances& tol = {}) {
    detail::require_sorted_grid(grid);
    MonotonicityReport rep;
    rep.monotone = true;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double x = grid[i];
        const double xn = grid[i + 1];
        for (double y : grid) {
            const double gap = k.cdf(xn, y) - k.cdf(x, y);
            if (gap > rep.worst_violation) {
                rep.worst_violation = gap;
                rep.at_x = x;
                rep.at_x_next = xn;
                rep.at_y = y;
            }
        }
    }
    rep.monotone = rep.worst_violation <= tol.monotone_slack;
    return rep;
}

/// Stationary distribution of a discrete kernel, solved as the linear system
/// pi (P - I) = 0 with the normalization sum(pi) = 1 replacing one equation.
inline Eigen::VectorXd stationary_distribution(const MonotoneKernel& k,
                                               const Tolerances& tol = {}) {
    const auto& P = k.matrix();
    const Eigen::Index n = P.rows();
    Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
    A.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < n) {
        throw NoUniqueStationary("stationary_distribution: fixed point is not unique");
    }
    Eigen::VectorXd pi = lu.solve(rhs);

    const double min_coef = pi.minCoeff();
    const double residual = (P.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
    if (min_coef < -1e-9 || residual > tol.fixed_point_tol) {
        throw NoUniqueStationary("stationary_distribution: no valid fixed point (residual " +
                                 std::to_string(residual) + ")");
    }
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    return pi;
}

/// Spot-checks declared reward metadata on a grid (monotonicity and the
/// Lipschitz root constant); returns a human-readable list of violations.
inline std::vector<std::string> validate_reward(const RewardFunction& r,
                                                std::span<const double> grid) {
    detail::require_sorted_grid(grid);
    std::vector<std::string> issues;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double a = r.eval(grid[i]);
        const double b = r.eval(grid[i + 1]);
        if (r.monotone && b < a - 1e-12) {
            issues.push_back("declared monotone but decreases at x=" + std::to_string(grid[i]));
        }
        if (r.lipschitz_root &&
            std::abs(b - a) > *r.lipschitz_root * (grid[i + 1] - grid[i]) + 1e-12) {
            issues.push_back("lipschitz_root violated at x=" + std::to_string(grid[i]));
        }
    }
    return issues;
}

}  // namespace poismc
