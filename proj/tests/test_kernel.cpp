#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "poismc/kernel.hpp"
#include "poismc/models.hpp"

using namespace poismc;

namespace {

Eigen::MatrixXd two_state(double p, double q) {
    Eigen::MatrixXd P(2, 2);
    P << 1.0 - p, p, q, 1.0 - q;
    return P;
}

// Independent oracle for the M/M/1 waiting-time kernel: F(x,y) = P(x+Z <= y)
// with Z = Exp(mu) - Exp(lambda), written out from the difference CDF.
double lindley_cdf_oracle(double x, double y, double lambda, double mu) {
    if (y < 0.0) return 0.0;
    const double z = y - x;
    if (z <= 0.0) return mu / (mu + lambda) * std::exp(lambda * z);
    return 1.0 - lambda / (mu + lambda) * std::exp(-mu * z);
}

}  // namespace

// ------------------------------ validate_kernel ------------------------------

TEST(ValidateKernel, DoublyStochasticTwoStatePasses) {
    auto k = MonotoneKernel::discrete(two_state(0.5, 0.5), true, "sym");
    const std::vector<double> grid{0.0, 1.0};
    const auto rep = validate_kernel(k, grid);
    EXPECT_TRUE(rep.pass);
    EXPECT_EQ(rep.max_row_mass_error, 0.0);
}

TEST(ValidateKernel, RowMassDefectReported) {
    Eigen::MatrixXd P(2, 2);
    P << 0.5, 0.49, 0.5, 0.5;
    auto k = MonotoneKernel::discrete(P, false, "defect");
    const std::vector<double> grid{0.0, 1.0};
    const auto rep = validate_kernel(k, grid);
    EXPECT_FALSE(rep.pass);
    EXPECT_NEAR(rep.max_row_mass_error, 0.01, 1e-15);
}

TEST(ValidateKernel, LindleyKernelMatchesClosedFormOracle) {
    const double lambda = 0.5, mu = 1.0;
    auto k = build_lindley(lambda, mu);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(0.5 * i);

    const auto rep = validate_kernel(k, grid);
    EXPECT_TRUE(rep.pass);

    for (double x : grid) {
        for (double y : grid) {
            EXPECT_NEAR(k.cdf(x, y), lindley_cdf_oracle(x, y, lambda, mu), 1e-14);
        }
    }
}

TEST(ValidateKernel, GridErrors) {
    auto k = MonotoneKernel::discrete(two_state(0.5, 0.5), true, "sym");
    EXPECT_THROW(validate_kernel(k, std::vector<double>{}), InvalidArgument);
    EXPECT_THROW(validate_kernel(k, std::vector<double>{1.0, 0.0}), InvalidArgument);
}

// ----------------------- check_stochastic_monotonicity -----------------------

TEST(StochasticMonotonicity, LazyTwoStateIsMonotone) {
    Eigen::MatrixXd P(2, 2);
    P << 0.5, 0.5, 0.0, 1.0;
    auto k = MonotoneKernel::discrete(P, true, "mono");
    const std::vector<double> grid{0.0, 1.0};
    EXPECT_TRUE(check_stochastic_monotonicity(k, grid).monotone);
}

TEST(StochasticMonotonicity, FlipChainViolationLocated) {
    Eigen::MatrixXd P(2, 2);
    P << 0.0, 1.0, 1.0, 0.0;
    auto k = MonotoneKernel::discrete(P, false, "flip");
    const std::vector<double> grid{0.0, 1.0};
    const auto rep = check_stochastic_monotonicity(k, grid);
    EXPECT_FALSE(rep.monotone);
    EXPECT_EQ(rep.at_x, 0.0);
    EXPECT_EQ(rep.at_x_next, 1.0);
    EXPECT_EQ(rep.at_y, 0.0);
    EXPECT_NEAR(rep.worst_violation, 1.0, 1e-15);
}

TEST(StochasticMonotonicity, ReflectedWalkAgainstBruteForceCdf) {
    // Brute-force oracle: cumulative sums of the explicit transition rows.
    const double p = 0.3;
    const int n = 21;
    auto k = build_birth_death(p, n - 1);
    const auto grid = k.default_grid();
    EXPECT_TRUE(check_stochastic_monotonicity(k, grid).monotone);

    const auto& P = k.matrix();
    for (int x = 0; x + 1 < n; ++x) {
        for (int y = 0; y < n; ++y) {
            double fx = 0.0, fx1 = 0.0;
            for (int j = 0; j <= y; ++j) {
                fx += P(x, j);
                fx1 += P(x + 1, j);
            }
            EXPECT_LE(fx1, fx + 1e-12);
        }
    }
}

// --------------------------- stationary_distribution -------------------------

TEST(StationaryDistribution, SymmetricTwoState) {
    auto k = MonotoneKernel::discrete(two_state(0.5, 0.5), true, "sym");
    const auto pi = stationary_distribution(k);
    EXPECT_NEAR(pi(0), 0.5, 1e-12);
    EXPECT_NEAR(pi(1), 0.5, 1e-12);
}

TEST(StationaryDistribution, RankOneKernelEqualsCommonRow) {
    Eigen::MatrixXd P(2, 2);
    P << 0.7, 0.3, 0.7, 0.3;
    auto k = MonotoneKernel::discrete(P, true, "rank1");
    const auto pi = stationary_distribution(k);
    EXPECT_NEAR(pi(0), 0.7, 1e-12);
    EXPECT_NEAR(pi(1), 0.3, 1e-12);
}

TEST(StationaryDistribution, BirthDeathDetailedBalanceOracle) {
    auto k = build_birth_death(0.3, 20);
    const auto pi = stationary_distribution(k);
    // Detailed balance oracle: pi(i) proportional to (p/q)^i, normalized.
    const double ratio = 3.0 / 7.0;
    std::vector<double> oracle(21);
    double mass = 0.0, term = 1.0;
    for (int i = 0; i < 21; ++i) {
        oracle[static_cast<std::size_t>(i)] = term;
        mass += term;
        term *= ratio;
    }
    for (int i = 0; i < 21; ++i) {
        EXPECT_NEAR(pi(i), oracle[static_cast<std::size_t>(i)] / mass, 1e-10);
    }
    EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
    const double residual = (k.matrix().transpose() * pi - pi).lpNorm<Eigen::Infinity>();
    EXPECT_LE(residual, 1e-10);
}

TEST(StationaryDistribution, ReducibleMatrixRejected) {
    auto k = MonotoneKernel::discrete(Eigen::MatrixXd::Identity(3, 3), false, "id");
    EXPECT_THROW(stationary_distribution(k), NoUniqueStationary);
}

TEST(StationaryDistribution, PeriodicFlipChainStillUnique) {
    Eigen::MatrixXd P(2, 2);
    P << 0.0, 1.0, 1.0, 0.0;
    auto k = MonotoneKernel::discrete(P, false, "flip");
    const auto pi = stationary_distribution(k);
    EXPECT_NEAR(pi(0), 0.5, 1e-12);
}

// ------------------------------- properties ---------------------------------

TEST(KernelProperties, InverseCdfRoundTrip) {
    auto lind = build_lindley(0.5, 1.0);
    auto ar1 = build_reflected_ar1(0.5, -0.5, 1.0);
    for (const auto* k : {&lind, &ar1}) {
        for (double x : {0.0, 0.5, 1.0, 3.0, 7.0}) {
            for (int ui = 1; ui <= 99; ++ui) {
                const double u = ui / 100.0;
                const double z = k->inverse_cdf(x, u);
                EXPECT_GE(k->cdf(x, z), u - 1e-12);
            }
            // inf-property: slightly above F(x,y) the inverse must be >= y.
            for (double y : {0.5, 1.0, 2.0}) {
                const double f = k->cdf(x, y);
                if (f < 1.0 - 1e-9) {
                    EXPECT_GE(k->inverse_cdf(x, f + 1e-12), y - 1e-6);
                }
            }
        }
    }
}

TEST(KernelProperties, MonotoneKernelHasMonotoneInverse) {
    auto lind = build_lindley(0.5, 1.0);
    auto bd = build_birth_death(0.3, 20);
    for (const auto* k : {&lind, &bd}) {
        const auto grid = k->default_grid(41);
        for (int ui = 1; ui <= 19; ++ui) {
            const double u = ui / 20.0;
            double prev = -1.0;
            for (double x : grid) {
                const double z = k->inverse_cdf(x, u);
                EXPECT_GE(z, prev);
                prev = z;
            }
        }
    }
}

TEST(KernelProperties, DiscreteStateValidation) {
    auto k = build_birth_death(0.3, 5);
    EXPECT_THROW(k.cdf(2.5, 1.0), InvalidArgument);
    EXPECT_THROW(k.inverse_cdf(-1.0, 0.5), InvalidArgument);
    EXPECT_THROW(k.inverse_cdf(1.0, 0.0), InvalidArgument);
    EXPECT_THROW(k.inverse_cdf(1.0, 1.0), InvalidArgument);
}

TEST(KernelProperties, BisectionInverseMatchesClosedForm) {
    // Kernel built from its CDF alone; the derived generalized inverse must
    // agree with the closed-form one.
    const double lambda = 0.5, mu = 1.0;
    auto closed = build_lindley(lambda, mu);
    auto derived = MonotoneKernel::continuous_from_cdf(
        [&](double x, double y) { return closed.cdf(x, y); }, true, "lindley_bisect", 80.0);
    for (double x : {0.0, 0.8, 2.0, 5.0}) {
        for (int ui = 1; ui <= 39; ++ui) {
            const double u = ui / 40.0;
            EXPECT_NEAR(derived.inverse_cdf(x, u), closed.inverse_cdf(x, u), 1e-9);
        }
    }
}

TEST(CenteredReward, SubtractsSteadyStateMeanExactly) {
    auto k = build_birth_death(0.3, 20);
    const auto pi = stationary_distribution(k);
    auto r = reward_identity();
    double pi_r = 0.0;
    for (int i = 0; i < k.n_states(); ++i) pi_r += pi(i) * r.eval(static_cast<double>(i));
    const CenteredReward rc{r, pi_r};
    for (double x : {0.0, 3.0, 11.0}) {
        EXPECT_EQ(rc.eval_centered(x), r.eval(x) - pi_r);
    }
    double mean = 0.0;
    for (int i = 0; i < k.n_states(); ++i) mean += pi(i) * rc.eval_centered(i);
    EXPECT_NEAR(mean, 0.0, 1e-12);
}

TEST(RewardValidation, DeclarationsSpotChecked) {
    const std::vector<double> grid{0.0, 1.0, 2.0, 3.0};
    EXPECT_TRUE(validate_reward(reward_identity(), grid).empty());

    RewardFunction bad;
    bad.eval = [](double x) { return -x; };
    bad.monotone = true;
    EXPECT_FALSE(validate_reward(bad, grid).empty());

    RewardFunction steep;
    steep.eval = [](double x) { return 3.0 * x; };
    steep.monotone = true;
    steep.lipschitz_root = 1.0;
    EXPECT_FALSE(validate_reward(steep, grid).empty());
}
