#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "poismc/diagnostics.hpp"
#include "poismc/kernel.hpp"
#include "poismc/models.hpp"
#include "poismc/rng.hpp"
#include "poismc/split.hpp"

using namespace poismc;

TEST(Lindley, StabilityBoundary) {
    EXPECT_THROW(build_lindley(1.0, 1.0), UnstableModel);
    EXPECT_THROW(build_lindley(1.2, 1.0), UnstableModel);
    EXPECT_THROW(build_lindley(-0.5, 1.0), InvalidArgument);
}

// M/M/1 stationary law: P(W <= y) = 1 - rho exp(-(mu-lambda) y). The kernel
// must leave it invariant: integral of F(x,y) against the stationary law
// equals the law itself. Checked by quadrature, including the atom at 0.
TEST(Lindley, StationaryLawIsInvariant) {
    struct Case {
        double lambda, mu;
    };
    for (const auto& c : {Case{0.5, 1.0}, Case{0.9, 1.0}}) {
        auto k = build_lindley(c.lambda, c.mu);
        const double rho = c.lambda / c.mu;
        const double decay = c.mu - c.lambda;
        auto stat_density = [&](double x) { return rho * decay * std::exp(-decay * x); };

        for (double y : {0.0, 0.3, 1.0, 2.5, 6.0}) {
            auto integrand = [&](double x) { return stat_density(x) * k.cdf(x, y); };
            double integral = (1.0 - rho) * k.cdf(0.0, y);
            const double cut = 60.0 / decay;
            integral += poismc::detail::integrate(integrand, 0.0, y, 1e-12);
            integral += poismc::detail::integrate(integrand, y, cut, 1e-12);
            const double target = 1.0 - rho * std::exp(-decay * y);
            EXPECT_NEAR(integral, target, 1e-9) << "lambda=" << c.lambda << " y=" << y;
        }
    }
}

TEST(Lindley, AtomAtZeroClosedForm) {
    // P(W = 0) = 1 - rho in steady state; at the kernel level the atom from
    // state x is F(x, 0) = (mu/(mu+lambda)) exp(-lambda x).
    auto k = build_lindley(0.9, 1.0);
    EXPECT_NEAR(k.cdf(0.0, 0.0), 1.0 / 1.9, 1e-14);
    EXPECT_NEAR(k.cdf(2.0, 0.0), (1.0 / 1.9) * std::exp(-1.8), 1e-14);
}

TEST(Lindley, OneStepLawMatchesCdfByKs) {
    auto k = build_lindley(0.5, 1.0);
    UniformStream s(314159);
    for (double x : {0.0, 1.0, 4.0}) {
        std::vector<double> draws;
        draws.reserve(100000);
        for (int i = 0; i < 100000; ++i) draws.push_back(k.inverse_cdf(x, s.next()));
        const auto ks = ks_one_sample(draws, [&](double y) { return k.cdf(x, y); }, 0.01);
        EXPECT_TRUE(ks.pass) << "x=" << x << " D=" << ks.statistic;
    }
}

TEST(BirthDeath, GeometricStationaryRatio) {
    auto k = build_birth_death(0.3, 20);
    const auto pi = stationary_distribution(k);
    // Entrywise against the normalized geometric law with ratio p/q = 3/7.
    double mass = 0.0, term = 1.0;
    for (int i = 0; i < 21; ++i) {
        mass += term;
        term *= 3.0 / 7.0;
    }
    term = 1.0;
    for (int i = 0; i < 21; ++i) {
        EXPECT_NEAR(pi(i), term / mass, 1e-10);
        term *= 3.0 / 7.0;
    }
}

TEST(BirthDeath, ThreeStateHandOracle) {
    // pi proportional to (1, 3/7, 9/49): pi = (49, 21, 9) / 79.
    auto k = build_birth_death(0.3, 2);
    const auto pi = stationary_distribution(k);
    EXPECT_NEAR(pi(0), 49.0 / 79.0, 1e-12);
    EXPECT_NEAR(pi(1), 21.0 / 79.0, 1e-12);
    EXPECT_NEAR(pi(2), 9.0 / 79.0, 1e-12);
}

TEST(BirthDeath, HalfProbabilityBuildsWithWarning) {
    auto k = build_birth_death(0.5, 10);
    EXPECT_FALSE(k.warnings().empty());
    EXPECT_THROW(build_birth_death(1.0, 10), InvalidArgument);
}

TEST(LindleyDiscrete, TwoPointIncrementStructure) {
    auto k = build_lindley_discrete(0.3, 2, 1, 10);
    const auto& P = k.matrix();
    EXPECT_NEAR(P(0, 2), 0.3, 1e-15);  // up-jump
    EXPECT_NEAR(P(0, 0), 0.7, 1e-15);  // reflected down-jump
    EXPECT_NEAR(P(5, 7), 0.3, 1e-15);
    EXPECT_NEAR(P(5, 4), 0.7, 1e-15);
    EXPECT_NEAR(P(10, 10), 0.3, 1e-15);  // folded at the truncation
    EXPECT_NEAR(P(9, 10), 0.3, 1e-15);
}

TEST(ReflectedAr1, DegenerateContractionIsIid) {
    auto k = build_reflected_ar1(0.0, -0.5, 1.0);
    for (double u : {0.1, 0.5, 0.9}) {
        EXPECT_EQ(k.inverse_cdf(0.0, u), k.inverse_cdf(5.0, u));
    }
}

TEST(ReflectedAr1, ContractionBoundary) {
    EXPECT_THROW(build_reflected_ar1(1.0, -0.5, 1.0), NotContractive);
    EXPECT_THROW(build_reflected_ar1(-0.1, -0.5, 1.0), InvalidArgument);
}

TEST(ReflectedAr1, EmpiricalContractionMatchesSquaredCoefficient) {
    // Off the boundary the coupled squared difference is exactly a^2 |x-y|^2.
    auto k = build_reflected_ar1(0.5, -0.5, 1.0);
    UniformStream s(8);
    const double x = 14.0, y = 16.0;
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = s.next();
        const double d = k.inverse_cdf(x, u) - k.inverse_cdf(y, u);
        sum += d * d / 4.0;
    }
    EXPECT_NEAR(sum / n, 0.25, 1e-9);
}

// Every zoo kernel passes validation and the monotonicity certificate on its
// default grid.
TEST(ModelZoo, AllKernelsValidateAndAreMonotone) {
    std::vector<MonotoneKernel> zoo;
    zoo.push_back(build_lindley(0.5, 1.0));
    zoo.push_back(build_lindley(0.9, 1.0));
    zoo.push_back(build_birth_death(0.3, 20));
    zoo.push_back(build_birth_death(0.45, 30));
    zoo.push_back(build_lindley_discrete(0.3, 2, 1, 30));
    zoo.push_back(build_reflected_ar1(0.5, -0.5, 1.0));
    zoo.push_back(build_reflected_ar1(0.0, -0.5, 1.0));

    for (const auto& k : zoo) {
        const auto grid = k.default_grid();
        EXPECT_TRUE(validate_kernel(k, grid).pass) << k.name();
        EXPECT_TRUE(check_stochastic_monotonicity(k, grid).monotone) << k.name();
        EXPECT_TRUE(k.declared_monotone()) << k.name();
    }
}
