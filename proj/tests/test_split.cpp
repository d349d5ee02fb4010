#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <vector>

#include "poismc/diagnostics.hpp"
#include "poismc/discrete_solver.hpp"
#include "poismc/models.hpp"
#include "poismc/split.hpp"

using namespace poismc;

namespace {

struct Mm1Fixture {
    MonotoneKernel kernel = build_lindley(0.5, 1.0);
    SplitConfig cfg;
    RewardFunction r = reward_identity();
    double lambda_max = 0.0;

    Mm1Fixture() {
        cfg.b = 2.0;
        cfg.phi = mm1_minorization_measure(0.5, 1.0, 2.0, &lambda_max);
        cfg.lambda = 0.48;
        cfg.v1 = [](double x) { return x / 0.3; };
        cfg.v2 = [](double x) { return 0.5 * x * x + 8.0 * x; };
    }

    std::vector<double> grid() const {
        std::vector<double> g;
        for (int i = 0; i <= 200; ++i) g.push_back(0.05 * i);
        return g;
    }
};

SplitConfig discrete_split(const MonotoneKernel& k, int b, std::optional<double> lambda = {}) {
    SplitConfig cfg;
    double lambda_max = 0.0;
    cfg.phi = discrete_minorization_measure(k, b, &lambda_max);
    cfg.b = b;
    cfg.lambda = lambda.value_or(0.95 * lambda_max);
    cfg.v1 = [](double x) { return x / 0.05; };
    cfg.v2 = [](double x) { return x * x + 40.0 * x; };
    return cfg;
}

}  // namespace

// ------------------------------ split measures -------------------------------

TEST(SplitMeasure, Mm1MinorizationMassClosedForm) {
    double lambda_max = 0.0;
    mm1_minorization_measure(0.5, 1.0, 2.0, &lambda_max);
    // Full mass of the infimum measure: exp(-mu lambda b / (mu + lambda)).
    EXPECT_NEAR(lambda_max, std::exp(-2.0 / 3.0), 1e-12);
}

TEST(SplitMeasure, QuantileCdfConsistency) {
    Mm1Fixture f;
    for (int i = 1; i < 1000; ++i) {
        const double u = i / 1000.0;
        const double y = f.cfg.phi.quantile(u);
        EXPECT_GE(f.cfg.phi.cdf(y), u - 1e-9);
        if (y > 0.0) {
            EXPECT_LE(f.cfg.phi.cdf(y * (1.0 - 1e-9)), u + 1e-6);
        }
    }
}

TEST(SplitMeasure, DiscreteColumnMinimum) {
    auto k = build_birth_death(0.3, 20);
    double lambda_max = 0.0;
    const auto phi = discrete_minorization_measure(k, 1, &lambda_max);
    // Rows 0 and 1 share only the mass 0.7 at state 0.
    EXPECT_NEAR(lambda_max, 0.7, 1e-14);
    EXPECT_NEAR(phi.mass_at(0.0), 1.0, 1e-14);
    EXPECT_NEAR(phi.mass_at(1.0), 0.0, 1e-14);
    EXPECT_EQ(phi.quantile(0.5), 0.0);
}

// ---------------------------- verify_assumption1 -----------------------------

TEST(VerifyAssumption, ShippedMm1ConfigPasses) {
    Mm1Fixture f;
    const auto grid = f.grid();
    const auto rep = verify_assumption1(f.cfg, f.kernel, f.r, grid);
    EXPECT_TRUE(rep.pass);
    for (const auto& c : rep.conditions) {
        EXPECT_TRUE(c.pass) << c.name << " margin " << c.margin;
    }
}

TEST(VerifyAssumption, ZeroLambdaRejected) {
    Mm1Fixture f;
    f.cfg.lambda = 0.0;
    EXPECT_THROW(verify_assumption1(f.cfg, f.kernel, f.r, f.grid()), InvalidArgument);
}

TEST(VerifyAssumption, TrivialDriftFailsUnitCondition) {
    Mm1Fixture f;
    f.cfg.v1 = [](double) { return 0.0; };
    const auto rep = verify_assumption1(f.cfg, f.kernel, f.r, f.grid());
    EXPECT_FALSE(rep.pass);
    bool found = false;
    for (const auto& c : rep.conditions) {
        if (c.name == "c_v1_unit_drift") {
            found = true;
            EXPECT_FALSE(c.pass);
        }
    }
    EXPECT_TRUE(found);
}

TEST(VerifyAssumption, PhiOutsideKernelSupportRejected) {
    // Discrete kernel that never reaches state 2 from the small set, paired
    // with a phi that puts mass there.
    Eigen::MatrixXd P(3, 3);
    P << 0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5;
    auto k = MonotoneKernel::discrete(P, false, "gap");
    SplitConfig cfg;
    cfg.b = 1.0;
    cfg.lambda = 0.25;
    cfg.v1 = [](double x) { return x; };
    cfg.v2 = [](double x) { return x * x; };
    cfg.phi.discrete = true;
    cfg.phi.atom0 = 0.0;
    cfg.phi.mass_at = [](double y) { return y == 2.0 ? 1.0 : 0.0; };
    cfg.phi.cdf = [](double y) { return y >= 2.0 ? 1.0 : 0.0; };
    cfg.phi.quantile = [](double) { return 2.0; };
    const std::vector<double> grid{0.0, 1.0, 2.0};
    EXPECT_THROW(verify_assumption1(cfg, k, reward_identity(), grid),
                 MinorizationUnsupported);
}

// -------------------------------- split_step ---------------------------------

TEST(SplitStep, DegenerateSplitAlwaysRegenerates) {
    auto k = build_birth_death(0.3, 20);
    auto cfg = discrete_split(k, 0, 1.0);  // small set {0}: lambda_max = 1
    UniformStream s(5);
    for (int i = 0; i < 200; ++i) {
        const auto [next, regen] = split_step(cfg, k, 0.0, s);
        EXPECT_TRUE(regen);
        (void)next;
    }
}

TEST(SplitStep, AboveSmallSetNeverRegenerates) {
    Mm1Fixture f;
    UniformStream s(6);
    for (int i = 0; i < 500; ++i) {
        const auto [next, regen] = split_step(f.cfg, f.kernel, 5.0, s);
        EXPECT_FALSE(regen);
        (void)next;
    }
}

TEST(SplitStep, MixtureReconstructsOneStepLaw) {
    // Marginally the split step from x <= b must sample F(x, .).
    Mm1Fixture f;
    UniformStream s(7);
    const double x = 1.0;
    std::vector<double> draws;
    draws.reserve(100000);
    for (int i = 0; i < 100000; ++i) {
        draws.push_back(split_step(f.cfg, f.kernel, x, s).first);
    }
    const auto ks =
        ks_one_sample(draws, [&](double y) { return f.kernel.cdf(x, y); }, 0.01);
    EXPECT_TRUE(ks.pass) << "D=" << ks.statistic;
}

TEST(SplitStep, DiscreteMixtureReconstructsRow) {
    auto k = build_lindley_discrete(0.3, 2, 1, 15);
    auto cfg = discrete_split(k, 1);
    UniformStream s(8);
    const int n = 100000;
    std::vector<long> counts(16, 0);
    for (int i = 0; i < n; ++i) {
        ++counts[static_cast<std::size_t>(split_step(cfg, k, 1.0, s).first)];
    }
    const auto& P = k.matrix();
    for (int j = 0; j < 16; ++j) {
        const double p = P(1, j);
        const double p_hat = static_cast<double>(counts[static_cast<std::size_t>(j)]) / n;
        const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / n);
        EXPECT_NEAR(p_hat, p, 5.0 * se + 1e-12) << "state " << j;
    }
}

// ------------------------------ simulate_cycle -------------------------------

TEST(SimulateCycle, DegenerateSplitGivesUnitCycles) {
    auto k = build_birth_death(0.3, 20);
    auto cfg = discrete_split(k, 0, 1.0);
    UniformStream s(9);
    const auto cycle = simulate_cycle(cfg, k, reward_identity(), 0.0, s);
    EXPECT_EQ(cycle.tau, 1);
    ASSERT_EQ(cycle.path.size(), 1u);
    EXPECT_EQ(cycle.path[0], 0.0);
}

TEST(SimulateCycle, VisitIdentityAndGeometricTail) {
    Mm1Fixture f;
    UniformStream s(10);
    const long n = 10000;
    std::vector<double> visits;
    visits.reserve(n);
    std::optional<double> start;
    for (long i = 0; i < n; ++i) {
        const auto c = simulate_cycle(f.cfg, f.kernel, f.r, start, s);
        EXPECT_GE(c.tau, 1);
        visits.push_back(static_cast<double>(c.small_set_visits));
        start = c.regen_state;
    }
    double mean = 0.0;
    for (double v : visits) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : visits) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    EXPECT_NEAR(mean, 1.0 / f.cfg.lambda, 3.0 * se);

    // Number of small-set visits per cycle is geometric(lambda):
    // P(visits > k) = (1 - lambda)^k.
    for (int k_tail = 1; k_tail <= 5; ++k_tail) {
        long count = 0;
        for (double v : visits) count += (v > k_tail);
        const double p_hat = static_cast<double>(count) / static_cast<double>(n);
        const double p = std::pow(1.0 - f.cfg.lambda, k_tail);
        const double half = 2.576 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        EXPECT_NEAR(p_hat, p, half + 1.0 / static_cast<double>(n)) << "k=" << k_tail;
    }
}

TEST(SimulateCycle, CycleCapOverflows) {
    Mm1Fixture f;
    f.cfg.cycle_cap = 2;
    UniformStream s(11);
    EXPECT_THROW(
        {
            for (int i = 0; i < 200; ++i) {
                simulate_cycle(f.cfg, f.kernel, f.r, 9.0, s);
            }
        },
        CycleOverflow);
}

// ------------------------------- estimate_pi_r -------------------------------

TEST(EstimatePiR, ConstantRewardIsExact) {
    Mm1Fixture f;
    UniformStream s(12);
    const auto est = estimate_pi_r(f.cfg, f.kernel, reward_constant(3.25), 200, s);
    EXPECT_NEAR(est.value, 3.25, 1e-12);
}

TEST(EstimatePiR, Mm1MeanWaitWithinThreeSe) {
    Mm1Fixture f;
    UniformStream s(13);
    const auto est = estimate_pi_r(f.cfg, f.kernel, f.r, 10000, s);
    EXPECT_NEAR(est.value, 1.0, 3.0 * est.se);
    EXPECT_GT(est.se, 0.0);
}

TEST(EstimatePiR, DiscreteIndicatorMatchesExactStationaryAtom) {
    auto k = build_lindley_discrete(0.3, 2, 1, 30);
    auto cfg = discrete_split(k, 1);
    RewardFunction at_zero;
    at_zero.eval = [](double x) { return x < 0.5 ? 1.0 : 0.0; };
    at_zero.name = "indicator_zero";
    UniformStream s(14);
    const auto est = estimate_pi_r(cfg, k, at_zero, 10000, s);
    const auto pi = stationary_distribution(k);
    EXPECT_NEAR(est.value, pi(0), 3.0 * est.se);
}

TEST(EstimatePiR, RequiresMinimumCycles) {
    Mm1Fixture f;
    UniformStream s(15);
    EXPECT_THROW(estimate_pi_r(f.cfg, f.kernel, f.r, 10, s), InvalidArgument);
}

// -------------------------------- estimate_g ---------------------------------

TEST(EstimateG, ConstantRewardIsZeroWithinSe) {
    Mm1Fixture f;
    UniformStream s(16);
    const std::vector<double> xs{0.0, 2.0, 5.0};
    const auto sol = estimate_g(f.cfg, f.kernel, reward_constant(2.0), 2.0, xs, 500, s);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        EXPECT_NEAR(sol.g[i], 0.0, 1e-12);
    }
}

TEST(EstimateG, DiscreteLindleyMatchesExactRegenerativeSolve) {
    auto k = build_lindley_discrete(0.3, 2, 1, 30);
    auto cfg = discrete_split(k, 0, 1.0);  // regeneration = visiting state 0
    const auto exact = anchored(solve_regenerative(k, reward_identity(), 0), 0.0);

    UniformStream s(17);
    const std::vector<double> xs{0.0, 1.0, 3.0, 6.0};
    const auto pi = stationary_distribution(k);
    double pi_r = 0.0;
    for (int i = 0; i < k.n_states(); ++i) pi_r += pi(i) * static_cast<double>(i);
    const auto mc = estimate_g(cfg, k, reward_identity(), pi_r, xs, 20000, s);

    // Both solve the same equation; compare anchored differences.
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const double mc_diff = mc.g[i] - mc.g[0];
        const double exact_diff = exact.value_at(xs[i]) - exact.value_at(xs[0]);
        const double slack = mc.ci_halfwidth[i] + mc.ci_halfwidth[0];
        EXPECT_NEAR(mc_diff, exact_diff, slack) << "x=" << xs[i];
    }
}

TEST(EstimateG, Mm1PointEstimatesNondecreasingWithinCi) {
    Mm1Fixture f;
    UniformStream s(18);
    const std::vector<double> xs{0.0, 1.0, 2.0, 4.0, 8.0};
    const auto sol = estimate_g(f.cfg, f.kernel, f.r, 1.0, xs, 4000, s);
    EXPECT_TRUE(nondecreasing_within_ci(sol));
    EXPECT_EQ(sol.method, SolveMethod::monte_carlo);
    EXPECT_EQ(sol.ci_halfwidth.size(), xs.size());
}

TEST(EstimateG, OverloadEstimatesPiRFirst) {
    Mm1Fixture f;
    UniformStream s(27);
    const std::vector<double> xs{0.0, 2.0};
    const auto sol = estimate_g(f.cfg, f.kernel, f.r, xs, 3000, s);
    EXPECT_NEAR(sol.pi_r, 1.0, 0.15);  // loose: pi_r is itself estimated
    EXPECT_LT(sol.g[0], sol.g[1]);
}

// --------------------------------- rn_weight ---------------------------------

TEST(RnWeight, IdenticalLawsGiveConstantLambda) {
    // Small set {0}: phi equals the row of P at 0, so w(0, y) = lambda.
    auto k = build_birth_death(0.3, 20);
    auto cfg = discrete_split(k, 0, 0.3);
    for (double y : {0.0, 1.0}) {
        if (k.matrix()(0, static_cast<int>(y)) > 0.0) {
            EXPECT_NEAR(rn_weight(cfg, k, 0.0, y), 0.3, 1e-12);
        }
    }
}

TEST(RnWeight, IntegralIdentityEqualsLambda) {
    Mm1Fixture f;
    UniformStream s(19);
    const double x = 1.5;
    double sum = 0.0;
    const int n = 100000;
    long clamps = 0;
    for (int i = 0; i < n; ++i) {
        bool clamped = false;
        sum += rn_weight(f.cfg, f.kernel, x, f.kernel.inverse_cdf(x, s.next()), &clamped);
        clamps += clamped;
    }
    EXPECT_EQ(clamps, 0);
    EXPECT_NEAR(sum / n, f.cfg.lambda, 0.005);  // binomial-scale se ~ 0.0016
}

TEST(RnWeight, ZeroPhiMassGivesZeroWeight) {
    auto k = build_birth_death(0.3, 20);
    auto cfg = discrete_split(k, 1);  // phi = point mass at 0
    EXPECT_EQ(rn_weight(cfg, k, 1.0, 2.0), 0.0);
}

TEST(RnWeight, UnsupportedPhiMassThrows) {
    auto k = build_birth_death(0.3, 20);
    auto cfg = discrete_split(k, 1);
    cfg.phi.mass_at = [](double y) { return y == 5.0 ? 1.0 : 0.0; };
    // From x=1 the chain cannot reach state 5 in one step.
    EXPECT_THROW(rn_weight(cfg, k, 1.0, 5.0), MinorizationUnsupported);
}

TEST(RnWeight, LambdaAboveMinorizationMassViolatesResidual) {
    // lambda above the available common mass makes the residual kernel
    // negative somewhere; the driver must refuse to sample from it.
    auto k = build_birth_death(0.3, 10);
    auto cfg = discrete_split(k, 1);
    cfg.lambda = 0.85;  // the common mass over {0,1} is only 0.7
    UniformStream s(28);
    EXPECT_THROW(
        {
            for (int i = 0; i < 50; ++i) split_step(cfg, k, 0.0, s);
        },
        MinorizationViolated);
}

// --------------------------- simulate_coupled_cycle --------------------------

TEST(CoupledCycle, EqualStartsStayIdentical) {
    Mm1Fixture f;
    UniformStream s(20);
    const auto c = simulate_coupled_cycle(f.cfg, f.kernel, 1.5, 1.5, s);
    EXPECT_EQ(c.lower_path, c.upper_path);
    ASSERT_TRUE(c.tau_lower_early.has_value());
    EXPECT_EQ(*c.tau_lower_early, c.tau);
    EXPECT_TRUE(c.order_held);
}

TEST(CoupledCycle, OrderHeldAcrossManyCycles) {
    Mm1Fixture f;
    UniformStream s(21);
    for (int i = 0; i < 4000; ++i) {
        const auto c = simulate_coupled_cycle(f.cfg, f.kernel, 0.5, 3.0, s);
        ASSERT_TRUE(c.order_held);
        ASSERT_GE(c.tau, 1);
        if (c.tau_lower_early) {
            EXPECT_LE(*c.tau_lower_early, c.tau);
            EXPECT_GE(*c.tau_lower_early, 1);
        }
    }
}

TEST(CoupledCycle, LowerPathLawMatchesPlainCycle) {
    // (path, tau') of the lower path must match (path, tau) of an
    // independently simulated plain cycle from the same start.
    Mm1Fixture f;
    UniformStream sc(22), sp(23);
    const long n = 10000;
    std::vector<double> tau_c, tau_p, state_c, state_p;
    for (long i = 0; i < n; ++i) {
        const auto cc = simulate_coupled_cycle(f.cfg, f.kernel, 1.0, 4.0, sc);
        const long tp = cc.tau_lower_early.value_or(cc.tau);
        tau_c.push_back(static_cast<double>(tp));
        state_c.push_back(cc.lower_path[static_cast<std::size_t>(std::min<long>(5, tp) - 1)]);

        const auto pc = simulate_cycle(f.cfg, f.kernel, f.r, 1.0, sp);
        tau_p.push_back(static_cast<double>(pc.tau));
        state_p.push_back(pc.path[static_cast<std::size_t>(std::min<long>(5, pc.tau) - 1)]);
    }
    EXPECT_TRUE(ks_two_sample(tau_c, tau_p, 0.01).pass);
    EXPECT_TRUE(ks_two_sample(state_c, state_p, 0.01).pass);
}

// ------------------------------ continuity_probe -----------------------------

TEST(ContinuityProbe, ZeroDeltaIsExactlyZero) {
    Mm1Fixture f;
    UniformStream s(24);
    const std::vector<double> deltas{0.0};
    const auto rep = continuity_probe(f.cfg, f.kernel, f.r, 1.0, deltas, 100, s);
    EXPECT_EQ(rep.points[0].estimate, 0.0);
    EXPECT_EQ(rep.points[0].se, 0.0);
}

TEST(ContinuityProbe, DifferencesShrinkWithDelta) {
    Mm1Fixture f;
    UniformStream s(25);
    const std::vector<double> deltas{1.0, 0.1, 0.01};
    const auto rep = continuity_probe(f.cfg, f.kernel, f.r, 1.0, deltas, 20000, s);
    ASSERT_EQ(rep.points.size(), 3u);
    for (const auto& p : rep.points) EXPECT_GE(p.estimate, 0.0);
    EXPECT_LT(rep.points[1].estimate, rep.points[0].estimate);
    EXPECT_LE(rep.points[2].estimate,
              rep.points[1].estimate + 3.0 * (rep.points[1].se + rep.points[2].se));
    EXPECT_LT(rep.points[2].estimate, rep.points[1].estimate);
}

TEST(ContinuityProbe, DiscontinuousRewardRejected) {
    Mm1Fixture f;
    UniformStream s(26);
    const std::vector<double> deltas{0.1};
    EXPECT_THROW(continuity_probe(f.cfg, f.kernel, reward_indicator(1.0), 1.0, deltas, 100, s),
                 InvalidArgument);
}

// -------------------------------- invariants ---------------------------------

TEST(SplitInvariants, MixtureReconstructionExactOnGrid) {
    Mm1Fixture f;
    for (double x : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        for (double y : f.grid()) {
            const double mix = f.cfg.lambda * f.cfg.phi.cdf(y) +
                               (1.0 - f.cfg.lambda) * residual_kernel_cdf(f.cfg, f.kernel, x, y);
            ASSERT_NEAR(mix, f.kernel.cdf(x, y), 1e-10);
        }
    }
}

TEST(SplitInvariants, ResidualSurvivalMonotoneInState) {
    // 1 - G(v, w) non-decreasing in v for each w.
    Mm1Fixture f;
    for (double w : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        double prev = 2.0;
        for (double v : {0.0, 0.4, 0.8, 1.2, 1.6, 2.0}) {
            const double g = residual_kernel_cdf(f.cfg, f.kernel, v, w);
            EXPECT_LE(g, prev + 1e-12);
            prev = g;
        }
    }
}

TEST(SplitInvariants, DiscreteResidualRowsReconstructTransition) {
    auto k = build_lindley_discrete(0.3, 2, 1, 15);
    auto cfg = discrete_split(k, 1);
    detail::SplitDriver driver(cfg, k);
    const auto& P = k.matrix();
    for (int x = 0; x <= 1; ++x) {
        const auto q = driver.residual_row(x);
        for (int j = 0; j < k.n_states(); ++j) {
            const double mix = cfg.lambda * cfg.phi.mass_at(j) + (1.0 - cfg.lambda) * q(j);
            ASSERT_NEAR(mix, P(x, j), 1e-12);
        }
    }
}
