#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "poismc/diagnostics.hpp"
#include "poismc/rng.hpp"

using poismc::UniformStream;

TEST(UniformStream, DeterministicReplay) {
    UniformStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(UniformStream, RandomAccessMatchesSequential) {
    UniformStream a(7);
    std::vector<double> seq;
    for (int i = 0; i < 100; ++i) seq.push_back(a.next());
    UniformStream b(7);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(seq[static_cast<std::size_t>(i)], b.at(static_cast<std::uint64_t>(i)));
    }
}

TEST(UniformStream, OpenUnitInterval) {
    UniformStream s(1);
    for (int i = 0; i < 100000; ++i) {
        const double u = s.next();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(UniformStream, UniformitySmokeTest) {
    UniformStream s(2024);
    std::vector<double> draws;
    draws.reserve(100000);
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = s.next();
        draws.push_back(u);
        sum += u;
        sum2 += u * u;
    }
    const double mean = sum / 1e5;
    const double var = sum2 / 1e5 - mean * mean;
    EXPECT_NEAR(mean, 0.5, 0.005);          // se ~ 0.0009
    EXPECT_NEAR(var, 1.0 / 12.0, 0.003);    // se ~ 0.0003

    const auto ks = poismc::ks_one_sample(
        draws, [](double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }, 0.01);
    EXPECT_TRUE(ks.pass) << "KS statistic " << ks.statistic;
}

TEST(UniformStream, SubstreamsDiffer) {
    UniformStream base(99);
    auto s0 = base.substream(0);
    auto s1 = base.substream(1);
    int equal = 0;
    for (int i = 0; i < 1000; ++i) equal += (s0.next() == s1.next());
    EXPECT_EQ(equal, 0);
}

TEST(UniformStream, SkipAdvancesCounter) {
    UniformStream a(3), b(3);
    a.skip(10);
    for (int i = 0; i < 10; ++i) b.next();
    EXPECT_EQ(a.next(), b.next());
    EXPECT_EQ(a.index(), 11u);
}

TEST(UniformStream, SeedsDecorrelated) {
    // Adjacent seeds must not produce correlated sequences.
    UniformStream a(1000), b(1001);
    double dot = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) dot += (a.next() - 0.5) * (b.next() - 0.5);
    const double corr = dot / n / (1.0 / 12.0);
    EXPECT_LT(std::abs(corr), 0.05);
}
