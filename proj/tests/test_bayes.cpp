#include "oracles.hpp"

#include <copydet/bayes.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace copydet;

TEST(ScoreSameValue, SharedFalseValue)
{
    ModelParams prm;
    EXPECT_NEAR(score_same_value(0.01, 0.2, 0.2, prm), 3.89, 0.005);
}

TEST(ScoreSameValue, PhoenixEntry)
{
    // the printed table value is 1.62; the formula gives 1.602
    ModelParams prm;
    EXPECT_NEAR(score_same_value(0.95, 0.2, 0.2, prm), 1.62, 0.02);
}

TEST(ScoreSameValue, NoSelectivityIsZero)
{
    ModelParams prm;
    prm.s = 0.0;
    EXPECT_DOUBLE_EQ(score_same_value(0.3, 0.7, 0.4, prm), 0.0);
    EXPECT_DOUBLE_EQ(score_diff_value(prm), 0.0);
}

TEST(ScoreSameValue, MatchesDefinition)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    ModelParams prm;
    for (int i = 0; i < 2000; ++i) {
        double p = u(rng), a1 = u(rng), a2 = u(rng);
        auto c = contribution(p, a1, a2, prm);
        EXPECT_NEAR(c.forward, oracle::same_value(p, a1, a2, prm.s, prm.n), 1e-9);
        EXPECT_NEAR(c.backward, oracle::same_value(p, a2, a1, prm.s, prm.n), 1e-9);
    }
}

TEST(ScoreSameValue, PositiveAndDecreasingInProbability)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        ModelParams prm;
        prm.s = 0.05 + 0.9 * u(rng);
        prm.n = 1 + int(u(rng) * 100);
        double a1 = 0.01 + 0.98 * u(rng), a2 = 0.01 + 0.98 * u(rng);
        double p1 = 0.01 + 0.97 * u(rng);
        double p2 = p1 + 0.01;
        double c1 = score_same_value(p1, a1, a2, prm);
        double c2 = score_same_value(p2, a1, a2, prm);
        EXPECT_GT(c1, 0.0);
        // strictly decreasing for the false-value odds 1/n below the true-value odds
        if ((1.0 - a1) / prm.n < a1) {
            EXPECT_GT(c1, c2) << "p=" << p1 << " a1=" << a1 << " a2=" << a2 << " n=" << prm.n;
        }
        EXPECT_LT(score_diff_value(prm), 0.0);
    }
}

TEST(ScoreSameValue, ClampsDegenerateInputs)
{
    ModelParams prm;
    EXPECT_TRUE(std::isfinite(score_same_value(0.0, 1.0, 0.0, prm)));
    EXPECT_TRUE(std::isfinite(score_same_value(1.0, 0.0, 1.0, prm)));
}

TEST(ScoreDiffValue, Values)
{
    ModelParams prm;
    EXPECT_NEAR(score_diff_value(prm), -1.609, 0.001);
    prm.s = 0.5;
    EXPECT_NEAR(score_diff_value(prm), -0.693, 0.001);
    prm.s = 1e-12;
    EXPECT_NEAR(score_diff_value(prm), 0.0, 1e-9);
}

TEST(Posterior, Examples)
{
    ModelParams prm;
    double p = posterior_no_copy(11.58, 11.58, prm);
    EXPECT_GE(p, 2e-5);
    EXPECT_LE(p, 6e-5);
    EXPECT_NEAR(posterior_no_copy(0.04, 0.04, prm), 0.79, 0.01);
    EXPECT_DOUBLE_EQ(posterior_no_copy(-1000, -1000, prm), 1.0);
    EXPECT_NEAR(posterior_no_copy(0, 0, prm), 1.0 / (1.0 + 2 * prm.alpha / prm.beta()), 1e-12);
    EXPECT_GE(posterior_no_copy(1000, 900, prm), 0.0);
    EXPECT_LT(posterior_no_copy(1000, 900, prm), 1e-300);
}

TEST(Posterior, MatchesDefinitionAndStaysInRange)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    ModelParams prm;
    for (int i = 0; i < 5000; ++i) {
        double f = u(rng), b = u(rng);
        double p = posterior_no_copy(f, b, prm);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        EXPECT_NEAR(p, oracle::posterior(f, b, prm), 1e-12);
        double fwd = posterior_copy_forward(f, b, prm);
        double bwd = posterior_copy_forward(b, f, prm);
        EXPECT_NEAR(p + fwd + bwd, 1.0, 1e-12);
    }
}

TEST(Thresholds, Values)
{
    ModelParams prm;
    auto t = thresholds(prm);
    EXPECT_NEAR(t.theta_cp, 2.08, 0.01);
    EXPECT_NEAR(t.theta_ind, 1.39, 0.01);
    prm.alpha = 0.2;
    t = thresholds(prm);
    EXPECT_NEAR(t.theta_cp, std::log(3.0), 1e-9);
    EXPECT_NEAR(t.theta_ind, std::log(1.5), 1e-9);
}

TEST(Thresholds, Soundness)
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 5000; ++i) {
        ModelParams prm;
        prm.alpha = 0.01 + 0.3 * u(rng);
        auto t = thresholds(prm);
        double lo = -20.0;
        // one direction at or above theta_cp: copying
        double c = t.theta_cp + 5.0 * u(rng);
        double other = lo + (c - lo) * u(rng);
        EXPECT_LE(posterior_no_copy(c, other, prm), 0.5);
        // both below theta_ind: no copying
        double f = t.theta_ind - 1e-9 - 5.0 * u(rng);
        double b = t.theta_ind - 1e-9 - 5.0 * u(rng);
        EXPECT_GT(posterior_no_copy(f, b, prm), 0.5);
    }
}

TEST(Thresholds, ThreeWay)
{
    ModelParams prm;
    auto t = thresholds(prm, 0.9, 0.1);
    EXPECT_LE(posterior_no_copy(t.theta_cp, -50, prm), 0.1 + 1e-12);
    EXPECT_GE(posterior_no_copy(t.theta_ind - 1e-9, t.theta_ind - 1e-9, prm), 0.9 - 1e-9);
    EXPECT_EQ(decide(0.95, true), Decision::no_copying);
    EXPECT_EQ(decide(0.5, true), Decision::uncertain);
    EXPECT_EQ(decide(0.05, true), Decision::copying);
    EXPECT_EQ(decide(0.5), Decision::copying);
    EXPECT_EQ(decide(0.50001), Decision::no_copying);
}

TEST(ModelParams, Validation)
{
    ModelParams prm;
    prm.s = 1.0;
    EXPECT_THROW(prm.validate(), ConfigError);
    prm.s = 0.8;
    prm.alpha = 0.6;
    EXPECT_THROW(prm.validate(), ConfigError);
}
