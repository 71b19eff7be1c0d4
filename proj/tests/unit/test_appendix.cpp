#include <gtest/gtest.h>

#include <cmath>

#include "arnqs/appendix.hpp"
#include "arnqs/error.hpp"
#include "arnqs/numerics.hpp"

using namespace arnqs;

TEST(Sigmoid, Examples)
{
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_NEAR(sigmoid(700.0), 1.0, 1e-15);
    EXPECT_GE(sigmoid(-745.0), 0.0);
    EXPECT_TRUE(std::isfinite(sigmoid(-1e6)));
    for (double z : {0.1, 1.0, 10.0}) EXPECT_NEAR(sigmoid(-z), 1.0 - sigmoid(z), 1e-15);
}

TEST(LogitNormal, PdfExamplesAndNormalization)
{
    EXPECT_NEAR(logit_normal_pdf(0.5, {0.0, 1.0}), 1.595769, 1e-6);
    for (double y : {0.01, 0.2, 0.45}) EXPECT_NEAR(logit_normal_pdf(y, {0.0, 2.0}), logit_normal_pdf(1 - y, {0.0, 2.0}), 1e-12);
    for (double s : {0.5, 1.0, 5.0, 20.0}) EXPECT_NEAR(logit_normal_total_mass({0.0, s}), 1.0, 1e-6) << s;
    EXPECT_NEAR(logit_normal_total_mass({0.7, 1.5}), 1.0, 1e-6);
    EXPECT_NEAR(logit_normal_total_mass({-3.0, 20.0}), 1.0, 1e-6);
    EXPECT_NEAR(integrate_1d([](double y) { return logit_normal_pdf(y, {0.0, 1.5}); }, 0.0, 1.0, 1e-10), 1.0, 1e-6);
    EXPECT_THROW(logit_normal_pdf(0.0, {}), Error);
    EXPECT_THROW(logit_normal_pdf(1.2, {}), Error);
    EXPECT_THROW(logit_normal_pdf(0.5, {0.0, 0.0}), ConfigError);
}

TEST(LogitNormal, CdfExamplesAndConsistency)
{
    EXPECT_EQ(logit_normal_cdf(0.5, {0.0, 3.0}), 0.5);
    EXPECT_NEAR(logit_normal_cdf(1.0 - 1e-15, {0.0, 1.0}), 1.0, 1e-12);
    const LogitNormalParams p{0.0, 2.0};
    const double h = 1e-6;
    const double fd = (logit_normal_cdf(0.3 + h, p) - logit_normal_cdf(0.3 - h, p)) / (2 * h);
    EXPECT_LT(std::abs(fd / logit_normal_pdf(0.3, p) - 1.0), 1e-4);
    double prev = 0.0;
    for (int i = 1; i < 100; ++i) {
        const double y = i / 100.0;
        const double c = logit_normal_cdf(y, p);
        EXPECT_GT(c, prev);
        prev = c;
        if (i % 10 == 0)
            EXPECT_NEAR(integrate_1d([&](double t) { return logit_normal_pdf(t, p); }, 0.0, y, 1e-10), c, 1e-6);
    }
}

TEST(MassOutsideEps, ExamplesAndMonotonicity)
{
    EXPECT_EQ(mass_outside_eps(1.0, 0.5), 0.0);
    EXPECT_NEAR(mass_outside_eps(0.1, 0.01), 1.0, 1e-12);
    // 1 - 2 Phi(-6.9068 / 50) = 0.10987, so the width-50 mass sits just above 0.1
    EXPECT_NEAR(mass_outside_eps(50.0, 1e-3), 0.109866, 1e-6);
    EXPECT_NEAR(mass_outside_eps(50.0, 1e-3), 1.0 - 2.0 * normal_cdf(std::log(1e-3 / (1 - 1e-3)) / 50.0), 1e-15);
    EXPECT_LT(mass_outside_eps(1e9, 1e-3), 1e-8);
    double prev = 1.0 + 1e-9;
    for (double s = 0.25; s < 400; s *= 1.5) {
        const double m = mass_outside_eps(s, 0.05);
        EXPECT_LT(m, prev);
        prev = m;
    }
    EXPECT_THROW(mass_outside_eps(1.0, 0.0), ConfigError);
    EXPECT_THROW(mass_outside_eps(1.0, 0.6), ConfigError);
}

TEST(EmpiricalMarginal, TvAndEdgeMass)
{
    RngStream rng(42);
    const auto one = empirical_marginal_check(1.0, 1000000, rng);
    EXPECT_LT(one.tv, 0.01);
    double total = 0.0;
    for (double r : one.reference) total += r;
    EXPECT_NEAR(total, 1.0, 1e-12);
    const auto wide = empirical_marginal_check(20.0, 1000000, rng);
    EXPECT_NEAR(wide.edge_mass, 1.0 - mass_outside_eps(20.0, 0.02), 0.003);
    EXPECT_GT(wide.edge_mass, 0.8);

    RngStream a(5), b(5);
    EXPECT_EQ(empirical_marginal_check(2.0, 20000, a).empirical, empirical_marginal_check(2.0, 20000, b).empirical);
    EXPECT_THROW(empirical_marginal_check(1.0, 100, a), ConfigError);
}

TEST(Collapse, ModulusNeverCollapsesAndDominantConfigsAreIndependent)
{
    RnnSpec s;
    s.sites = 20;
    s.hidden = 20;
    s.g = Activation::SquareModulus;
    const auto mod = product_collapse_check(s, 50.0, 5, 1000, 3);
    EXPECT_EQ(mod.fraction_single, 0.0);
    for (auto d : mod.distinct) EXPECT_GT(d, 100u);

    s.g = Activation::Softmax;
    const auto sm = collapse_census(s, 50.0, 50, 200, 11, 2);
    EXPECT_TRUE(sm.hamming_consistent) << sm.mean_pairwise_hamming;
    EXPECT_GT(sm.fraction_single, 0.3);
    for (auto d : sm.distinct) EXPECT_LE(d, 10u);
    EXPECT_THROW(product_collapse_check(s, 5.0, 10, 100, 0), ConfigError);
}

TEST(Collapse, FractionGrowsWithWidth)
{
    RnnSpec s;
    s.sites = 20;
    s.hidden = 20;
    const double small = collapse_census(s, 1.0, 20, 500, 4).fraction_single;
    const double large = collapse_census(s, 50.0, 20, 500, 4).fraction_single;
    EXPECT_EQ(small, 0.0);
    EXPECT_GT(large, small);
}

TEST(AppendixReport, JsonShape)
{
    AppendixReport rep;
    rep.checks.push_back({"a", 1.0, "x", true});
    rep.checks.push_back({"b", 2.0, "y", false});
    const auto j = rep.to_json();
    EXPECT_FALSE(j["all_passed"].get<bool>());
    EXPECT_EQ(j["checks"].size(), 2u);
    EXPECT_EQ(j["checks"][1]["name"], "b");
}
