#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "arnqs/error.hpp"
#include "arnqs/sampling.hpp"
#include "test_util.hpp"

using namespace arnqs;

namespace {

std::vector<double> empirical(const SampleBatch& b)
{
    const int L = static_cast<int>(b.configs.cols());
    std::vector<double> freq(std::size_t{1} << L, 0.0);
    for (Eigen::Index r = 0; r < b.configs.rows(); ++r) {
        std::uint64_t idx = 0;
        for (int n = 0; n < L; ++n) idx = (idx << 1) | b.configs(r, n);
        freq[idx] += 1.0 / static_cast<double>(b.size());
    }
    return freq;
}

std::vector<double> enumerated(const ModelSpec& spec, const ParameterSet& p)
{
    const auto amps = enumerate_log_amplitudes(spec, p);
    Eigen::VectorXd w = amps.log_modulus_sq.array().exp();
    w /= w.sum();
    return {w.data(), w.data() + w.size()};
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b)
{
    double tv = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
    return 0.5 * tv;
}

} // namespace

TEST(Ancestral, ZeroWidthIsUniform)
{
    RnnSpec s;
    s.sites = 8;
    s.hidden = 4;
    RngStream rng(1);
    const auto p = init_gaussian(s, 0.0, rng);
    const auto b = ancestral_sample(s, p, 100000, rng);
    EXPECT_EQ(b.origin, SampleOrigin::Ancestral);
    const double tol = 4.0 * std::sqrt(0.25 / 1e5);
    for (int n = 0; n < 8; ++n) EXPECT_NEAR(b.configs.col(n).cast<double>().mean(), 0.5, tol);
    for (Eigen::Index i = 0; i < 100; ++i) EXPECT_NEAR(b.log_modulus_sq[i], -8 * std::log(2.0), 1e-12);
}

TEST(Ancestral, MatchesEnumeration)
{
    RngStream rng(2);
    for (const auto& spec : arnqs::testing::spec_zoo(4, Activation::Softmax)) {
        const auto p = init_gaussian(spec, 1.0, rng);
        const auto b = ancestral_sample(spec, p, 100000, rng);
        EXPECT_LT(total_variation(empirical(b), enumerated(spec, p)), 0.02);
        const auto direct = log_amplitudes(spec, p, b.configs);
        EXPECT_LT((direct.log_modulus_sq - b.log_modulus_sq).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((direct.phase - b.phases).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Ancestral, RejectsIdentityOutput)
{
    RnnSpec s;
    s.sites = 3;
    s.g = Activation::Identity;
    RngStream rng(1);
    const auto p = init_gaussian(s, 1.0, rng);
    try {
        ancestral_sample(s, p, 10, rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("mcmc_sample"), std::string::npos);
    }
}

TEST(Ancestral, SoftmaxCollapseAtLargeWidth)
{
    RnnSpec s;
    s.sites = 20;
    s.hidden = 20;
    RngStream rng(2024);
    int single = 0;
    for (int m = 0; m < 10; ++m) {
        RngStream model_rng(replica_seed(77, m));
        const auto p = init_gaussian(s, 50.0, model_rng);
        const auto census = distinct_config_census(ancestral_sample(s, p, 1000, rng));
        if (census.distinct_count == 1) ++single;
        EXPECT_LE(census.distinct_count, 4u);
    }
    EXPECT_GE(single, 4);
    s.g = Activation::SquareModulus;
    for (int m = 0; m < 5; ++m) {
        RngStream model_rng(replica_seed(78, m));
        const auto p = init_gaussian(s, 50.0, model_rng);
        EXPECT_GT(distinct_config_census(ancestral_sample(s, p, 1000, rng)).distinct_count, 100u);
    }
}

TEST(Ancestral, ExchangeableUnderSeedPermutation)
{
    RnnSpec s;
    s.sites = 6;
    s.hidden = 5;
    RngStream init(8);
    const auto p = init_gaussian(s, 1.0, init);
    std::vector<double> means;
    for (std::uint64_t seed : {1ull, 2ull}) {
        RngStream rng(seed);
        const auto b = ancestral_sample(s, p, 50000, rng);
        means.push_back(b.configs.cast<double>().mean());
    }
    EXPECT_NEAR(means[0], means[1], 4.0 * std::sqrt(2 * 0.25 / 50000.0));
}

TEST(Mcmc, AcceptanceOfIdenticalProposal)
{
    EXPECT_EQ(metropolis_acceptance(-3.2, -3.2), 1.0);
    EXPECT_EQ(metropolis_acceptance(-1.0, 0.0), 1.0);
    EXPECT_NEAR(metropolis_acceptance(0.0, -1.0), std::exp(-1.0), 1e-15);
    EXPECT_EQ(metropolis_acceptance(-INFINITY, -INFINITY), 1.0);
}

TEST(Mcmc, UnnormalizedTwoSiteDistribution)
{
    RnnSpec s;
    s.sites = 2;
    s.hidden = 3;
    s.g = Activation::Identity;
    RngStream init(5);
    const auto p = init_gaussian(s, 1.0, init);
    McmcConfig cfg;
    cfg.seed = 17;
    const auto b = mcmc_sample(s, p, 100000, cfg);
    EXPECT_EQ(b.origin, SampleOrigin::Mcmc);
    EXPECT_LT(total_variation(empirical(b), enumerated(s, p)), 0.02);
}

TEST(Mcmc, TransitionMatrixStationary)
{
    RnnSpec s;
    s.sites = 2;
    s.hidden = 3;
    s.g = Activation::Identity;
    RngStream init(6);
    const auto p = init_gaussian(s, 1.0, init);
    const Eigen::MatrixXd t = mcmc_transition_matrix(s, p);
    for (Eigen::Index c = 0; c < t.cols(); ++c) EXPECT_NEAR(t.col(c).sum(), 1.0, 1e-14);
    Eigen::VectorXd v = Eigen::VectorXd::Constant(4, 0.25);
    for (int k = 0; k < 5000; ++k) v = t * v;
    const auto target = enumerated(s, p);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(v[i], target[i], 1e-3);
}

TEST(Mcmc, AgreesWithAncestralMagnetization)
{
    RnnSpec s;
    s.sites = 6;
    s.hidden = 6;
    RngStream init(9);
    const auto p = init_gaussian(s, 0.8, init);
    RngStream rng(10);
    const auto a = ancestral_sample(s, p, 40000, rng);
    McmcConfig cfg;
    cfg.seed = 11;
    cfg.thinning = 12;
    const auto m = mcmc_sample(s, p, 40000, cfg);
    for (int n = 0; n < 6; ++n) {
        const double pa = a.configs.col(n).cast<double>().mean();
        const double pm = m.configs.col(n).cast<double>().mean();
        double bvar = 0.0;
        for (int k = 0; k < 50; ++k) {
            const double bm = m.configs.col(n).segment(k * 800, 800).cast<double>().mean();
            bvar += (bm - pm) * (bm - pm);
        }
        const double se_m2 = bvar / (50.0 * 49.0);
        const double se = std::sqrt(pa * (1 - pa) / 40000.0 + se_m2);
        EXPECT_LE(std::abs(pa - pm), 4.0 * se) << "site " << n;
    }
}

TEST(Census, Basics)
{
    SampleBatch b;
    b.configs = Configs::Ones(50, 5);
    b.log_modulus_sq.setZero(50);
    b.phases.setZero(50);
    auto c = distinct_config_census(b);
    EXPECT_EQ(c.distinct_count, 1u);
    EXPECT_EQ(c.top_frequency, 1.0);
    EXPECT_EQ(c.top_config, std::vector<std::uint8_t>(5, 1));
    b.configs(3, 2) = 0;
    c = distinct_config_census(b);
    EXPECT_EQ(c.distinct_count, 2u);
    EXPECT_DOUBLE_EQ(c.top_frequency, 49.0 / 50.0);
    EXPECT_THROW(distinct_config_census(SampleBatch{}), Error);
}

TEST(Census, UniformStateIsMostlyDistinct)
{
    RnnSpec s;
    s.sites = 20;
    s.hidden = 3;
    RngStream rng(3);
    const auto p = init_gaussian(s, 0.0, rng);
    EXPECT_GE(distinct_config_census(ancestral_sample(s, p, 1000, rng)).distinct_count, 990u);
}

TEST(BatchCsv, WritesOneRowPerSample)
{
    RnnSpec s;
    s.sites = 3;
    RngStream rng(3);
    const auto p = init_gaussian(s, 1.0, rng);
    const auto b = ancestral_sample(s, p, 5, rng);
    const auto path = std::filesystem::temp_directory_path() / "arnqs_batch.csv";
    write_batch_csv(path, b);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "config,log_modulus_sq,phase");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_EQ(line.find(','), 3u);
    }
    EXPECT_EQ(rows, 5);
    std::filesystem::remove(path);
}
