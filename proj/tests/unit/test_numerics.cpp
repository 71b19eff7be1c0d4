#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "arnqs/error.hpp"
#include "arnqs/numerics.hpp"
#include "arnqs/rng.hpp"

using namespace arnqs;

TEST(Rng, DeterministicAndDistinct)
{
    RngStream a(42), b(42), c(43);
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        EXPECT_NE(x, c.next_u64());
    }
}

TEST(Rng, KnownSequence)
{
    // Reference xoshiro256** seeded through splitmix64.
    RngStream r(0);
    std::array<std::uint64_t, 4> s{};
    std::uint64_t x = 0;
    for (auto& v : s) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        v = z ^ (z >> 31);
    }
    auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t expect = rotl(s[1] * 5, 7) * 9;
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        ASSERT_EQ(r.next_u64(), expect);
    }
}

TEST(Rng, UniformChiSquare)
{
    for (std::uint64_t seed : {1ull, 99ull}) {
        RngStream r(seed);
        constexpr int kBins = 20;
        constexpr int kDraws = 100000;
        std::array<int, kBins> counts{};
        for (int i = 0; i < kDraws; ++i) ++counts[static_cast<int>(r.uniform() * kBins)];
        double chi2 = 0.0;
        const double expect = static_cast<double>(kDraws) / kBins;
        for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
        EXPECT_LT(chi2, 43.8); // 99.9% quantile for 19 dof
    }
}

TEST(Rng, BelowIsInRange)
{
    RngStream r(5);
    std::array<int, 3> counts{};
    for (int i = 0; i < 30000; ++i) ++counts[r.below(3)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(GaussianDraw, ZeroWidth)
{
    RngStream r(1);
    EXPECT_EQ(gaussian_draw(5, 0.0, r), std::vector<double>(5, 0.0));
}

TEST(GaussianDraw, Moments)
{
    RngStream r(7);
    const auto x = gaussian_draw(1000000, 1.0, r);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= x.size();
    EXPECT_LT(std::abs(mean), 4.0 / 1000.0);
    EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(GaussianDraw, Deterministic)
{
    RngStream a(3), b(3);
    EXPECT_EQ(gaussian_draw(100, 2.0, a), gaussian_draw(100, 2.0, b));
}

TEST(Eigh, Examples)
{
    Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(2, 2);
    auto e = hermitian_eigh(id);
    EXPECT_NEAR(e.eigenvalues[0], 1.0, 1e-15);
    EXPECT_NEAR(e.eigenvalues[1], 1.0, 1e-15);
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
    d(0, 0) = 0.75;
    d(1, 1) = 0.25;
    e = hermitian_eigh(d);
    EXPECT_NEAR(e.eigenvalues[0], 0.25, 1e-15);
    EXPECT_NEAR(e.eigenvalues[1], 0.75, 1e-15);
    Eigen::MatrixXcd x(2, 2);
    x << 0, 1, 1, 0;
    e = hermitian_eigh(x);
    EXPECT_NEAR(e.eigenvalues[0], -1.0, 1e-15);
    EXPECT_NEAR(e.eigenvalues[1], 1.0, 1e-15);
}

TEST(Eigh, RejectsNonHermitian)
{
    Eigen::MatrixXcd a(2, 2);
    a << 1, 2, 0, 1;
    try {
        hermitian_eigh(a);
        FAIL();
    } catch (const Error& err) {
        EXPECT_NE(std::string(err.what()).find("2.000e+00"), std::string::npos);
    }
}

TEST(Eigh, ReconstructionRandom)
{
    RngStream r(12);
    for (int dim : {3, 17, 64, 256}) {
        Eigen::MatrixXcd g(dim, dim);
        for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = {r.gaussian(), r.gaussian()};
        const Eigen::MatrixXcd a = 0.5 * (g + g.adjoint());
        const auto e = hermitian_eigh(a);
        for (int k = 1; k < dim; ++k) EXPECT_LE(e.eigenvalues[k - 1], e.eigenvalues[k]);
        const Eigen::MatrixXcd rec = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.adjoint();
        EXPECT_LE((rec - a).cwiseAbs().maxCoeff(), 1e-8 * a.cwiseAbs().maxCoeff());
        const Eigen::MatrixXcd v = e.eigenvectors;
        EXPECT_LE((a * v - v * e.eigenvalues.asDiagonal()).cwiseAbs().maxCoeff(), 1e-8 * a.norm());
    }
}

TEST(Eigh, ReconstructionLarge)
{
    RngStream r(13);
    const int dim = 1024;
    Eigen::MatrixXd g(dim, dim);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = r.gaussian();
    const Eigen::MatrixXcd a = (0.5 * (g + g.transpose())).cast<std::complex<double>>();
    const auto e = hermitian_eigh(a);
    const Eigen::MatrixXcd rec = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.adjoint();
    EXPECT_LE((rec - a).cwiseAbs().maxCoeff(), 1e-8 * a.cwiseAbs().maxCoeff());
}

namespace {

std::vector<double> geometric_sizes(double lo, double hi)
{
    std::vector<double> out;
    for (double l = lo; l <= hi; l *= 2) out.push_back(l);
    return out;
}

} // namespace

TEST(EntropyFit, PureLogarithm)
{
    const auto L = geometric_sizes(8, 256);
    std::vector<double> S, err(L.size(), 0.01);
    for (double l : L) S.push_back(1.0 * std::log(l) + 0.5);
    const auto fit = fit_entropy_scaling(L, S, err);
    EXPECT_NEAR(fit.b, 1.0, 0.05);
    EXPECT_NEAR(fit.a, 0.0, 0.05);
    EXPECT_LT(fit.residual_norm, 1e-3);
}

TEST(EntropyFit, Constant)
{
    const auto L = geometric_sizes(8, 256);
    std::vector<double> S(L.size(), 0.7), err(L.size(), 0.01);
    const auto fit = fit_entropy_scaling(L, S, err);
    EXPECT_NEAR(fit.a, 0.0, 1e-3);
    EXPECT_NEAR(fit.b, 0.0, 1e-3);
    EXPECT_NEAR(fit.c, 0.7, 1e-3);
    EXPECT_TRUE(fit.converged);
}

TEST(EntropyFit, Linear)
{
    const auto L = geometric_sizes(8, 128);
    std::vector<double> S, err(L.size(), 0.01);
    for (double l : L) S.push_back(0.5 * l);
    const auto fit = fit_entropy_scaling(L, S, err);
    EXPECT_NEAR(fit.nu, 1.0, 0.05);
    EXPECT_NEAR(fit.a, 0.5, 0.05);
}

TEST(EntropyFit, RecoversGenerator)
{
    const std::vector<double> L{6, 8, 12, 16, 24, 32, 48, 64};
    std::vector<double> S, err(L.size(), 0.02);
    for (double l : L) S.push_back(0.3 * std::pow(l, 0.6) + 0.4 * std::log(l) - 0.2);
    const auto fit = fit_entropy_scaling(L, S, err, 5000);
    for (double l : L) EXPECT_NEAR(evaluate_entropy_fit(fit, l), 0.3 * std::pow(l, 0.6) + 0.4 * std::log(l) - 0.2, 1e-4);
}

TEST(EntropyFit, NeedsFivePoints)
{
    std::vector<double> L{8, 16, 32, 64}, S{1, 2, 3, 4}, e{1, 1, 1, 1};
    EXPECT_THROW(fit_entropy_scaling(L, S, e), Error);
}

TEST(PowerLaw, Examples)
{
    const std::vector<double> x{10, 20, 30, 40, 50, 60};
    std::vector<double> y1, y2, y3(x.size(), 0.42);
    for (double v : x) {
        y1.push_back(2.0 * std::pow(v, -0.5));
        y2.push_back(1.0 / v + 0.3);
    }
    const auto f1 = fit_power_law(x, y1);
    EXPECT_NEAR(f1.exponent, 0.5, 0.02);
    const auto f2 = fit_power_law(x, y2);
    EXPECT_NEAR(f2.exponent, 1.0, 0.02);
    EXPECT_NEAR(f2.offset, 0.3, 1e-3);
    const auto f3 = fit_power_law(x, y3);
    EXPECT_NEAR(f3.amplitude, 0.0, 1e-12);
    EXPECT_NEAR(f3.offset, 0.42, 1e-12);
    const std::vector<double> same{2, 2, 2, 2};
    EXPECT_THROW(fit_power_law(same, y3), Error);
}

TEST(Quadrature, Examples)
{
    EXPECT_NEAR(integrate_1d([](double) { return 1.0; }, 0.0, 1.0), 1.0, 1e-12);
    EXPECT_NEAR(integrate_1d([](double r) { return 1.0 / ((1 + r) * (1 + r)); }, 0.0, INFINITY), 1.0, 1e-10);
    auto logit_normal = [](double y) {
        const double z = std::log(y / (1 - y));
        return std::exp(-0.5 * z * z) / std::sqrt(2 * M_PI) / (y * (1 - y));
    };
    EXPECT_NEAR(integrate_1d(logit_normal, 0.0, 1.0), 1.0, 1e-6);
    EXPECT_NEAR(integrate_1d([](double x) { return std::exp(-x * x); }, -INFINITY, INFINITY), std::sqrt(M_PI), 1e-10);
}

TEST(Normal, Values)
{
    EXPECT_NEAR(normal_pdf(0.0), 0.3989422804014327, 1e-16);
    EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-16);
    EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
    EXPECT_NEAR(normal_cdf(-8.0), 6.22096057427178e-16, 1e-27);
}
