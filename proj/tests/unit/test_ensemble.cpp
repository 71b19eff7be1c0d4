#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "arnqs/ensemble.hpp"
#include "arnqs/parallel.hpp"

using namespace arnqs;

namespace {

RnnSpec rnn(int L, int hidden = 4)
{
    RnnSpec s;
    s.sites = L;
    s.hidden = hidden;
    return s;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path tmp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

} // namespace

TEST(Aggregate, Examples)
{
    const std::vector<double> ones{1, 1, 1};
    auto s = aggregate(ones);
    EXPECT_EQ(s.mean, 1.0);
    EXPECT_EQ(s.std, 0.0);
    EXPECT_EQ(s.n, 3u);
    const std::vector<double> two{0, 2};
    s = aggregate(two);
    EXPECT_EQ(s.mean, 1.0);
    EXPECT_EQ(s.std, 1.0);
    EXPECT_DOUBLE_EQ(s.std_error, 1.0 / std::sqrt(2.0));
}

TEST(Aggregate, MatchesTwoPassOracle)
{
    RngStream rng(3);
    std::vector<double> v(100000);
    for (auto& x : v) x = 5.0 + 2.0 * rng.gaussian();
    long double sum = 0.0L;
    for (double x : v) sum += x;
    const long double mean = sum / v.size();
    long double ss = 0.0L;
    for (double x : v) ss += (x - mean) * (x - mean);
    const auto s = aggregate(v);
    EXPECT_NEAR(s.mean, static_cast<double>(mean), 1e-12);
    EXPECT_NEAR(s.std, static_cast<double>(std::sqrt(ss / v.size())), 1e-12);
}

TEST(Parallel, IndexOrderedAndPropagatesErrors)
{
    const auto out = parallel_map(100, 4, [](std::size_t i) { return i * i; });
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], i * i);
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw Error("boom"); }), Error);
}

TEST(EntropyGrid, ZeroSigmaColumnAndDeterminism)
{
    SweepGrid grid{{2, 5}, {0.0, 0.3, 1.0}, 4, 99};
    const Estimator exact{};
    const auto a = run_entropy_grid(rnn(8), grid, exact, 1);
    const auto b = run_entropy_grid(rnn(8), grid, exact, 3);
    ASSERT_EQ(a.cells.size(), 6u);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(a.cell(k, 0).stats.mean, 0.0);
        EXPECT_EQ(a.cell(k, 0).stats.std, 0.0);
    }
    for (std::size_t c = 0; c < a.cells.size(); ++c) {
        EXPECT_EQ(a.cells[c].values, b.cells[c].values);
        const auto re = aggregate(a.cells[c].values);
        EXPECT_EQ(re.mean, a.cells[c].stats.mean);
        EXPECT_EQ(re.std, a.cells[c].stats.std);
        EXPECT_TRUE(a.cells[c].kept);
        for (double v : a.cells[c].values) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0 + 1e-12);
        }
    }
    write_grid_csv(tmp("g1.csv"), a);
    write_grid_csv(tmp("g2.csv"), b);
    EXPECT_EQ(slurp(tmp("g1.csv")), slurp(tmp("g2.csv")));
    write_grid_replicas_csv(tmp("g1.csv"), a);
    write_grid_replicas_csv(tmp("g2.csv"), b);
    EXPECT_EQ(slurp(tmp("g1.csv")), slurp(tmp("g2.csv")));
    EXPECT_EQ(slurp(tmp("g1.csv")).substr(0, 41), "arch_value,sigma,replica,seed,value,error");
    const auto m = grid_manifest(a);
    EXPECT_EQ(m["grid"]["base_seed"], 99u);
    EXPECT_EQ(m["estimator"]["kind"], "exact");
}

TEST(EntropyGrid, SwapAgreesWithExactOnAverage)
{
    SweepGrid grid{{6}, {0.5}, 6, 5};
    const auto exact = run_entropy_grid(rnn(6), grid, Estimator{}, 2);
    const auto swap = run_entropy_grid(rnn(6), grid, Estimator{EstimatorKind::Swap, 20000, 50}, 2);
    for (std::size_t r = 0; r < grid.n_init; ++r)
        EXPECT_NEAR(swap.cells[0].values[r], exact.cells[0].values[r], 0.05);
}

TEST(EntropyGrid, FailuresAreRecordedAndCellsDropped)
{
    // unbounded f overflows at this width, so every replica fails
    RnnSpec bad = rnn(4);
    bad.f = Activation::Relu;
    bad.g = Activation::SquareModulus;
    SweepGrid grid{{3}, {1e200}, 2, 1};
    const auto res = run_entropy_grid(bad, grid, Estimator{EstimatorKind::Swap, 50, 10}, 1);
    EXPECT_EQ(res.cells[0].failures.size(), 2u);
    EXPECT_FALSE(res.cells[0].kept);
    EXPECT_FALSE(peak_sigma_index(res, 0).has_value());
    EXPECT_TRUE(std::isnan(res.cells[0].values[0]));
}

TEST(EntropyGrid, PeakIndex)
{
    SweepGrid grid{{6}, {0.0, 0.5, 20.0}, 6, 2};
    const auto res = run_entropy_grid(rnn(8, 6), grid, Estimator{}, 1);
    const auto peak = peak_sigma_index(res, 0);
    ASSERT_TRUE(peak.has_value());
    EXPECT_EQ(*peak, 1u);
}

TEST(Scaling, SharedRnnParametersMatchGridValues)
{
    const std::vector<int> sizes{4, 6, 8};
    const auto rows = run_scaling_study(rnn(4, 5), {0.0, 0.6}, sizes, 3, Estimator{}, 17, 2);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& p : rows[0].points) EXPECT_EQ(p.stats.mean, 0.0);
    EXPECT_FALSE(rows[1].fit.has_value());
    EXPECT_NE(rows[1].skip_reason.find("need 5"), std::string::npos);
    for (std::size_t li = 0; li < sizes.size(); ++li) {
        const int L = sizes[li];
        const auto grid = run_entropy_grid(rnn(L, 5), SweepGrid{{5}, {0.6}, 3, 17}, Estimator{}, 1);
        for (std::size_t r = 0; r < 3; ++r)
            EXPECT_NEAR(rows[1].points[li].values[r] / ((L / 2) * std::log(2.0)), grid.cells[0].values[r], 1e-12);
    }
}

TEST(Scaling, FitsWhenEnoughPointsAndExcludesNoisySwap)
{
    const auto rows = run_scaling_study(rnn(4, 5), {0.05}, {4, 6, 8, 10, 12}, 4, Estimator{}, 3, 1);
    ASSERT_TRUE(rows[0].fit.has_value()) << rows[0].skip_reason;
    EXPECT_LT(std::abs(rows[0].fit->b), 0.05);

    // 40 swap samples cannot resolve the purity of a strongly entangled state
    const auto noisy = run_scaling_study(rnn(4, 16), {0.5}, {14, 16}, 3,
                                         Estimator{EstimatorKind::Swap, 40, 4}, 3, 1);
    for (const auto& p : noisy[0].points) EXPECT_TRUE(p.excluded) << p.mean_relative_purity_error;
    EXPECT_THROW(run_scaling_study(rnn(4), {0.1}, {8, 4}, 2, Estimator{}, 0), ConfigError);
}

TEST(LevelStats, BookkeepingAndDeterminism)
{
    const auto a = run_level_stats(rnn(8, 6), {0.5, 5.0}, 5, 1e-12, 8, 1);
    const auto b = run_level_stats(rnn(8, 6), {0.5, 5.0}, 5, 1e-12, 8, 2);
    ASSERT_EQ(a.size(), 2u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].r, b[i].r);
        EXPECT_EQ(a[i].r.size(), a[i].r_min.size());
        EXPECT_LE(a[i].r.size(), a[i].spectra * 14);
        for (double x : a[i].r_min) {
            EXPECT_GE(x, 0.0);
            EXPECT_LE(x, 1.0);
        }
    }
    EXPECT_EQ(a[0].spectra, 5u);
    std::size_t expected = 0;
    for (std::size_t r = 0; r < 5; ++r) {
        RngStream rng(replica_seed(8, r));
        const auto p = init_gaussian(rnn(8, 6), 0.5, rng);
        const auto rho = reduced_density_matrix(exact_state_vector(rnn(8, 6), p).amplitudes, Partition::half(8));
        expected += entanglement_spectrum(rho, 1e-12).size() - 2;
    }
    EXPECT_EQ(a[0].r.size() + a[0].skipped_gaps, expected);
    write_level_histograms_csv(tmp("h.csv"), a);
    write_level_stats_csv(tmp("s.csv"), a);
    EXPECT_NE(slurp(tmp("h.csv")).find("r_min"), std::string::npos);

    const auto tiny = run_level_stats(rnn(2), {0.5}, 3, 1e-12, 1, 1);
    EXPECT_EQ(tiny[0].failures.size(), 3u);
    EXPECT_EQ(tiny[0].spectra, 0u);
}

TEST(Correlations, ProductStateFloorAndShape)
{
    const auto rows = run_correlations(rnn(6), {0.0, 0.8}, 3, 2000, 4, 2);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].curve.distances.size(), 5u);
    for (double v : rows[1].curve.mean_log_abs_corr) EXPECT_TRUE(std::isfinite(v));
    EXPECT_THROW(run_correlations(rnn(6), {0.1}, 3, 10, 4, 1), ConfigError);
}

TEST(VmcSweep, EigenstateCellsAndXavierColumn)
{
    RnnSpec s = rnn(4);
    s.phase = PhaseMode::Positive;
    const Hamiltonian ham{HamiltonianKind::TfimOpen, 0.0, 1.0, 4};
    VmcConfig cfg;
    cfg.max_iters = 300;
    cfg.n_samples = 200;
    cfg.eta = 2e-2;
    SweepGrid grid{{2, 3, 4, 5}, {0.0, 0.3}, 2, 7};
    const auto g1 = run_vmc_sweep(s, ham, grid, cfg, InitScheme::Gaussian, std::nullopt, 1);
    const auto g2 = run_vmc_sweep(s, ham, grid, cfg, InitScheme::Gaussian, std::nullopt, 3);
    EXPECT_DOUBLE_EQ(g1.e_ref, -4.0);
    ASSERT_EQ(g1.cells.size(), 8u);
    for (std::size_t c = 0; c < g1.cells.size(); ++c) EXPECT_EQ(g1.cells[c].tau, g2.cells[c].tau);
    for (std::size_t a = 0; a < 4; ++a) {
        const auto& zero = g1.cells[a * 2];
        for (const auto& t : zero.tau) EXPECT_EQ(t, std::optional<std::size_t>(0));
        ASSERT_TRUE(g1.argmin_sigma[a].has_value());
        EXPECT_EQ(*g1.argmin_sigma[a], 0.0);
    }
    const auto xg = run_vmc_sweep(s, ham, grid, cfg, InitScheme::XavierGlorot, -4.0, 2);
    EXPECT_EQ(xg.sigma_axis, std::vector<double>{0.0});
    EXPECT_EQ(xg.cells.size(), 4u);
    const auto best = best_in_class(g1, xg);
    EXPECT_EQ(best.size(), 4u);
    write_vmc_sweep_csv(tmp("v.csv"), g1);
    write_best_in_class_csv(tmp("b.csv"), best);
    EXPECT_EQ(slurp(tmp("b.csv")).substr(0, 20), "arch_value,best_sigm");
}
