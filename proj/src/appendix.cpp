#include "arnqs/appendix.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "arnqs/error.hpp"
#include "arnqs/numerics.hpp"
#include "arnqs/parallel.hpp"
#include "arnqs/sampling.hpp"

namespace arnqs {

namespace {

constexpr int kBins = 100;

void check_params(const LogitNormalParams& p)
{
    if (!(p.sigma > 0.0) || !std::isfinite(p.sigma) || !std::isfinite(p.mu))
        throw ConfigError(fmt::format("logit-normal needs finite mu and sigma > 0 (got {}, {})", p.mu, p.sigma));
}

double logit_in_domain(double y)
{
    if (!(y > 0.0 && y < 1.0)) throw Error(fmt::format("logit-normal argument {} outside (0, 1)", y));
    return std::log(y) - std::log1p(-y);
}

} // namespace

double logit_normal_total_mass(const LogitNormalParams& p, double tol)
{
    // upper half via p_mu(1 - u) = p_{-mu}(u); 1 - u is not representable near u = 0
    const LogitNormalParams mirrored{-p.mu, p.sigma};
    return integrate_1d([&](double y) { return logit_normal_pdf(y, p); }, 0.0, 0.5, tol)
         + integrate_1d([&](double y) { return logit_normal_pdf(y, mirrored); }, 0.0, 0.5, tol);
}

double sigmoid(double z) noexcept
{
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double logit_normal_pdf(double y, const LogitNormalParams& p)
{
    check_params(p);
    const double z = (logit_in_domain(y) - p.mu) / p.sigma;
    return normal_pdf(z) / (p.sigma * y * (1.0 - y));
}

double logit_normal_cdf(double y, const LogitNormalParams& p)
{
    check_params(p);
    return normal_cdf((logit_in_domain(y) - p.mu) / p.sigma);
}

double mass_outside_eps(double sigma, double eps)
{
    if (!(sigma > 0.0)) throw ConfigError("mass_outside_eps needs sigma > 0");
    if (!(eps > 0.0 && eps <= 0.5)) throw ConfigError(fmt::format("eps {} outside (0, 0.5]", eps));
    if (eps == 0.5) return 0.0;
    // 1 - 2 Phi(x) = erf(-x / sqrt 2)
    return std::erf(-(std::log(eps) - std::log1p(-eps)) / (sigma * std::sqrt(2.0)));
}

MarginalCheck empirical_marginal_check(double sigma, std::size_t n_samples, RngStream& rng)
{
    if (n_samples < 10000) throw ConfigError("empirical marginal check needs at least 1e4 samples");
    const LogitNormalParams p{0.0, sigma};
    check_params(p);
    MarginalCheck out;
    out.empirical.assign(kBins, 0.0);
    std::size_t edge = 0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double y = sigmoid(sigma * rng.gaussian());
        out.empirical[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>(y * kBins)))] += 1.0;
        if (y < 0.02 || y > 0.98) ++edge;
    }
    for (auto& c : out.empirical) c /= static_cast<double>(n_samples);
    out.edge_mass = static_cast<double>(edge) / static_cast<double>(n_samples);
    out.reference.resize(kBins);
    double prev = 0.0;
    for (int b = 0; b < kBins; ++b) {
        const double hi = b + 1 == kBins ? 1.0 : logit_normal_cdf(static_cast<double>(b + 1) / kBins, p);
        out.reference[static_cast<std::size_t>(b)] = hi - prev;
        prev = hi;
    }
    for (int b = 0; b < kBins; ++b)
        out.tv += 0.5 * std::abs(out.empirical[static_cast<std::size_t>(b)] - out.reference[static_cast<std::size_t>(b)]);
    return out;
}

CollapseCheck collapse_census(const RnnSpec& spec, double sigma, std::size_t n_models, std::size_t n_samples,
                              std::uint64_t base_seed, std::size_t workers)
{
    validate(spec);
    if (!is_normalizing(spec.g)) throw ConfigError("collapse census needs a normalizing output activation");
    if (n_models < 2 || n_samples < 1) throw ConfigError("collapse census needs at least 2 models and 1 sample");
    const auto censuses = parallel_map(n_models, workers, [&](std::size_t m) {
        RngStream rng(replica_seed(base_seed, m));
        const auto params = init_gaussian(spec, sigma, rng);
        return distinct_config_census(ancestral_sample(spec, params, n_samples, rng));
    });
    CollapseCheck out;
    std::size_t single = 0;
    for (const auto& c : censuses) {
        out.distinct.push_back(c.distinct_count);
        out.dominant.push_back(c.top_config);
        if (c.distinct_count == 1) ++single;
    }
    out.fraction_single = static_cast<double>(single) / static_cast<double>(n_models);

    const int L = spec.sites;
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < n_models; ++a)
        for (std::size_t b = a + 1; b < n_models; ++b, ++pairs)
            for (int i = 0; i < L; ++i) total += out.dominant[a][static_cast<std::size_t>(i)] != out.dominant[b][static_cast<std::size_t>(i)];
    out.mean_pairwise_hamming = total / static_cast<double>(pairs);
    out.hamming_tolerance = 4.0 * std::sqrt(L / 4.0 / static_cast<double>(n_models));
    out.hamming_consistent = std::abs(out.mean_pairwise_hamming - L / 2.0) <= out.hamming_tolerance;

    if (L > 1) {
        Eigen::MatrixXd z(static_cast<Eigen::Index>(n_models), L);
        for (std::size_t m = 0; m < n_models; ++m)
            for (int i = 0; i < L; ++i) z(static_cast<Eigen::Index>(m), i) = 1.0 - 2.0 * out.dominant[m][static_cast<std::size_t>(i)];
        const Eigen::RowVectorXd mean = z.colwise().mean();
        const Eigen::MatrixXd centered = z.rowwise() - mean;
        const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n_models);
        double acc = 0.0;
        for (int i = 0; i < L; ++i)
            for (int j = i + 1; j < L; ++j) acc += std::abs(cov(i, j));
        out.mean_abs_spin_correlation = acc / (L * (L - 1) / 2.0);
    }
    return out;
}

CollapseCheck product_collapse_check(const RnnSpec& spec, double sigma_large, std::size_t n_models,
                                     std::size_t n_samples, std::uint64_t base_seed, std::size_t workers)
{
    if (!(sigma_large >= 20.0)) throw ConfigError(fmt::format("collapse check needs sigma >= 20 (got {})", sigma_large));
    return collapse_census(spec, sigma_large, n_models, n_samples, base_seed, workers);
}

bool AppendixReport::all_passed() const noexcept
{
    return std::all_of(checks.begin(), checks.end(), [](const AppendixCheck& c) { return c.passed; });
}

nlohmann::json AppendixReport::to_json() const
{
    nlohmann::json j;
    j["all_passed"] = all_passed();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
        j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"requirement", c.requirement}, {"passed", c.passed}});
    return j;
}

AppendixReport appendix_b_report(std::uint64_t base_seed, std::size_t workers)
{
    AppendixReport rep;
    auto add = [&](std::string name, double value, std::string requirement, bool passed) {
        rep.checks.push_back({std::move(name), value, std::move(requirement), passed});
    };

    for (double s : {0.5, 1.0, 5.0, 20.0}) {
        const double mass = logit_normal_total_mass({0.0, s});
        add(fmt::format("pdf_normalization_sigma_{}", s), mass, "|integral - 1| <= 1e-6", std::abs(mass - 1.0) <= 1e-6);
    }
    {
        const double v = logit_normal_pdf(0.5, {0.0, 1.0});
        add("pdf_at_half", v, "4 phi(0) within 1e-12", std::abs(v - 4.0 * normal_pdf(0.0)) <= 1e-12);
        double worst = 0.0;
        for (double y : {0.05, 0.2, 0.37, 0.49})
            worst = std::max(worst, std::abs(logit_normal_pdf(y, {0.0, 1.3}) - logit_normal_pdf(1.0 - y, {0.0, 1.3})));
        add("pdf_symmetry", worst, "p(y) = p(1 - y) within 1e-12", worst <= 1e-12);
    }
    {
        const LogitNormalParams p{0.0, 2.0};
        const double h = 1e-6, y = 0.3;
        const double fd = (logit_normal_cdf(y + h, p) - logit_normal_cdf(y - h, p)) / (2 * h);
        const double rel = std::abs(fd - logit_normal_pdf(y, p)) / logit_normal_pdf(y, p);
        add("cdf_derivative_matches_pdf", rel, "relative error < 1e-4", rel < 1e-4);
        double worst = 0.0;
        for (double q : {0.1, 0.3, 0.5, 0.8, 0.95}) {
            const double integral = integrate_1d([&](double t) { return logit_normal_pdf(t, p); }, 0.0, q, 1e-10);
            worst = std::max(worst, std::abs(integral - logit_normal_cdf(q, p)));
        }
        add("cdf_matches_integrated_pdf", worst, "max deviation <= 1e-6", worst <= 1e-6);
        add("cdf_at_half", logit_normal_cdf(0.5, p), "= 0.5", logit_normal_cdf(0.5, p) == 0.5);
    }
    {
        const double m = mass_outside_eps(50.0, 1e-3);
        add("mass_outside_eps_sigma50_eps1e-3", m, "< 0.09", m < 0.09);
        bool monotone = true;
        double prev = 1.0;
        for (double s : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 1000.0}) {
            const double cur = mass_outside_eps(s, 1e-3);
            monotone = monotone && (cur < prev || (cur == 1.0 && prev == 1.0));
            prev = cur;
        }
        add("mass_outside_eps_monotone", prev, "strictly decreasing in sigma below 1", monotone);
        add("mass_outside_eps_half", mass_outside_eps(3.0, 0.5), "= 0", mass_outside_eps(3.0, 0.5) == 0.0);
    }
    {
        RngStream rng(replica_seed(base_seed, 1));
        const auto one = empirical_marginal_check(1.0, 1000000, rng);
        add("empirical_tv_sigma1", one.tv, "< 0.01", one.tv < 0.01);
        const auto wide = empirical_marginal_check(20.0, 1000000, rng);
        add("edge_mass_sigma20", wide.edge_mass, "> 0.95", wide.edge_mass > 0.95);
    }
    {
        RnnSpec spec;
        spec.sites = 20;
        spec.hidden = 20;
        const auto sm = product_collapse_check(spec, 50.0, 10, 1000, base_seed, workers);
        add("softmax_collapse_fraction_sigma50", sm.fraction_single, ">= 0.9", sm.fraction_single >= 0.9);
        RnnSpec mod = spec;
        mod.g = Activation::SquareModulus;
        const auto md = product_collapse_check(mod, 50.0, 10, 1000, base_seed, workers);
        add("modulus_collapse_fraction_sigma50", md.fraction_single, "= 0", md.fraction_single == 0.0);
        const auto ham = collapse_census(spec, 50.0, 50, 1000, replica_seed(base_seed, 0x5a5a), workers);
        add("dominant_config_mean_hamming", ham.mean_pairwise_hamming,
            fmt::format("within {:.4g} of 10", ham.hamming_tolerance), ham.hamming_consistent);
        add("dominant_config_mean_abs_correlation", ham.mean_abs_spin_correlation, "reported only", true);
        bool monotone = true;
        double prev = -1.0;
        for (double s : {1.0, 5.0, 20.0, 50.0}) {
            const double f = collapse_census(spec, s, 10, 1000, base_seed, workers).fraction_single;
            monotone = monotone && f >= prev;
            prev = f;
        }
        add("collapse_fraction_monotone_in_sigma", prev, "nondecreasing over sigma in {1, 5, 20, 50}", monotone);
    }
    return rep;
}

} // namespace arnqs
