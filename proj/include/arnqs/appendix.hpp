#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "arnqs/rng.hpp"
#include "arnqs/spec.hpp"

namespace arnqs {

/// 1 / (1 + e^-z), evaluated without overflow for any finite z.
double sigmoid(double z) noexcept;

/// Law of sigmoid(theta) with theta ~ N(mu, sigma^2).
struct LogitNormalParams {
    double mu = 0.0;
    double sigma = 1.0;
};

/// phi((logit y - mu) / sigma) / (sigma y (1 - y)) on 0 < y < 1.
double logit_normal_pdf(double y, const LogitNormalParams& p);
/// Phi((logit y - mu) / sigma) on 0 < y < 1.
double logit_normal_cdf(double y, const LogitNormalParams& p);

/// Quadrature of the pdf over (0, 1).
double logit_normal_total_mass(const LogitNormalParams& p, double tol = 1e-10);

/// P(eps < Y < 1 - eps) for mu = 0: 1 - 2 Phi(ln(eps / (1 - eps)) / sigma).
/// Requires 0 < eps <= 0.5.
double mass_outside_eps(double sigma, double eps);

struct MarginalCheck {
    double tv = 0.0;                 // total variation over 100 uniform bins on [0, 1]
    double edge_mass = 0.0;          // empirical mass in [0, 0.02) and (0.98, 1]
    std::vector<double> empirical;   // bin probabilities
    std::vector<double> reference;   // exact bin probabilities from the CDF
};

/// Histogram of sigmoid(theta), theta ~ N(0, sigma^2), against the
/// logit-normal law. Requires n_samples >= 1e4.
MarginalCheck empirical_marginal_check(double sigma, std::size_t n_samples, RngStream& rng);

struct CollapseCheck {
    double fraction_single = 0.0;          // models with exactly one distinct configuration
    std::vector<std::size_t> distinct;     // per model
    std::vector<std::vector<std::uint8_t>> dominant; // most frequent configuration per model
    double mean_pairwise_hamming = 0.0;    // over distinct model pairs
    double hamming_tolerance = 0.0;        // 4 sqrt(L / 4 / n_models)
    bool hamming_consistent = false;       // |mean - L/2| <= tolerance
    double mean_abs_spin_correlation = 0.0; // across models, off-diagonal, reported only
};

/// Fraction of models collapsing to a single sampled configuration and the
/// independence of their dominant configurations. Model m is drawn from
/// seed base_seed ^ m. Any sigma >= 0 is accepted.
CollapseCheck collapse_census(const RnnSpec& spec, double sigma, std::size_t n_models, std::size_t n_samples,
                              std::uint64_t base_seed, std::size_t workers = 1);

/// collapse_census restricted to the large-width regime sigma >= 20 on a
/// tanh/Softmax-type RNN.
CollapseCheck product_collapse_check(const RnnSpec& spec, double sigma_large, std::size_t n_models,
                                     std::size_t n_samples, std::uint64_t base_seed, std::size_t workers = 1);

struct AppendixCheck {
    std::string name;
    double value = 0.0;
    std::string requirement;
    bool passed = false;
};

struct AppendixReport {
    std::vector<AppendixCheck> checks;
    bool all_passed() const noexcept;
    nlohmann::json to_json() const;
};

/// Every logit-normal and collapse property of the large-width analysis.
AppendixReport appendix_b_report(std::uint64_t base_seed, std::size_t workers = 1);

} // namespace arnqs
