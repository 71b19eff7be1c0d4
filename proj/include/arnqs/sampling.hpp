#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "arnqs/model.hpp"

namespace arnqs {

enum class SampleOrigin { Ancestral, Mcmc };

struct SampleBatch {
    Configs configs;                // n x L, entries 0/1
    Eigen::VectorXd log_modulus_sq; // ln|Psi|^2 per row (unnormalized for MCMC on Identity g)
    Eigen::VectorXd phases;
    SampleOrigin origin = SampleOrigin::Ancestral;

    std::size_t size() const noexcept { return static_cast<std::size_t>(configs.rows()); }
};

enum class Proposal { SingleFlip };

struct McmcConfig {
    std::optional<std::size_t> n_burn_sweeps; // default 10 L sweeps of L flips
    std::optional<std::size_t> thinning;      // flips between recorded samples, default L
    Proposal proposal = Proposal::SingleFlip;
    std::uint64_t seed = 0;
    std::size_t chains = 8; // independent chains advanced in lockstep
};

/// Exact site-by-site sampling. Throws arnqs::Error for a non-normalizing
/// output activation.
SampleBatch ancestral_sample(const ModelSpec& spec, const ParameterSet& params, std::size_t n_samples,
                             RngStream& rng);

/// Metropolis sampling of |Psi|^2 with uniformly chosen single-spin flips.
/// Each chain starts from a uniformly random configuration; recorded
/// samples interleave the chains.
SampleBatch mcmc_sample(const ModelSpec& spec, const ParameterSet& params, std::size_t n_samples,
                        const McmcConfig& cfg);

/// Ancestral sampling when the model allows it, otherwise MCMC seeded from rng.
SampleBatch sample(const ModelSpec& spec, const ParameterSet& params, std::size_t n_samples, RngStream& rng);

/// min(1, |Psi(proposed)|^2 / |Psi(current)|^2) from log moduli. A current
/// weight of zero accepts any proposal.
double metropolis_acceptance(double log_modulus_sq_current, double log_modulus_sq_proposed) noexcept;

/// Single-flip Metropolis transition matrix over all 2^L configurations,
/// column-stochastic: T(y, x) is the probability of moving x -> y.
Eigen::MatrixXd mcmc_transition_matrix(const ModelSpec& spec, const ParameterSet& params);

struct Census {
    std::size_t distinct_count = 0;
    double top_frequency = 0.0;
    std::vector<std::uint8_t> top_config; // a most frequent row
};

/// Exact count of distinct rows.
Census distinct_config_census(const SampleBatch& batch);

/// CSV with header config,log_modulus_sq,phase; config as a 0/1 string.
void write_batch_csv(const std::filesystem::path& path, const SampleBatch& batch);

} // namespace arnqs
