#include "arnqs/sampling.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>

#include <fmt/format.h>

#include "arnqs/error.hpp"
#include "model_detail.hpp"

namespace arnqs {

SampleBatch ancestral_sample(const ModelSpec& spec, const ParameterSet& params, std::size_t n_samples, RngStream& rng)
{
    SampleBatch batch;
    LogAmplitudes amps;
    draw_autoregressive(spec, params, n_samples, rng, batch.configs, amps);
    batch.log_modulus_sq = std::move(amps.log_modulus_sq);
    batch.phases = std::move(amps.phase);
    batch.origin = SampleOrigin::Ancestral;
    return batch;
}

double metropolis_acceptance(double current, double proposed) noexcept
{
    if (current == -std::numeric_limits<double>::infinity()) return 1.0;
    const double delta = proposed - current;
    return delta >= 0.0 ? 1.0 : std::exp(delta);
}

SampleBatch mcmc_sample(const ModelSpec& spec, const ParameterSet& params, std::size_t n_samples,
                        const McmcConfig& cfg)
{
    if (!params.same_layout(make_parameters(spec))) {
        throw Error("parameter set does not match the model specification");
    }
    const int L = sites(spec);
    const std::size_t burn = cfg.n_burn_sweeps.value_or(10 * static_cast<std::size_t>(L)) * static_cast<std::size_t>(L);
    const std::size_t thin = cfg.thinning.value_or(static_cast<std::size_t>(L));
    if (thin < 1) throw ConfigError("MCMC thinning must be >= 1");
    const auto chains = static_cast<Eigen::Index>(std::max<std::size_t>(1, cfg.chains));

    RngStream rng(cfg.seed);
    Configs state(chains, L);
    for (Eigen::Index i = 0; i < state.size(); ++i) state.data()[i] = static_cast<std::uint8_t>(rng.below(2));
    LogAmplitudes cur;
    detail::evaluate_unchecked(spec, params, state, cur);

    Configs proposal = state;
    LogAmplitudes prop;
    std::vector<int> flipped(static_cast<std::size_t>(chains));
    auto step = [&] {
        for (Eigen::Index c = 0; c < chains; ++c) {
            const auto site = static_cast<int>(rng.below(static_cast<std::uint64_t>(L)));
            flipped[static_cast<std::size_t>(c)] = site;
            proposal(c, site) ^= 1u;
        }
        detail::evaluate_unchecked(spec, params, proposal, prop);
        for (Eigen::Index c = 0; c < chains; ++c) {
            const int site = flipped[static_cast<std::size_t>(c)];
            if (rng.uniform() < metropolis_acceptance(cur.log_modulus_sq[c], prop.log_modulus_sq[c])) {
                state(c, site) = proposal(c, site);
                cur.log_modulus_sq[c] = prop.log_modulus_sq[c];
                cur.phase[c] = prop.phase[c];
            } else {
                proposal(c, site) = state(c, site);
            }
        }
    };

    for (std::size_t k = 0; k < burn; ++k) step();

    SampleBatch batch;
    batch.origin = SampleOrigin::Mcmc;
    const auto n = static_cast<Eigen::Index>(n_samples);
    batch.configs.resize(n, L);
    batch.log_modulus_sq.resize(n);
    batch.phases.resize(n);
    Eigen::Index row = 0;
    while (row < n) {
        for (std::size_t k = 0; k < thin; ++k) step();
        for (Eigen::Index c = 0; c < chains && row < n; ++c, ++row) {
            batch.configs.row(row) = state.row(c);
            batch.log_modulus_sq[row] = cur.log_modulus_sq[c];
            batch.phases[row] = cur.phase[c];
        }
    }
    return batch;
}

SampleBatch sample(const ModelSpec& spec, const ParameterSet& params, std::size_t n_samples, RngStream& rng)
{
    if (is_normalizing(spec)) return ancestral_sample(spec, params, n_samples, rng);
    McmcConfig cfg;
    cfg.seed = rng.next_u64();
    return mcmc_sample(spec, params, n_samples, cfg);
}

Eigen::MatrixXd mcmc_transition_matrix(const ModelSpec& spec, const ParameterSet& params)
{
    const int L = sites(spec);
    if (L > 12) throw Error("transition matrix is limited to L <= 12");
    const auto amps = enumerate_log_amplitudes(spec, params);
    const Eigen::Index dim = Eigen::Index{1} << L;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index x = 0; x < dim; ++x) {
        double stay = 1.0;
        for (int site = 0; site < L; ++site) {
            const Eigen::Index y = x ^ (Eigen::Index{1} << (L - 1 - site));
            const double p = metropolis_acceptance(amps.log_modulus_sq[x], amps.log_modulus_sq[y]) / L;
            t(y, x) = p;
            stay -= p;
        }
        t(x, x) = stay;
    }
    return t;
}

Census distinct_config_census(const SampleBatch& batch)
{
    if (batch.size() == 0) throw Error("census of an empty batch");
    const auto L = static_cast<std::size_t>(batch.configs.cols());
    std::unordered_map<std::string, std::size_t> counts;
    std::string key(L, '0');
    std::size_t best = 0;
    Eigen::Index best_row = 0;
    for (Eigen::Index r = 0; r < batch.configs.rows(); ++r) {
        for (std::size_t n = 0; n < L; ++n) key[n] = static_cast<char>('0' + batch.configs(r, static_cast<Eigen::Index>(n)));
        const std::size_t c = ++counts[key];
        if (c > best) {
            best = c;
            best_row = r;
        }
    }
    Census out;
    out.distinct_count = counts.size();
    out.top_frequency = static_cast<double>(best) / static_cast<double>(batch.size());
    out.top_config.assign(batch.configs.row(best_row).data(), batch.configs.row(best_row).data() + L);
    return out;
}

void write_batch_csv(const std::filesystem::path& path, const SampleBatch& batch)
{
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    os << "config,log_modulus_sq,phase\n";
    std::string cfg(static_cast<std::size_t>(batch.configs.cols()), '0');
    for (Eigen::Index r = 0; r < batch.configs.rows(); ++r) {
        for (Eigen::Index n = 0; n < batch.configs.cols(); ++n) {
            cfg[static_cast<std::size_t>(n)] = static_cast<char>('0' + batch.configs(r, n));
        }
        os << fmt::format("{},{:.17g},{:.17g}\n", cfg, batch.log_modulus_sq[r], batch.phases[r]);
    }
    if (!os) throw Error(fmt::format("write to '{}' failed", path.string()));
}

} // namespace arnqs
