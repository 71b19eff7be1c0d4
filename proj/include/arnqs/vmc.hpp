#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "arnqs/error.hpp"
#include "arnqs/model.hpp"
#include "arnqs/parameters.hpp"
#include "arnqs/rng.hpp"
#include "arnqs/spec.hpp"

namespace arnqs {

enum class HamiltonianKind { TfimOpen, HeisenbergOpen };

std::string to_string(HamiltonianKind kind);
HamiltonianKind parse_hamiltonian_kind(std::string_view name);

/// Open chains of `sites` spins:
///   TfimOpen:       -J sum sz_i sz_{i+1} - h sum sx_i   (Pauli matrices)
///   HeisenbergOpen: -J sum S_i . S_{i+1}                (S = sigma / 2)
struct Hamiltonian {
    HamiltonianKind kind = HamiltonianKind::TfimOpen;
    double J = 1.0;
    double h = 1.0;
    int sites = 0;

    bool operator==(const Hamiltonian&) const = default;
};

void validate(const Hamiltonian& ham);

/// Dense-free product H * v over the 2^L basis (site 0 most significant).
Eigen::VectorXcd apply_hamiltonian(const Hamiltonian& ham, const Eigen::VectorXcd& v);

/// Lowest eigenvalue, dense for L <= 10 and Lanczos up to L = 16.
double exact_ground_energy(const Hamiltonian& ham);

/// E_loc(s) = sum_s' H(s, s') Psi(s') / Psi(s) for each row of `configs`;
/// `amps` are the log amplitudes of those rows. Throws when Psi(s) = 0.
Eigen::VectorXcd local_energies(const ModelSpec& spec, const ParameterSet& params, const Configs& configs,
                                const LogAmplitudes& amps, const Hamiltonian& ham);
std::complex<double> local_energy(const ModelSpec& spec, const ParameterSet& params,
                                  std::span<const std::uint8_t> spins, const Hamiltonian& ham);

struct EnergyGradient {
    double energy = 0.0;
    double energy_std_error = 0.0; // zero for the enumerated version
    double var_per_spin = 0.0;
    std::vector<double> grad;
};

/// Monte Carlo estimate from n_samples draws:
///   grad = 2 Re < (E_loc - E)^* d ln Psi >.
EnergyGradient energy_and_gradient(const ModelSpec& spec, const ParameterSet& params, const Hamiltonian& ham,
                                   std::size_t n_samples, RngStream& rng);

/// Same quantities with every configuration weighted by |Psi|^2. L <= 16.
EnergyGradient exact_energy_and_gradient(const ModelSpec& spec, const ParameterSet& params,
                                         const Hamiltonian& ham);

/// <Psi|H|Psi> / <Psi|Psi> by enumeration. L <= 16.
double exact_energy(const ModelSpec& spec, const ParameterSet& params, const Hamiltonian& ham);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0; // steps taken
};

/// One bias-corrected Adam update at step state.t + 1.
std::pair<ParameterSet, AdamState> adam_step(const ParameterSet& params, std::span<const double> grad,
                                             const AdamState& state, double eta, const AdamConfig& adam = {});

struct VmcConfig {
    double eta = 5e-3;
    std::size_t n_samples = 500;
    double eps_rel_target = 1e-3;
    double var_per_spin_target = 1e-3;
    std::size_t max_iters = 5000;
    AdamConfig adam;
    std::size_t window = 1; // moving average applied before the convergence test
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> trace_path;

    bool operator==(const VmcConfig&) const = default;
};

void validate(const VmcConfig& cfg);

struct VmcResult {
    std::optional<std::size_t> tau_conv; // empty when not converged
    std::vector<double> energy_trace;
    std::vector<double> variance_trace;
    std::vector<double> eps_rel_trace;
    ParameterSet final_params;
    AdamState adam;
};

/// Raised when an energy estimate is not finite; holds the traces so far.
class VmcDiverged : public Error {
public:
    VmcDiverged(std::size_t iteration, std::vector<double> energies);
    std::size_t iteration;
    std::vector<double> energy_trace;
};

/// Adam descent on the sampled energy until eps_rel and var_per_spin both
/// reach their targets (tau_conv = that iteration) or max_iters pass.
/// Iteration t tests the estimates of the parameters after t updates.
VmcResult vmc_optimize(const ModelSpec& spec, const ParameterSet& init_params, const Hamiltonian& ham,
                       const VmcConfig& cfg, double e_ref);

/// Parameters in the binary container plus Adam moments as `path` + ".adam".
void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec, const ParameterSet& params,
                     const AdamState& adam);
std::pair<ParameterSet, AdamState> load_checkpoint(const std::filesystem::path& path);

} // namespace arnqs
