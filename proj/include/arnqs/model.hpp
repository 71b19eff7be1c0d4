#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "arnqs/parameters.hpp"
#include "arnqs/rng.hpp"
#include "arnqs/spec.hpp"

namespace arnqs {

/// Spin configurations, one per row, entries in {0, 1}.
using Configs = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Psi(s) = sqrt(modulus_sq) * exp(i * phase).
struct Amplitude {
    double modulus_sq = 0.0;
    double phase = 0.0;
    std::complex<double> value;
    /// False when the output activation does not normalize the conditionals;
    /// modulus_sq is then the raw product of |conditional| factors.
    bool normalized = true;
};

/// Per-site outputs for one configuration: row n holds the conditional
/// vector g(...) and the phase components for site n.
struct SiteOutputs {
    Eigen::MatrixXd conditionals; // L x 2
    Eigen::MatrixXd phases;       // L x 2
};

/// ln|Psi|^2 and arg Psi for a batch of configurations.
struct LogAmplitudes {
    Eigen::VectorXd log_modulus_sq;
    Eigen::VectorXd phase;
};

/// Zero-filled parameters with the tensor layout of `spec`.
ParameterSet make_parameters(const ModelSpec& spec);

/// Every tensor i.i.d. N(0, sigma^2), layer-norm gains and biases included.
ParameterSet init_gaussian(const ModelSpec& spec, double sigma, RngStream& rng);

/// Weights uniform on [-1/sqrt(n), 1/sqrt(n)] with n the fan-in of their
/// linear map; biases 0, layer-norm gains 1.
ParameterSet init_xavier_glorot(const ModelSpec& spec, RngStream& rng);

/// Fan-in used by init_xavier_glorot for a tensor, 0 for biases.
int fan_in(const ModelSpec& spec, std::string_view tensor_name);

/// One recurrence step h' = cell(h, one-hot spin).
std::vector<double> rnn_step(const RnnSpec& spec, const ParameterSet& params,
                             std::span<const double> h_prev, std::span<const double> spin_prev);

struct HeadOutputs {
    std::array<double, 2> conditional{};
    std::array<double, 2> phase{};
};

/// conditional = g(U h + c); phase = V h + d (zero in Positive mode).
HeadOutputs rnn_heads(const RnnSpec& spec, const ParameterSet& params, std::span<const double> h);

/// Full transformer pass over one configuration.
SiteOutputs atf_forward(const AtfSpec& spec, const ParameterSet& params,
                        std::span<const std::uint8_t> spins);

struct AttentionParameterCount {
    std::size_t score = 0; // Q,K projections or circulant kernels
    std::size_t value = 0; // V projections
};
AttentionParameterCount attention_parameter_count(const AtfSpec& spec);

SiteOutputs site_outputs(const ModelSpec& spec, const ParameterSet& params,
                         std::span<const std::uint8_t> spins);

Amplitude amplitude(const ModelSpec& spec, const ParameterSet& params,
                    std::span<const std::uint8_t> spins);

LogAmplitudes log_amplitudes(const ModelSpec& spec, const ParameterSet& params, const Configs& configs);

/// ln|Psi|^2 and phase of all 2^L configurations. Configuration index has
/// site 0 as its most significant bit.
LogAmplitudes enumerate_log_amplitudes(const ModelSpec& spec, const ParameterSet& params);

/// Gradient with respect to the flat parameter vector of
///   sum_s weight_re[s] * Re ln Psi(s) + weight_im[s] * Im ln Psi(s),
/// by reverse-mode differentiation of the forward pass.
std::vector<double> log_amplitude_gradient(const ModelSpec& spec, const ParameterSet& params,
                                           const Configs& configs,
                                           std::span<const double> weight_re,
                                           std::span<const double> weight_im);

/// Draws n configurations site by site from the exact conditionals and
/// fills their log amplitudes. Requires a normalizing output activation.
void draw_autoregressive(const ModelSpec& spec, const ParameterSet& params, std::size_t n,
                         RngStream& rng, Configs& configs, LogAmplitudes& amps);

/// Converts a configuration index (site 0 most significant) to spins.
void index_to_spins(std::uint64_t index, std::span<std::uint8_t> spins) noexcept;
std::uint64_t spins_to_index(std::span<const std::uint8_t> spins) noexcept;

} // namespace arnqs
