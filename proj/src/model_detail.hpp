#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "arnqs/model.hpp"

namespace arnqs::detail {

/// log|g(R)_s| for the selected spin and whether that component is negative.
struct HeadValue {
    double log_abs = 0.0;
    bool negative = false;
};

HeadValue head_select(Activation g, double r0, double r1, int s) noexcept;

/// Gradient of log|g(R)_s| with respect to (r0, r1).
std::array<double, 2> head_select_grad(Activation g, double r0, double r1, int s) noexcept;

/// Conditional probability of spin 1; g must be normalizing.
double head_prob_one(Activation g, double r0, double r1) noexcept;

inline constexpr double kPi = 3.14159265358979323846;

// Recurrent network entry points.
void rnn_evaluate(const RnnSpec& spec, const ParameterSet& params, const Configs& configs, LogAmplitudes& out);
void rnn_enumerate(const RnnSpec& spec, const ParameterSet& params, LogAmplitudes& out);
void rnn_draw(const RnnSpec& spec, const ParameterSet& params, std::size_t n, RngStream& rng, Configs& configs,
              LogAmplitudes& out);
void rnn_gradient(const RnnSpec& spec, const ParameterSet& params, const Configs& configs,
                  std::span<const double> weight_re, std::span<const double> weight_im, ParameterSet& grad);
SiteOutputs rnn_site_outputs(const RnnSpec& spec, const ParameterSet& params, std::span<const std::uint8_t> spins);

// Transformer entry points.
void atf_evaluate(const AtfSpec& spec, const ParameterSet& params, const Configs& configs, LogAmplitudes& out);
void atf_enumerate(const AtfSpec& spec, const ParameterSet& params, LogAmplitudes& out);
void atf_draw(const AtfSpec& spec, const ParameterSet& params, std::size_t n, RngStream& rng, Configs& configs,
              LogAmplitudes& out);
void atf_gradient(const AtfSpec& spec, const ParameterSet& params, const Configs& configs,
                  std::span<const double> weight_re, std::span<const double> weight_im, ParameterSet& grad);

} // namespace arnqs::detail

namespace arnqs::detail {

/// log_amplitudes without the layout and configuration checks.
inline void evaluate_unchecked(const ModelSpec& spec, const ParameterSet& params, const Configs& configs,
                               LogAmplitudes& out)
{
    out.log_modulus_sq.setZero(configs.rows());
    out.phase.setZero(configs.rows());
    if (const auto* r = std::get_if<RnnSpec>(&spec)) {
        rnn_evaluate(*r, params, configs, out);
    } else {
        atf_evaluate(std::get<AtfSpec>(spec), params, configs, out);
    }
}

} // namespace arnqs::detail
